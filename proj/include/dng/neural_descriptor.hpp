#pragma once

// Neural descriptor maps: a learnable multi-level texture sampled through the G-buffer,
// concatenated with view-invariant motion-feature images.

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "dng/domain.hpp"
#include "dng/rasterizer.hpp"

namespace dng {

struct TextureConfig {
    int base_resolution = 256;
    int levels = 4;
    int channels = 16;
    float init_range = 0.05f;

    int feature_dim() const { return levels * channels; }
    bool operator==(const TextureConfig&) const = default;
};

/// Level l is a (R/2^l) x (R/2^l) x C grid of trainable texels.
class NeuralTexture {
public:
    NeuralTexture() = default;
    NeuralTexture(const TextureConfig& config, std::uint64_t seed);

    const TextureConfig& config() const { return config_; }
    std::vector<torch::Tensor>& levels() { return levels_; }
    const std::vector<torch::Tensor>& levels() const { return levels_; }
    int level_resolution(int level) const { return config_.base_resolution >> level; }

    NeuralTexture clone() const;

private:
    TextureConfig config_;
    std::vector<torch::Tensor> levels_;
};

/// Precomputed bilinear taps of every covered pixel of a G-buffer, per texture level.
struct SamplingPlan {
    int height = 0;
    int width = 0;
    torch::Tensor pixels;                 // int64 [N], flat indices of covered pixels
    std::vector<torch::Tensor> indices;   // per level: int64 [4, N] flat texel ids
    std::vector<torch::Tensor> weights;   // per level: float [4, N, 1]
};

SamplingPlan plan_sampling(const GBuffer& gbuffer, const TextureConfig& config);

/// Bilinear sample (clamp-to-edge, texel centers at (i+0.5)/R) of every level at each covered
/// pixel's uv, level 0 first. Returns [levels*channels, H, W]; uncovered pixels are zero.
/// Differentiable in the texels.
torch::Tensor sample_texture(const NeuralTexture& texture, const SamplingPlan& plan);
torch::Tensor sample_texture(const NeuralTexture& texture, const GBuffer& gbuffer);

/// Channel j at pixel i: exp(-|v_i - M_j|^2 / sigma) where mask = 1, else 0. H x W x J.
Image motion_feature_map(std::span<const Vec3> world_pos, std::span<const std::uint8_t> mask, int height,
                         int width, const SkeletonPose& pose, float sigma);

struct MotionFeatureConfig {
    bool enabled = true;
    int maps = 6;      // current frame plus maps-1 past frames
    int stride = 2;    // frame interval between maps
    float sigma = 0.7225f;  // m^2, (0.5 * 1.7 m body height)^2

    int channels(int joint_count) const { return enabled ? joint_count * maps : 0; }
    bool operator==(const MotionFeatureConfig&) const = default;
};

/// Motion-feature stack for frame t with pixel correspondence fixed by `gbuffer_t`: for each
/// tau in {t, t-stride, ...} (clamped at 0), surface points are re-evaluated on frame tau's
/// coarse vertices and compared with pose tau. Current frame first. H x W x (J*maps).
Image stack_motion_features(const GBuffer& gbuffer_t, const MeshSequence& coarse, const MotionClip& clip, int t,
                            int stride, int maps, float sigma);

/// H x W x C image to a [C, H, W] float tensor.
torch::Tensor to_chw(const Image& image);
/// [C, H, W] (or [1, C, H, W]) tensor to an image of the given kind.
Image from_chw(const torch::Tensor& tensor, ImageKind kind);

torch::Tensor mask_tensor(const GBuffer& gbuffer);  // [1, H, W]

struct DescriptorImage {
    torch::Tensor channels;  // [64 + motion, H, W]
    torch::Tensor mask;      // [1, H, W]
    int neural_channels = 0;
};

/// Concatenates neural features (first) and motion features, zeroed outside the mask.
/// `motion` may be undefined when motion features are disabled.
DescriptorImage build_descriptor(const torch::Tensor& features, const torch::Tensor& motion, const torch::Tensor& mask);

/// Inverse of build_descriptor: (neural features, motion features).
std::pair<torch::Tensor, torch::Tensor> split_descriptor(const DescriptorImage& d);

}  // namespace dng
