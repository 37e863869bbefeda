#pragma once

// The generator G: encode the descriptor maps of frames t and t-1, normalize the latent of
// frame t with SPADE blocks conditioned on both, decode garment features U, blend them over
// background features through a learned mask A and refine to RGB.

#include <optional>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "dng/domain.hpp"
#include "dng/neural_descriptor.hpp"
#include "dng/rasterizer.hpp"

namespace dng {

using json = nlohmann::json;

inline constexpr double kNormEpsilon = 1e-5;

struct GeneratorConfig {
    int in_channels = 64 + kDefaultJointCount * 6;
    std::vector<int> encoder_channels{64, 128, 256, 512, 512};  // one stride-2 conv each
    int feature_channels = 32;                                  // U and background features
    double leaky_slope = 0.2;

    int downsampling() const { return 1 << encoder_channels.size(); }
    int latent_channels() const { return encoder_channels.back(); }
    json to_json() const;
    static GeneratorConfig from_json(const json& j);
    bool operator==(const GeneratorConfig&) const = default;
};

/// (x - mean) / (std + eps) per sample and channel over the spatial extent; std is biased.
torch::Tensor instance_norm(const torch::Tensor& x, double eps = kNormEpsilon);

/// Spatially-adaptive normalization: gamma(cond) * instance_norm(w) + beta(cond), with the
/// condition resized (nearest) to w's spatial size. The gamma branch's bias starts at 1.
class SpadeBlockImpl : public torch::nn::Module {
public:
    SpadeBlockImpl(int channels, int condition_channels);
    torch::Tensor forward(const torch::Tensor& w, const torch::Tensor& condition);
    std::pair<torch::Tensor, torch::Tensor> modulation(const torch::Tensor& condition, torch::IntArrayRef size);

    torch::nn::Conv2d gamma{nullptr};
    torch::nn::Conv2d beta{nullptr};
};
TORCH_MODULE(SpadeBlock);

/// y = outer(I(y0)) + y0 with y0 = inner(I(z_t)), both conditioned on [z_t || z_prev].
class TemporalNormalizeImpl : public torch::nn::Module {
public:
    explicit TemporalNormalizeImpl(int channels);
    torch::Tensor forward(const torch::Tensor& z_t, const torch::Tensor& z_prev);

    SpadeBlock inner{nullptr};
    SpadeBlock outer{nullptr};
};
TORCH_MODULE(TemporalNormalize);

/// x + conv(lrelu(conv(x))).
class ResidualBlockImpl : public torch::nn::Module {
public:
    ResidualBlockImpl(int channels, double slope);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr};
    torch::nn::Conv2d conv2{nullptr};

private:
    double slope_;
};
TORCH_MODULE(ResidualBlock);

struct BlendOutput {
    torch::Tensor features;    // U, [B, F, H, W]
    torch::Tensor background;  // B-hat, [B, F, H, W]
    torch::Tensor mask;        // A, [B, 1, H, W]
    torch::Tensor composite;   // (1 - A) * B-hat + A * U
};

struct RenderOutput {
    torch::Tensor rgb;  // R in [0,1], [B, 3, H, W]
    BlendOutput blend;
};

class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(const GeneratorConfig& config);

    const GeneratorConfig& config() const { return config_; }

    /// [B, C_Q, H, W] -> [B, C_latent, H/32, W/32]. Throws SchemaMismatch on a channel mismatch
    /// and ConfigError when H or W is not a multiple of the downsampling factor.
    torch::Tensor encode(const torch::Tensor& q);
    torch::Tensor temporal_normalize(const torch::Tensor& z_t, const torch::Tensor& z_prev);
    /// `forced_mask`, when given, replaces A (used by tests and ablations).
    BlendOutput decode_and_blend(const torch::Tensor& z, const torch::Tensor& background_rgb,
                                 const std::optional<torch::Tensor>& forced_mask = std::nullopt);
    torch::Tensor refine(const torch::Tensor& composite);
    RenderOutput forward(const torch::Tensor& q_t, const torch::Tensor& q_prev, const torch::Tensor& background_rgb);

    /// The stage after blending (two residual blocks and the RGB projection).
    torch::nn::Sequential& refinement() { return refine_; }

    torch::nn::Sequential encoder{nullptr};
    TemporalNormalize temporal{nullptr};
    torch::nn::Sequential decoder{nullptr};
    torch::nn::Sequential background{nullptr};
    torch::nn::Conv2d mask_head{nullptr};

private:
    GeneratorConfig config_;
    torch::nn::Sequential refine_{nullptr};
};
TORCH_MODULE(Generator);

/// Per (view, frame) inputs that do not depend on learnable parameters.
struct FrameInputs {
    GBuffer gbuffer;
    SamplingPlan plan;
    torch::Tensor mask;    // [1, H, W]
    torch::Tensor motion;  // [J*maps, H, W], undefined when motion features are off
};

FrameInputs make_frame_inputs(const MeshSequence& coarse, const MotionClip& clip, int t, const Camera& camera,
                              Resolution resolution, const TextureConfig& texture, const MotionFeatureConfig& motion);

/// Q = [sampled texture || motion features], masked. [C_Q, H, W].
torch::Tensor descriptor_tensor(const NeuralTexture& texture, const FrameInputs& inputs);

/// Full per-frame path for one view; `previous` may be null at the start of a sequence, in
/// which case Q_{t-1} = Q_t. `background` is [3, H, W].
RenderOutput render_frame(Generator& generator, const NeuralTexture& texture, const FrameInputs& current,
                          const FrameInputs* previous, const torch::Tensor& background);

}  // namespace dng
