#include "dng/neural_descriptor.hpp"

#include <algorithm>
#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

namespace dng {

NeuralTexture::NeuralTexture(const TextureConfig& config, std::uint64_t seed) : config_(config) {
    if (config.levels < 1 || config.channels < 1) throw ConfigError("texture needs at least one level and channel");
    if ((config.base_resolution >> (config.levels - 1)) < 1) {
        throw ConfigError("texture base resolution too small for the level count");
    }
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (int l = 0; l < config.levels; ++l) {
        const int r = level_resolution(l);
        auto level = torch::rand({r, r, config.channels}, gen, torch::kFloat32);
        level = (level * 2.0f - 1.0f) * config.init_range;
        levels_.push_back(level.set_requires_grad(true));
    }
}

NeuralTexture NeuralTexture::clone() const {
    NeuralTexture out;
    out.config_ = config_;
    for (const auto& l : levels_) out.levels_.push_back(l.detach().clone().set_requires_grad(l.requires_grad()));
    return out;
}

SamplingPlan plan_sampling(const GBuffer& gbuffer, const TextureConfig& config) {
    SamplingPlan plan;
    plan.height = gbuffer.height;
    plan.width = gbuffer.width;
    std::vector<std::int64_t> pixels;
    for (std::size_t i = 0; i < gbuffer.pixel_count(); ++i) {
        if (gbuffer.mask[i]) pixels.push_back(static_cast<std::int64_t>(i));
    }
    const auto n = static_cast<std::int64_t>(pixels.size());
    plan.pixels = torch::tensor(pixels, torch::kInt64);
    if (n == 0) plan.pixels = torch::empty({0}, torch::kInt64);

    for (int l = 0; l < config.levels; ++l) {
        const int r = config.base_resolution >> l;
        auto idx = torch::empty({4, n}, torch::kInt64);
        auto w = torch::empty({4, n, 1}, torch::kFloat32);
        auto ia = idx.accessor<std::int64_t, 2>();
        auto wa = w.accessor<float, 3>();
        for (std::int64_t k = 0; k < n; ++k) {
            const Vec2& uv = gbuffer.uv[static_cast<std::size_t>(pixels[static_cast<std::size_t>(k)])];
            const double x = static_cast<double>(uv.x()) * r - 0.5;
            const double y = static_cast<double>(uv.y()) * r - 0.5;
            const double fx0 = std::floor(x), fy0 = std::floor(y);
            const double ax = x - fx0, ay = y - fy0;
            const int x0 = std::clamp(static_cast<int>(fx0), 0, r - 1), x1 = std::clamp(static_cast<int>(fx0) + 1, 0, r - 1);
            const int y0 = std::clamp(static_cast<int>(fy0), 0, r - 1), y1 = std::clamp(static_cast<int>(fy0) + 1, 0, r - 1);
            ia[0][k] = static_cast<std::int64_t>(y0) * r + x0;
            ia[1][k] = static_cast<std::int64_t>(y0) * r + x1;
            ia[2][k] = static_cast<std::int64_t>(y1) * r + x0;
            ia[3][k] = static_cast<std::int64_t>(y1) * r + x1;
            wa[0][k][0] = static_cast<float>((1.0 - ax) * (1.0 - ay));
            wa[1][k][0] = static_cast<float>(ax * (1.0 - ay));
            wa[2][k][0] = static_cast<float>((1.0 - ax) * ay);
            wa[3][k][0] = static_cast<float>(ax * ay);
        }
        plan.indices.push_back(idx);
        plan.weights.push_back(w);
    }
    return plan;
}

torch::Tensor sample_texture(const NeuralTexture& texture, const SamplingPlan& plan) {
    const auto& cfg = texture.config();
    if (static_cast<int>(plan.indices.size()) != cfg.levels) {
        throw SchemaMismatch("sampling plan was built for a different texture level count");
    }
    const auto dtype = texture.levels().front().scalar_type();
    std::vector<torch::Tensor> per_level;
    for (int l = 0; l < cfg.levels; ++l) {
        const auto& level = texture.levels()[static_cast<std::size_t>(l)];
        const int r = texture.level_resolution(l);
        const auto flat = level.reshape({static_cast<std::int64_t>(r) * r, cfg.channels});
        const auto& idx = plan.indices[static_cast<std::size_t>(l)];
        const auto w = plan.weights[static_cast<std::size_t>(l)].to(dtype);
        auto v = flat.index_select(0, idx[0]) * w[0];
        for (int c = 1; c < 4; ++c) v = v + flat.index_select(0, idx[c]) * w[c];
        per_level.push_back(v);
    }
    const auto values = torch::cat(per_level, 1);  // [N, levels*C]
    const std::int64_t hw = static_cast<std::int64_t>(plan.height) * plan.width;
    auto full = torch::zeros({hw, cfg.feature_dim()}, values.options());
    full = full.index_copy(0, plan.pixels, values);
    return full.reshape({plan.height, plan.width, cfg.feature_dim()}).permute({2, 0, 1}).contiguous();
}

torch::Tensor sample_texture(const NeuralTexture& texture, const GBuffer& gbuffer) {
    return sample_texture(texture, plan_sampling(gbuffer, texture.config()));
}

Image motion_feature_map(std::span<const Vec3> world_pos, std::span<const std::uint8_t> mask, int height,
                         int width, const SkeletonPose& pose, float sigma) {
    if (!(sigma > 0.0f)) throw ConfigError("motion feature sigma must be positive");
    const std::size_t n = static_cast<std::size_t>(height) * width;
    if (world_pos.size() != n || mask.size() != n) throw SchemaMismatch("motion_feature_map: buffer size mismatch");
    const int j_count = pose.joint_count();
    Image out(height, width, j_count, ImageKind::kFeature);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        float* px = out.pixels.data() + i * static_cast<std::size_t>(j_count);
        for (int j = 0; j < j_count; ++j) {
            const float d2 = (world_pos[i] - pose.joints[static_cast<std::size_t>(j)]).squaredNorm();
            px[j] = std::exp(-d2 / sigma);
        }
    }
    return out;
}

Image stack_motion_features(const GBuffer& gbuffer_t, const MeshSequence& coarse, const MotionClip& clip, int t,
                            int stride, int maps, float sigma) {
    if (maps < 1 || stride < 1) throw ConfigError("motion feature stack needs maps >= 1 and stride >= 1");
    if (t < 0 || t >= clip.frame_count() || t >= coarse.frame_count()) {
        throw ConfigError("motion feature frame " + std::to_string(t) + " outside the sequence");
    }
    const int j_count = clip.joint_count();
    const int h = gbuffer_t.height, w = gbuffer_t.width;
    Image out(h, w, j_count * maps, ImageKind::kFeature);
    for (int m = 0; m < maps; ++m) {
        const int tau = std::max(0, t - stride * m);
        const auto positions = world_positions_at(gbuffer_t, coarse.topology(), coarse.frame(tau));
        const Image single = motion_feature_map(positions, gbuffer_t.mask, h, w, clip.pose(tau), sigma);
        for (std::size_t i = 0; i < gbuffer_t.pixel_count(); ++i) {
            std::copy_n(single.pixels.data() + i * static_cast<std::size_t>(j_count), j_count,
                        out.pixels.data() + i * static_cast<std::size_t>(out.channels) + static_cast<std::size_t>(m * j_count));
        }
    }
    return out;
}

torch::Tensor to_chw(const Image& image) {
    auto t = torch::from_blob(const_cast<float*>(image.pixels.data()), {image.height, image.width, image.channels},
                              torch::kFloat32);
    return t.permute({2, 0, 1}).contiguous();
}

Image from_chw(const torch::Tensor& tensor, ImageKind kind) {
    auto t = tensor.detach().to(torch::kFloat32);
    if (t.dim() == 4) t = t.squeeze(0);
    if (t.dim() != 3) throw SchemaMismatch("from_chw expects a [C,H,W] tensor");
    t = t.permute({1, 2, 0}).contiguous();
    Image out(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), kind);
    std::copy_n(t.data_ptr<float>(), out.pixels.size(), out.pixels.data());
    return out;
}

torch::Tensor mask_tensor(const GBuffer& gbuffer) {
    auto m = torch::empty({1, gbuffer.height, gbuffer.width}, torch::kFloat32);
    float* p = m.data_ptr<float>();
    for (std::size_t i = 0; i < gbuffer.pixel_count(); ++i) p[i] = gbuffer.mask[i] ? 1.0f : 0.0f;
    return m;
}

DescriptorImage build_descriptor(const torch::Tensor& features, const torch::Tensor& motion, const torch::Tensor& mask) {
    if (features.dim() != 3 || mask.dim() != 3) throw SchemaMismatch("build_descriptor expects [C,H,W] inputs");
    if (features.size(1) != mask.size(1) || features.size(2) != mask.size(2)) {
        throw SchemaMismatch("build_descriptor: feature and mask sizes differ");
    }
    DescriptorImage d;
    d.neural_channels = static_cast<int>(features.size(0));
    d.mask = mask;
    if (motion.defined() && motion.numel() > 0) {
        if (motion.dim() != 3 || motion.size(1) != features.size(1) || motion.size(2) != features.size(2)) {
            throw SchemaMismatch("build_descriptor: motion stack size differs from the feature image");
        }
        d.channels = torch::cat({features, motion.to(features.scalar_type())}, 0) * mask;
    } else {
        d.channels = features * mask;
    }
    return d;
}

std::pair<torch::Tensor, torch::Tensor> split_descriptor(const DescriptorImage& d) {
    const auto neural = d.channels.narrow(0, 0, d.neural_channels);
    const auto motion = d.channels.narrow(0, d.neural_channels, d.channels.size(0) - d.neural_channels);
    return {neural, motion};
}

}  // namespace dng
