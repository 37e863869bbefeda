#include "dng/render_net.hpp"

namespace dng {

namespace nn = torch::nn;

json GeneratorConfig::to_json() const {
    return {{"in_channels", in_channels},
            {"encoder_channels", encoder_channels},
            {"feature_channels", feature_channels},
            {"leaky_slope", leaky_slope}};
}

GeneratorConfig GeneratorConfig::from_json(const json& j) {
    GeneratorConfig c;
    try {
        c.in_channels = j.at("in_channels").get<int>();
        c.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
        c.feature_channels = j.at("feature_channels").get<int>();
        c.leaky_slope = j.value("leaky_slope", 0.2);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("generator config: ") + e.what());
    }
    return c;
}

torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
    const auto mean = x.mean({2, 3}, true);
    const auto std = (x - mean).pow(2).mean({2, 3}, true).sqrt();
    return (x - mean) / (std + eps);
}

namespace {

nn::Conv2d conv(int in, int out, int k, int stride, int pad) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad));
}

}  // namespace

SpadeBlockImpl::SpadeBlockImpl(int channels, int condition_channels) {
    gamma = register_module("gamma", conv(condition_channels, channels, 3, 1, 1));
    beta = register_module("beta", conv(condition_channels, channels, 3, 1, 1));
    // start close to plain instance normalization
    torch::NoGradGuard guard;
    gamma->weight.mul_(0.1);
    gamma->bias.fill_(1.0);
    beta->weight.mul_(0.1);
    beta->bias.zero_();
}

std::pair<torch::Tensor, torch::Tensor> SpadeBlockImpl::modulation(const torch::Tensor& condition,
                                                                   torch::IntArrayRef size) {
    auto c = condition;
    if (c.size(2) != size[0] || c.size(3) != size[1]) {
        c = torch::nn::functional::interpolate(
            c, torch::nn::functional::InterpolateFuncOptions().size(std::vector<int64_t>{size[0], size[1]}).mode(torch::kNearest));
    }
    return {gamma->forward(c), beta->forward(c)};
}

torch::Tensor SpadeBlockImpl::forward(const torch::Tensor& w, const torch::Tensor& condition) {
    auto [g, b] = modulation(condition, {w.size(2), w.size(3)});
    return g * instance_norm(w) + b;
}

TemporalNormalizeImpl::TemporalNormalizeImpl(int channels) {
    inner = register_module("inner", SpadeBlock(channels, 2 * channels));
    outer = register_module("outer", SpadeBlock(channels, 2 * channels));
}

torch::Tensor TemporalNormalizeImpl::forward(const torch::Tensor& z_t, const torch::Tensor& z_prev) {
    if (z_t.sizes() != z_prev.sizes()) throw SchemaMismatch("temporal_normalize: latent shapes differ");
    const auto cond = torch::cat({z_t, z_prev}, 1);
    const auto y0 = inner->forward(instance_norm(z_t), cond);
    return outer->forward(instance_norm(y0), cond) + y0;
}

ResidualBlockImpl::ResidualBlockImpl(int channels, double slope) : slope_(slope) {
    conv1 = register_module("conv1", conv(channels, channels, 3, 1, 1));
    conv2 = register_module("conv2", conv(channels, channels, 3, 1, 1));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    return x + conv2->forward(torch::leaky_relu(conv1->forward(x), slope_));
}

GeneratorImpl::GeneratorImpl(const GeneratorConfig& config) : config_(config) {
    if (config.encoder_channels.empty() || config.in_channels < 1 || config.feature_channels < 1) {
        throw ConfigError("generator needs input channels, feature channels and at least one encoder stage");
    }
    const double slope = config.leaky_slope;

    encoder = nn::Sequential();
    int c = config.in_channels;
    for (int out : config.encoder_channels) {
        encoder->push_back(conv(c, out, 4, 2, 1));
        encoder->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(slope)));
        c = out;
    }
    register_module("encoder", encoder);

    temporal = register_module("temporal", TemporalNormalize(c));

    decoder = nn::Sequential();
    const int stages = static_cast<int>(config.encoder_channels.size());
    for (int i = stages - 2; i >= -1; --i) {
        const int out = i >= 0 ? config.encoder_channels[static_cast<std::size_t>(i)] : config.feature_channels;
        decoder->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c, out, 4).stride(2).padding(1)));
        if (i >= 0) decoder->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(slope)));
        c = out;
    }
    register_module("decoder", decoder);

    const int f = config.feature_channels;
    background = nn::Sequential(conv(3, f, 3, 1, 1), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(slope)),
                                conv(f, f, 3, 1, 1));
    register_module("background", background);

    mask_head = register_module("mask_head", conv(f, 1, 1, 1, 0));

    refine_ = nn::Sequential(ResidualBlock(f, slope), ResidualBlock(f, slope), conv(f, 3, 3, 1, 1));
    register_module("refine", refine_);
}

torch::Tensor GeneratorImpl::encode(const torch::Tensor& q) {
    if (q.dim() != 4 || q.size(1) != config_.in_channels) {
        throw SchemaMismatch("encode: descriptor has " + std::to_string(q.dim() == 4 ? q.size(1) : -1) +
                             " channels, generator expects " + std::to_string(config_.in_channels));
    }
    const int factor = config_.downsampling();
    if (q.size(2) % factor != 0 || q.size(3) % factor != 0) {
        throw ConfigError("image size must be a multiple of " + std::to_string(factor));
    }
    return encoder->forward(q);
}

torch::Tensor GeneratorImpl::temporal_normalize(const torch::Tensor& z_t, const torch::Tensor& z_prev) {
    return temporal->forward(z_t, z_prev);
}

BlendOutput GeneratorImpl::decode_and_blend(const torch::Tensor& z, const torch::Tensor& background_rgb,
                                            const std::optional<torch::Tensor>& forced_mask) {
    BlendOutput out;
    out.features = decoder->forward(z);
    if (background_rgb.dim() != 4 || background_rgb.size(1) != 3 || background_rgb.size(2) != out.features.size(2) ||
        background_rgb.size(3) != out.features.size(3)) {
        throw SchemaMismatch("decode_and_blend: background must be [B, 3, H, W] at the output resolution");
    }
    out.background = background->forward(background_rgb);
    out.mask = forced_mask ? forced_mask->expand({out.features.size(0), 1, out.features.size(2), out.features.size(3)})
                           : torch::sigmoid(mask_head->forward(out.features));
    out.composite = (1 - out.mask) * out.background + out.mask * out.features;
    return out;
}

torch::Tensor GeneratorImpl::refine(const torch::Tensor& composite) { return torch::sigmoid(refine_->forward(composite)); }

RenderOutput GeneratorImpl::forward(const torch::Tensor& q_t, const torch::Tensor& q_prev,
                                    const torch::Tensor& background_rgb) {
    if (q_t.sizes() != q_prev.sizes()) throw SchemaMismatch("render: descriptor shapes of t and t-1 differ");
    const auto n = q_t.size(0);
    const auto z = encode(torch::cat({q_t, q_prev}, 0));
    const auto z_tilde = temporal_normalize(z.narrow(0, 0, n), z.narrow(0, n, n));
    RenderOutput out;
    out.blend = decode_and_blend(z_tilde, background_rgb);
    out.rgb = refine(out.blend.composite);
    return out;
}

FrameInputs make_frame_inputs(const MeshSequence& coarse, const MotionClip& clip, int t, const Camera& camera,
                              Resolution resolution, const TextureConfig& texture, const MotionFeatureConfig& motion) {
    FrameInputs in;
    in.gbuffer = rasterize(coarse.frame(t), coarse.topology(), camera, resolution);
    in.plan = plan_sampling(in.gbuffer, texture);
    in.mask = mask_tensor(in.gbuffer);
    if (motion.enabled) {
        in.motion = to_chw(stack_motion_features(in.gbuffer, coarse, clip, t, motion.stride, motion.maps, motion.sigma));
    }
    return in;
}

torch::Tensor descriptor_tensor(const NeuralTexture& texture, const FrameInputs& inputs) {
    return build_descriptor(sample_texture(texture, inputs.plan), inputs.motion, inputs.mask).channels;
}

RenderOutput render_frame(Generator& generator, const NeuralTexture& texture, const FrameInputs& current,
                          const FrameInputs* previous, const torch::Tensor& background) {
    const auto q_t = descriptor_tensor(texture, current).unsqueeze(0);
    const auto q_prev = previous ? descriptor_tensor(texture, *previous).unsqueeze(0) : q_t;
    return generator->forward(q_t, q_prev, background.unsqueeze(0));
}

}  // namespace dng
