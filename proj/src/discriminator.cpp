#include "dng/discriminator.hpp"

#include "dng/error.hpp"
#include "dng/render_net.hpp"

namespace dng {

json DiscriminatorConfig::to_json() const {
    json layer_list = json::array();
    for (const auto& l : layers) layer_list.push_back({l.kernel, l.stride});
    return {{"in_channels", in_channels}, {"base_channels", base_channels}, {"leaky_slope", leaky_slope}, {"layers", layer_list}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const json& j) {
    DiscriminatorConfig c;
    try {
        c.in_channels = j.at("in_channels").get<int>();
        c.base_channels = j.at("base_channels").get<int>();
        c.leaky_slope = j.value("leaky_slope", 0.2);
        if (j.contains("layers")) {
            c.layers.clear();
            for (const auto& l : j.at("layers")) c.layers.push_back({l.at(0).get<int>(), l.at(1).get<int>()});
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("discriminator config: ") + e.what());
    }
    return c;
}

int receptive_field(const std::vector<ConvSpec>& layers) {
    int rf = 1;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) rf = (rf - 1) * it->stride + it->kernel;
    return rf;
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorConfig& config) : config_(config) {
    if (config.layers.size() < 2) throw ConfigError("discriminator needs at least two layers");
    int c = config.in_channels;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const bool last = i + 1 == config.layers.size();
        const int out = last ? 1 : config.base_channels * (1 << std::min<std::size_t>(i, 3));
        const auto& l = config.layers[i];
        convs_->push_back(torch::nn::Conv2d(
            torch::nn::Conv2dOptions(c, out, l.kernel).stride(l.stride).padding((l.kernel - 1) / 2)));
        c = out;
    }
    register_module("convs", convs_);
}

std::vector<torch::Tensor> DiscriminatorImpl::features(const torch::Tensor& pair) {
    if (pair.dim() != 4 || pair.size(1) != config_.in_channels) {
        throw SchemaMismatch("discriminator expects [B, " + std::to_string(config_.in_channels) + ", H, W] input");
    }
    std::vector<torch::Tensor> acts;
    auto x = pair;
    const std::size_t n = convs_->size();
    for (std::size_t i = 0; i < n; ++i) {
        x = convs_[i]->as<torch::nn::Conv2d>()->forward(x);
        if (i + 1 < n) {
            if (i > 0) x = instance_norm(x);
            x = torch::leaky_relu(x, config_.leaky_slope);
        }
        acts.push_back(x);
    }
    return acts;
}

}  // namespace dng
