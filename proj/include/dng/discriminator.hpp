#pragma once

// Temporal patch discriminator: classifies overlapping patches of two frames stacked
// channelwise (6 input channels) as real or generated.

#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace dng {

using json = nlohmann::json;

struct ConvSpec {
    int kernel;
    int stride;
};

struct DiscriminatorConfig {
    int in_channels = 6;
    int base_channels = 64;
    double leaky_slope = 0.2;
    // k4 with strides 2,2,2,1,1 -> 70 x 70 patches
    std::vector<ConvSpec> layers{{4, 2}, {4, 2}, {4, 2}, {4, 1}, {4, 1}};

    json to_json() const;
    static DiscriminatorConfig from_json(const json& j);
};

/// Receptive field of one output neuron of a plain conv stack.
int receptive_field(const std::vector<ConvSpec>& layers);

class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(const DiscriminatorConfig& config = {});

    /// Activations after every layer; the last entry is the patch-logit map [B, 1, h, w].
    std::vector<torch::Tensor> features(const torch::Tensor& pair);
    torch::Tensor forward(const torch::Tensor& pair) { return features(pair).back(); }

    const DiscriminatorConfig& config() const { return config_; }
    int receptive_field() const { return dng::receptive_field(config_.layers); }

private:
    DiscriminatorConfig config_;
    torch::nn::ModuleList convs_;
};
TORCH_MODULE(Discriminator);

/// Channelwise pair [a || b] in the order the losses use (D[a, b]).
inline torch::Tensor frame_pair(const torch::Tensor& a, const torch::Tensor& b) { return torch::cat({a, b}, 1); }

}  // namespace dng
