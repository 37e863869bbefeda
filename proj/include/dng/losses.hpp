#pragma once

// Training objectives: perceptual reconstruction, the two temporal discriminator terms,
// the non-saturating generator term and discriminator feature matching.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "dng/discriminator.hpp"

namespace dng {

inline constexpr double kLogEpsilon = 1e-7;

struct LossWeights {
    double feat = 5.0;      // lambda_1
    double percept = 10.0;  // lambda_2
    double gan = 0.5;       // lambda_3

    void validate() const;
};

/// Frozen multi-layer image features phi_i used by the perceptual loss.
class PerceptualExtractor {
public:
    virtual ~PerceptualExtractor() = default;
    /// Activations of every tapped layer for a [B, 3, H, W] image in [0,1].
    virtual std::vector<torch::Tensor> taps(const torch::Tensor& image) = 0;
    virtual std::vector<torch::Tensor> parameters() = 0;
    virtual std::string name() const = 0;
};

/// Seeded random conv stack 3 -> 16 -> 32 (stride 2) -> 64 (stride 2) with ReLU, tapped
/// after every activation.
std::unique_ptr<PerceptualExtractor> make_random_extractor(std::uint64_t seed);
/// TorchScript module whose forward returns a list of feature tensors (e.g. a traced
/// pretrained classifier truncated at several layers).
std::unique_ptr<PerceptualExtractor> load_scripted_extractor(const std::filesystem::path& path);

/// FNV-1a over the raw bytes of every parameter.
std::uint64_t parameter_hash(const std::vector<torch::Tensor>& params);

/// sum_i mean|phi_i(R) - phi_i(I)| + mean|R - I|.
torch::Tensor perceptual_loss(PerceptualExtractor& extractor, const torch::Tensor& r, const torch::Tensor& i);

/// -log(clamp(p)) for real targets, -log(clamp(1 - p)) for fake ones, mean-reduced.
torch::Tensor bce(const torch::Tensor& prob, bool real);

/// L_D1 + L_D2 given the four patch-probability maps D[I_t, I_t-1], D[R_t, I_t-1],
/// D[I_t+1, I_t], D[I_t+1, R_t].
torch::Tensor d_loss_from_probs(const torch::Tensor& real1, const torch::Tensor& fake1, const torch::Tensor& real2,
                                const torch::Tensor& fake2);
/// -log D[R_t, I_t-1] - log D[I_t+1, R_t].
torch::Tensor g_gan_loss_from_probs(const torch::Tensor& fake1, const torch::Tensor& fake2);

/// R_t is detached inside.
torch::Tensor d_loss(Discriminator& d, const torch::Tensor& r_t, const torch::Tensor& i_prev, const torch::Tensor& i_t,
                     const torch::Tensor& i_next);
torch::Tensor g_gan_loss(Discriminator& d, const torch::Tensor& r_t, const torch::Tensor& i_prev,
                         const torch::Tensor& i_next);
/// sum over the intermediate D layers (the logit map excluded) of mean|D^i[fake] - D^i[real]|
/// for both temporal pairs. Real
/// activations are treated as constants.
torch::Tensor feature_matching_loss(Discriminator& d, const torch::Tensor& r_t, const torch::Tensor& i_prev,
                                    const torch::Tensor& i_t, const torch::Tensor& i_next);

struct GeneratorAdversarialLosses {
    torch::Tensor feat;
    torch::Tensor gan;
};

/// feature_matching_loss and g_gan_loss sharing one discriminator pass over the fake pairs.
GeneratorAdversarialLosses generator_adversarial_losses(Discriminator& d, const torch::Tensor& r_t,
                                                        const torch::Tensor& i_prev, const torch::Tensor& i_t,
                                                        const torch::Tensor& i_next);

torch::Tensor g_total_loss(const LossWeights& w, const torch::Tensor& feat, const torch::Tensor& percept,
                           const torch::Tensor& gan);
double g_total_loss(const LossWeights& w, double feat, double percept, double gan);

}  // namespace dng
