#include <gtest/gtest.h>

#include <cmath>

#include "dng/error.hpp"
#include "dng/losses.hpp"

using namespace dng;

namespace {

// Zero the final layer so every patch logit is 0, i.e. D = 0.5 everywhere.
Discriminator half_discriminator(int base = 8) {
    DiscriminatorConfig cfg;
    cfg.base_channels = base;
    Discriminator d(cfg);
    torch::NoGradGuard g;
    const std::string last = std::to_string(cfg.layers.size() - 1) + ".";
    for (auto& p : d->named_parameters()) {
        if (p.key().find(last) != std::string::npos) p.value().zero_();
    }
    return d;
}

torch::Tensor frames(int seed) {
    torch::manual_seed(seed);
    return torch::rand({2, 3, 80, 80});
}

}  // namespace

TEST(Losses, BceMatchesScalarFormula) {
    const auto p = torch::tensor({0.2, 0.9, 0.0, 1.0}, torch::kFloat64);
    const double eps = 1e-7;
    const double real = -(std::log(0.2) + std::log(0.9) + std::log(eps) + std::log(1 - eps)) / 4;
    const double fake = -(std::log(0.8) + std::log(0.1) + std::log(1 - eps) + std::log(eps)) / 4;
    EXPECT_NEAR(bce(p, true).item<double>(), real, 1e-9);
    EXPECT_NEAR(bce(p, false).item<double>(), fake, 1e-9);
}

TEST(Losses, HalfDiscriminatorGivesLogTwoTerms) {
    auto d = half_discriminator();
    const auto a = frames(1), b = frames(2), c = frames(3), r = frames(4);
    EXPECT_NEAR(d_loss(d, r, a, b, c).item<double>(), 4 * std::log(2.0), 1e-6);
    EXPECT_NEAR(g_gan_loss(d, r, a, c).item<double>(), 2 * std::log(2.0), 1e-6);
    const auto half = torch::full({2, 1, 5, 5}, 0.5);
    EXPECT_NEAR(d_loss_from_probs(half, half, half, half).item<double>(), 4 * std::log(2.0), 1e-6);
}

TEST(Losses, TotalUsesDefaultWeights) {
    const LossWeights w;
    EXPECT_EQ(g_total_loss(w, 1.0, 1.0, 1.0), 15.5);
    const auto one = torch::ones({}, torch::kFloat64);
    EXPECT_EQ(g_total_loss(w, one, one, one).item<double>(), 15.5);
    EXPECT_EQ(g_total_loss(w, 0.0, 2.0, 4.0), 22.0);
}

TEST(Losses, PerceptualVanishesOnIdenticalImages) {
    auto ex = make_random_extractor(7);
    const auto r = frames(5);
    EXPECT_EQ(perceptual_loss(*ex, r, r).item<double>(), 0.0);
    EXPECT_GT(perceptual_loss(*ex, r, frames(6)).item<double>(), 0.0);
}

TEST(Losses, PerceptualIncludesPixelTerm) {
    auto ex = make_random_extractor(7);
    const auto r = frames(5), i = frames(6);
    auto want = (r - i).abs().mean();
    const auto fr = ex->taps(r), fi = ex->taps(i);
    ASSERT_EQ(fr.size(), 3u);
    for (size_t k = 0; k < fr.size(); ++k) want = want + (fr[k] - fi[k]).abs().mean();
    EXPECT_NEAR(perceptual_loss(*ex, r, i).item<double>(), want.item<double>(), 1e-6);
}

TEST(Losses, FeatureMatchingVanishesForRealFrame) {
    DiscriminatorConfig cfg;
    cfg.base_channels = 8;
    Discriminator d(cfg);
    const auto a = frames(1), b = frames(2), c = frames(3);
    EXPECT_EQ(feature_matching_loss(d, b, a, b, c).item<double>(), 0.0);
    EXPECT_GT(feature_matching_loss(d, frames(9), a, b, c).item<double>(), 0.0);
}

TEST(Losses, DiscriminatorLossDoesNotReachGenerator) {
    DiscriminatorConfig cfg;
    cfg.base_channels = 8;
    Discriminator d(cfg);
    auto r = frames(4).set_requires_grad(true);
    d_loss(d, r, frames(1), frames(2), frames(3)).backward();
    EXPECT_FALSE(r.grad().defined());
}

TEST(Losses, ExtractorIsDeterministicAndHashed) {
    auto a = make_random_extractor(3), b = make_random_extractor(3), c = make_random_extractor(4);
    EXPECT_EQ(parameter_hash(a->parameters()), parameter_hash(b->parameters()));
    EXPECT_NE(parameter_hash(a->parameters()), parameter_hash(c->parameters()));
}

TEST(Losses, RejectsNegativeWeights) {
    LossWeights w;
    w.gan = -1;
    EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Discriminator, ReceptiveFieldAndOutput) {
    const DiscriminatorConfig cfg;
    EXPECT_EQ(receptive_field(cfg.layers), 70);
    EXPECT_EQ(receptive_field({{3, 1}}), 3);
    EXPECT_EQ(receptive_field({{3, 2}, {3, 2}}), 7);
    DiscriminatorConfig small = cfg;
    small.base_channels = 4;
    Discriminator d(small);
    const auto f = d->features(frame_pair(torch::rand({1, 3, 128, 128}), torch::rand({1, 3, 128, 128})));
    ASSERT_EQ(f.size(), 5u);
    EXPECT_EQ(f.back().size(1), 1);
    EXPECT_EQ(f.back().size(2), 14);
}
