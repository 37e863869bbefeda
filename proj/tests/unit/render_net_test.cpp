#include <gtest/gtest.h>

#include "dng/render_net.hpp"
#include "oracles.hpp"

using namespace dng;

namespace {

std::vector<double> flat(const torch::Tensor& t) {
    const auto d = t.to(torch::kFloat64).contiguous();
    return {d.data_ptr<double>(), d.data_ptr<double>() + d.numel()};
}

GeneratorConfig tiny_config() {
    GeneratorConfig c;
    c.in_channels = 10;
    c.encoder_channels = {8, 8};
    c.feature_channels = 4;
    return c;
}

}  // namespace

TEST(InstanceNorm, ZeroMeanUnitStdPerChannel) {
    torch::manual_seed(0);
    const auto x = torch::randn({2, 3, 7, 5}) * 4 + 2;
    const auto y = instance_norm(x);
    EXPECT_LE(y.mean({2, 3}).abs().max().item<float>(), 1e-5f);
    const auto sd = (y - y.mean({2, 3}, true)).pow(2).mean({2, 3}).sqrt();
    EXPECT_LE((sd - 1).abs().max().item<float>(), 1e-3f);
}

TEST(Spade, MatchesScalarReference) {
    torch::manual_seed(1);
    SpadeBlock block(3, 2);
    {
        // move away from the near-identity initialisation so the convolutions matter
        torch::NoGradGuard g;
        for (auto& p : block->parameters()) p.normal_(0.0, 0.5);
    }
    const auto w = torch::randn({1, 3, 6, 4});
    const auto cond = torch::randn({1, 2, 3, 2});
    const auto out = block->forward(w, cond);
    const auto want = oracle::spade(flat(w), 3, 6, 4, flat(cond), 2, 3, 2, block->gamma->weight, block->gamma->bias,
                                    block->beta->weight, block->beta->bias, kNormEpsilon);
    const auto got = flat(out);
    ASSERT_EQ(got.size(), want.size());
    for (size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-5);
}

TEST(Spade, ForcedIdentityNormalizes) {
    torch::manual_seed(2);
    SpadeBlock block(4, 3);
    {
        torch::NoGradGuard g;
        block->gamma->weight.zero_();
        block->gamma->bias.fill_(1.0);
        block->beta->weight.zero_();
        block->beta->bias.zero_();
    }
    const auto out = block->forward(torch::randn({2, 4, 8, 8}) * 3 + 5, torch::randn({2, 3, 8, 8}));
    EXPECT_LE(out.mean({2, 3}).abs().max().item<float>(), 1e-5f);
    const auto sd = (out - out.mean({2, 3}, true)).pow(2).mean({2, 3}).sqrt();
    EXPECT_LE((sd - 1).abs().max().item<float>(), 1e-3f);
}

TEST(Spade, InitialisedNearIdentity) {
    SpadeBlock block(4, 8);
    EXPECT_TRUE(torch::all(block->gamma->bias == 1).item<bool>());
    EXPECT_TRUE(torch::all(block->beta->bias == 0).item<bool>());
}

TEST(TemporalNormalize, ComposesTwoSpadeBlocks) {
    torch::manual_seed(3);
    TemporalNormalize tn(4);
    const auto z = torch::randn({1, 4, 2, 2});
    const auto zp = torch::randn({1, 4, 2, 2});
    const auto cond = torch::cat({z, zp}, 1);
    const auto y0 = tn->inner->forward(instance_norm(z), cond);
    const auto want = tn->outer->forward(instance_norm(y0), cond) + y0;
    EXPECT_TRUE(torch::allclose(tn->forward(z, zp), want));
    EXPECT_THROW(tn->forward(z, torch::randn({1, 4, 2, 3})), SchemaMismatch);
}

TEST(Generator, ShapesAndRange) {
    torch::manual_seed(4);
    Generator g(tiny_config());
    const auto q = torch::randn({2, 10, 16, 16});
    const auto z = g->encode(q);
    EXPECT_EQ(z.sizes(), (std::vector<int64_t>{2, 8, 4, 4}));
    const auto out = g->forward(q, q, torch::rand({2, 3, 16, 16}));
    EXPECT_EQ(out.rgb.sizes(), (std::vector<int64_t>{2, 3, 16, 16}));
    EXPECT_GE(out.rgb.min().item<float>(), 0.0f);
    EXPECT_LE(out.rgb.max().item<float>(), 1.0f);
    EXPECT_GE(out.blend.mask.min().item<float>(), 0.0f);
    EXPECT_LE(out.blend.mask.max().item<float>(), 1.0f);
}

TEST(Generator, RejectsBadInputs) {
    Generator g(tiny_config());
    EXPECT_THROW(g->encode(torch::randn({1, 9, 16, 16})), SchemaMismatch);
    EXPECT_THROW(g->encode(torch::randn({1, 10, 18, 16})), ConfigError);
}

TEST(Generator, BlendFollowsMask) {
    torch::manual_seed(5);
    Generator g(tiny_config());
    const auto z = torch::randn({1, 8, 4, 4});
    const auto bg = torch::rand({1, 3, 16, 16});
    const auto zero = g->decode_and_blend(z, bg, torch::zeros({1, 1, 1, 1}));
    EXPECT_TRUE(torch::allclose(zero.composite, zero.background));
    const auto one = g->decode_and_blend(z, bg, torch::ones({1, 1, 1, 1}));
    EXPECT_TRUE(torch::allclose(one.composite, one.features));
}

TEST(Generator, DefaultConfigMatchesDescriptor) {
    const GeneratorConfig c;
    EXPECT_EQ(c.in_channels, 178);
    EXPECT_EQ(c.downsampling(), 32);
    EXPECT_EQ(GeneratorConfig::from_json(c.to_json()), c);
}
