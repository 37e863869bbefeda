#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dng/evaluation.hpp"
#include "dng/postprocess.hpp"
#include "oracles.hpp"

using namespace dng;

namespace {

Image filled(int h, int w, int c, float v) { return Image(h, w, c, c == 1 ? ImageKind::kMask : ImageKind::kRgb, v); }

}  // namespace

TEST(Evaluation, MseStatistics) {
    const std::vector<Image> gt{filled(2, 2, 3, 0.0f), filled(2, 2, 3, 0.0f), filled(2, 2, 3, 0.0f)};
    const std::vector<Image> pred{filled(2, 2, 3, 0.1f), filled(2, 2, 3, 0.2f), filled(2, 2, 3, 0.3f)};
    const auto m = evaluate(pred, gt);
    ASSERT_EQ(m.per_frame_mse.size(), 3u);
    EXPECT_NEAR(m.per_frame_mse[1], 0.04, 1e-7);
    const double mu = (0.01 + 0.04 + 0.09) / 3;
    EXPECT_NEAR(m.mu_mse, mu, 1e-7);
    const double var = ((0.01 - mu) * (0.01 - mu) + (0.04 - mu) * (0.04 - mu) + (0.09 - mu) * (0.09 - mu)) / 3;
    EXPECT_NEAR(m.sigma_mse, std::sqrt(var), 1e-7);
    EXPECT_FALSE(m.fid.has_value());
    const auto j = m.to_json();
    EXPECT_TRUE(j.at("fid").is_null());
    EXPECT_THROW(evaluate(std::vector<Image>(pred.begin(), pred.begin() + 2), gt), SchemaMismatch);
    EXPECT_THROW(frame_mse(filled(2, 2, 3, 0), filled(2, 3, 3, 0)), SchemaMismatch);
}

TEST(Evaluation, FrechetOfShiftedGaussians) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd a(4000, 2), b(4000, 2);
    for (int i = 0; i < a.rows(); ++i) {
        a(i, 0) = n(rng);
        a(i, 1) = n(rng);
        b(i, 0) = 2.0 * n(rng) + 3.0;
        b(i, 1) = n(rng);
    }
    EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-6);
    // |mu|^2 + (s1 - s2)^2 per axis: 9 + 1
    EXPECT_NEAR(frechet_distance(a, b), 10.0, 0.4);
}

TEST(Relayer, MatchesPerPixelOracle) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    const int h = 16, w = 12;
    Image render = filled(h, w, 3, 0.2f), body = filled(h, w, 3, 0.9f);
    Image arm = filled(h, w, 1, 0.0f), garment = filled(h, w, 1, 0.0f);
    std::vector<float> ad(h * w), gd(h * w);
    for (int i = 0; i < h * w; ++i) {
        render.pixels[3 * i] = u(rng);
        arm.pixels[i] = u(rng) < 0.5f ? 1.0f : 0.0f;
        garment.pixels[i] = u(rng) < 0.6f ? 1.0f : 0.0f;
        ad[i] = u(rng) < 0.1f ? 0.0f : 1.0f + u(rng);
        gd[i] = u(rng) < 0.1f ? 0.0f : 1.0f + u(rng);
    }
    const LayerInputs in{render, body, arm, garment, ad, gd};
    const auto got = relayer_pixels(in);
    EXPECT_EQ(got, oracle::relayer_pixels(arm.pixels, garment.pixels, ad, gd, 0.01));
    const Image out = relayer(in);
    std::vector<bool> changed(h * w, false);
    for (size_t i : got) changed[i] = true;
    for (int i = 0; i < h * w; ++i) {
        for (int c = 0; c < 3; ++c) {
            EXPECT_EQ(out.pixels[3 * i + c], changed[i] ? body.pixels[3 * i + c] : render.pixels[3 * i + c]);
        }
    }
    // idempotent
    const LayerInputs again{out, body, arm, garment, ad, gd};
    EXPECT_EQ(relayer(again).pixels, out.pixels);
}

TEST(Relayer, DeltaAndMissingDepth) {
    Image render = filled(1, 3, 3, 0.0f), body = filled(1, 3, 3, 1.0f);
    Image arm = filled(1, 3, 1, 1.0f), garment = filled(1, 3, 1, 1.0f);
    // within delta, clearly in front, garment depth missing
    const std::vector<float> ad{1.995f, 1.5f, 1.0f}, gd{2.0f, 2.0f, 0.0f};
    const auto px = relayer_pixels({render, body, arm, garment, ad, gd});
    EXPECT_EQ(px, std::vector<size_t>{1});
}

TEST(Relayer, RejectsMismatchedInputs) {
    Image render = filled(2, 2, 3, 0), body = filled(2, 3, 3, 0), m = filled(2, 2, 1, 0);
    const std::vector<float> d(4, 1.0f);
    EXPECT_THROW(relayer({render, body, m, m, d, d}), SchemaMismatch);
    const std::vector<float> short_d(3, 1.0f);
    EXPECT_THROW(relayer({render, render, m, m, short_d, d}), SchemaMismatch);
}
