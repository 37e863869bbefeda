// Acceptance suite: one PASS/FAIL line per criterion on stdout. Library progress logs go to
// stderr. Criteria share datasets and trained models through a lazily filled context, so
// `--only 7` still builds what criterion 7 depends on.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "dng/checkpoint.hpp"
#include "dng/log.hpp"
#include "dng/pipeline.hpp"
#include "dng/postprocess.hpp"
#include "dng/runtime.hpp"
#include "oracles.hpp"

using namespace dng;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Accumulates named checks; the criterion passes when all of them do.
class Checks {
public:
    void add(bool ok, const std::string& what) {
        pass_ = pass_ && ok;
        if (!ss_.str().empty()) ss_ << "; ";
        ss_ << what << (ok ? "" : " [x]");
    }
    Outcome done() const { return {pass_, ss_.str()}; }

private:
    bool pass_ = true;
    std::ostringstream ss_;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

// Desk-scale configuration at 128x128: quarter-width generator and discriminator, smaller
// coarse MLPs, everything else at the defaults (optimiser settings included).
PipelineConfig desk_config(int resolution, int frames, int views) {
    json j = json::parse(R"({
        "seed": 0,
        "generator": {"encoder_channels": [16, 32, 64, 128, 128], "feature_channels": 16},
        "discriminator": {"base_channels": 16},
        "coarse": {"codec_hidden": [512, 256, 128], "codec_epochs": 300, "motion_epochs": 300}
    })");
    j["resolution"] = {resolution, resolution};
    j["data"] = {{"frames", frames}, {"views", views}};
    return config_from_json(j);
}

struct Context {
    fs::path work;
    fs::path cli;

    // 128x128, 50 frames, 3 views: coarse training and the overfit run
    PipelineConfig desk = desk_config(128, 50, 3);
    std::optional<Dataset> desk_data;
    std::optional<CoarseModel> desk_coarse;

    // 64x64, 6 views: ablations and fine-tunes
    PipelineConfig small = desk_config(64, 30, 6);
    std::optional<Dataset> small_data;
    std::optional<Renderer> small_base;  // motion features, views 0-1
    int small_steps = 600;

    const Dataset& desk_dataset() {
        if (!desk_data) desk_data = generate_dataset(desk);
        return *desk_data;
    }
    CoarseModel& desk_coarse_model() {
        if (!desk_coarse) {
            const auto& d = desk_dataset();
            desk_coarse = train_coarse(d.coarse, d.clip, desk.window, desk.codec, desk.motion_encoder, desk.codec_fit,
                                       desk.motion_fit)
                              .model;
        }
        return *desk_coarse;
    }
    const Dataset& small_dataset() {
        if (!small_data) small_data = generate_dataset(small);
        return *small_data;
    }
};

// ---------------------------------------------------------------------------------------

Camera front_camera(Resolution res) { return Camera::look_at({0, 0, 0}, {0, 0, 1}, 0.9f, res.width, res.height); }

Outcome rasterizer_oracle(Context&) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> faces(1, 200);
    const Resolution res{64, 64};
    const Camera cam = front_camera(res);
    int id_mismatch = 0, mask_mismatch = 0, covered = 0;
    double bary_err = 0.0;
    for (int m = 0; m < 25; ++m) {
        const TriMesh mesh = oracle::random_triangles(rng, faces(rng));
        const GBuffer g = rasterize(mesh, cam, res);
        const auto want = oracle::rasterize(mesh, cam, res);
        for (size_t i = 0; i < want.size(); ++i) {
            if (g.triangle_id[i] != want[i].tri) ++id_mismatch;
            if (g.mask[i] != (want[i].tri >= 0 ? 1 : 0)) ++mask_mismatch;
            if (want[i].tri >= 0 && g.triangle_id[i] == want[i].tri) {
                ++covered;
                bary_err = std::max(bary_err, (g.bary[i].cast<double>() - want[i].bary).cwiseAbs().maxCoeff());
            }
        }
    }
    const double secs = seconds_since(t0);
    Checks c;
    c.add(id_mismatch == 0, "triangle_id mismatches " + std::to_string(id_mismatch));
    c.add(mask_mismatch == 0, "mask mismatches " + std::to_string(mask_mismatch));
    c.add(bary_err <= 1e-5, "max bary error " + fmt(bary_err, 3) + " over " + std::to_string(covered) + " px");
    c.add(secs <= 60.0, fmt(secs, 3) + " s");
    return c.done();
}

Outcome texture_gradient(Context&) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    const Resolution res{48, 48};
    const GBuffer g = rasterize(oracle::random_triangles(rng, 40), front_camera(res), res);
    TextureConfig cfg{32, 4, 4, 0.5f};
    NeuralTexture tex(cfg, 3);
    for (auto& l : tex.levels()) l = l.detach().to(torch::kFloat64).set_requires_grad(true);
    const auto plan = plan_sampling(g, cfg);
    torch::manual_seed(5);
    const auto coeff = torch::randn({cfg.feature_dim(), res.height, res.width}, torch::kFloat64);
    // a nonlinear readout so that gradients depend on the texel values too
    auto objective = [&] {
        const auto f = sample_texture(tex, plan);
        return (f * coeff).sum() + 0.5 * f.pow(2).sum();
    };
    objective().backward();

    std::vector<std::array<int64_t, 4>> touched;
    for (int l = 0; l < cfg.levels; ++l) {
        const auto nz = tex.levels()[l].grad().nonzero();
        for (int64_t k = 0; k < nz.size(0); ++k) touched.push_back({l, nz[k][0].item<int64_t>(), nz[k][1].item<int64_t>(), nz[k][2].item<int64_t>()});
    }
    std::shuffle(touched.begin(), touched.end(), rng);
    const size_t probes = std::min<size_t>(150, touched.size());
    const double h = 1e-3;
    double worst = 0.0;
    for (size_t p = 0; p < probes; ++p) {
        const auto [l, y, x, ch] = touched[p];
        auto& t = tex.levels()[static_cast<size_t>(l)];
        const double analytic = t.grad()[y][x][ch].item<double>();
        torch::NoGradGuard guard;
        const double orig = t[y][x][ch].item<double>();
        t[y][x][ch] = orig + h;
        const double up = objective().item<double>();
        t[y][x][ch] = orig - h;
        const double down = objective().item<double>();
        t[y][x][ch] = orig;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - analytic) / std::max(std::abs(analytic), 1e-8));
    }
    const double secs = seconds_since(t0);
    Checks c;
    c.add(probes >= 100, std::to_string(probes) + " probes");
    c.add(worst <= 1e-4, "max rel error " + fmt(worst, 3));
    c.add(secs <= 60.0, fmt(secs, 3) + " s");
    return c.done();
}

std::vector<double> flat(const torch::Tensor& t) {
    const auto d = t.to(torch::kFloat64).contiguous();
    return {d.data_ptr<double>(), d.data_ptr<double>() + d.numel()};
}

Outcome formulas(Context&) {
    Checks c;
    // motion features on the rasterized rest-pose garment
    const auto pose = rest_pose();
    const auto garment = build_garment_grid(GarmentKind::kLongSkirt, 0.05f);
    const Resolution res{64, 64};
    const auto cam = Camera::look_at({0.3f, 0.9f, 2.2f}, {0, 0.7f, 0}, 0.7f, res.width, res.height);
    const auto verts = dress_garment(garment, pose);
    const GBuffer g = rasterize(verts, garment.mesh, cam, res);
    const float sigma = MotionFeatureConfig{}.sigma;
    const Image m = motion_feature_map(g.world_pos, g.mask, res.height, res.width, pose, sigma);
    const auto want = oracle::motion_features(g.world_pos, g.mask, pose, sigma);
    double err = 0.0;
    for (size_t i = 0; i < want.size(); ++i) err = std::max(err, std::abs(m.pixels[i] - want[i]));
    c.add(err <= 1e-6 && g.covered_count() > 0,
          "motion map max error " + fmt(err, 3) + " over " + std::to_string(g.covered_count()) + " px");

    SkeletonPose two;
    two.joints = {Vec3(0.1f, 1.0f, -0.2f), Vec3(2, 2, 2)};
    const std::vector<Vec3> pos{two.joints[0], two.joints[0] + Vec3(0, 0, std::sqrt(sigma))};
    const std::vector<std::uint8_t> mask{1, 1};
    const Image mm = motion_feature_map(pos, mask, 1, 2, two, sigma);
    c.add(std::abs(mm.at(0, 0, 0) - 1.0) <= 1e-6, "zero distance " + fmt(mm.at(0, 0, 0), 8));
    c.add(std::abs(mm.at(0, 1, 0) - std::exp(-1.0)) <= 1e-6, "distance^2 = sigma " + fmt(mm.at(0, 1, 0), 8));

    // SPADE with non-trivial weights against the scalar reference
    torch::manual_seed(11);
    SpadeBlock block(5, 3);
    {
        torch::NoGradGuard ng;
        for (auto& p : block->parameters()) p.normal_(0.0, 0.4);
    }
    const auto w = torch::randn({1, 5, 8, 6}) * 2 + 1;
    const auto cond = torch::randn({1, 3, 4, 3});
    const auto got = flat(block->forward(w, cond));
    const auto ref = oracle::spade(flat(w), 5, 8, 6, flat(cond), 3, 4, 3, block->gamma->weight, block->gamma->bias,
                                   block->beta->weight, block->beta->bias, kNormEpsilon);
    double serr = 0.0;
    for (size_t i = 0; i < got.size(); ++i) serr = std::max(serr, std::abs(got[i] - ref[i]));
    c.add(serr <= 1e-5, "SPADE max error " + fmt(serr, 3));

    {
        torch::NoGradGuard ng;
        block->gamma->weight.zero_();
        block->gamma->bias.fill_(1.0);
        block->beta->weight.zero_();
        block->beta->bias.zero_();
    }
    const auto out = block->forward(torch::randn({2, 5, 16, 16}) * 3 - 4, torch::randn({2, 3, 16, 16}));
    const double mean = out.mean({2, 3}).abs().max().item<double>();
    const double sd = ((out - out.mean({2, 3}, true)).pow(2).mean({2, 3}).sqrt() - 1).abs().max().item<double>();
    c.add(mean <= 1e-5, "identity mean " + fmt(mean, 3));
    c.add(sd <= 1e-3, "identity |std-1| " + fmt(sd, 3));
    return c.done();
}

Outcome loss_analytics(Context&) {
    Checks c;
    DiscriminatorConfig cfg;  // full width
    Discriminator d(cfg);
    {
        torch::NoGradGuard ng;
        const std::string last = std::to_string(cfg.layers.size() - 1) + ".";
        for (auto& p : d->named_parameters()) {
            if (p.key().find(last) != std::string::npos) p.value().zero_();
        }
    }
    torch::manual_seed(3);
    const auto i_prev = torch::rand({2, 3, 128, 128}), i_t = torch::rand({2, 3, 128, 128}),
               i_next = torch::rand({2, 3, 128, 128}), r = torch::rand({2, 3, 128, 128});
    const double dl = d_loss(d, r, i_prev, i_t, i_next).item<double>();
    const double gl = g_gan_loss(d, r, i_prev, i_next).item<double>();
    c.add(std::abs(dl - 4 * std::log(2.0)) <= 1e-6, "d_loss " + fmt(dl, 10));
    c.add(std::abs(gl - 2 * std::log(2.0)) <= 1e-6, "g_gan_loss " + fmt(gl, 10));
    const double total = g_total_loss(LossWeights{}, 1.0, 1.0, 1.0);
    c.add(total == 15.5, "g_total_loss(1,1,1) " + fmt(total, 10));
    auto ex = make_random_extractor(7);
    const double pr = perceptual_loss(*ex, r, r).item<double>();
    c.add(pr == 0.0, "L_percept(R,R) " + fmt(pr));
    Discriminator d2(cfg);
    const double lf = feature_matching_loss(d2, i_t, i_prev, i_t, i_next).item<double>();
    c.add(lf == 0.0, "L_feat(I_t as fake) " + fmt(lf));
    return c.done();
}

Outcome simulator(Context& ctx) {
    const auto& dc = ctx.desk.data;
    const auto clip = animate_skeleton(parse_motion_style(dc.motion_style), 200, dc.fps, ctx.desk.seed);
    const auto body = BodyProxy::standard(dc.body_girth);
    const auto garment = build_garment_grid(parse_garment_kind(dc.garment), dc.target_spacing);
    SimParams p = dc.sim;
    p.seed = ctx.desk.seed;
    const auto t0 = Clock::now();
    const auto a = simulate(garment, clip, body, p);
    const double secs = seconds_since(t0);
    const auto b = simulate(garment, clip, body, p);
    bool same = a.frame_count() == b.frame_count();
    for (int t = 0; same && t < a.frame_count(); ++t) {
        same = std::memcmp(a.frame(t).data(), b.frame(t).data(), a.frame(t).size() * sizeof(Vec3)) == 0;
    }
    const auto stats = measure_sim(a, clip, body);
    int penetrations = 0;
    for (int t = 0; t < a.frame_count(); ++t) {
        const auto& pose = clip.pose(t);
        for (const auto& v : a.frame(t)) {
            for (const auto& cap : body.capsules) {
                if (capsule_signed_distance(v, pose.joints[static_cast<size_t>(cap.joint_a)],
                                            pose.joints[static_cast<size_t>(cap.joint_b)],
                                            cap.radius) < -p.collision_margin) {
                    ++penetrations;
                }
            }
        }
    }
    Checks c;
    c.add(a.frame_count() == 200, std::to_string(a.frame_count()) + " frames of " + std::to_string(a.vertex_count()) +
                                      " vertices");
    c.add(stats.max_strain <= 0.02, "max strain " + fmt(stats.max_strain));
    c.add(penetrations == 0, "penetrations " + std::to_string(penetrations));
    c.add(same, same ? "bitwise identical rerun" : "reruns differ");
    c.add(secs <= 120.0, fmt(secs, 3) + " s per run");
    return c.done();
}

Outcome joint2coarse(Context& ctx) {
    const auto& d = ctx.desk_dataset();
    const auto t0 = Clock::now();
    auto& model = ctx.desk_coarse_model();
    const double secs = seconds_since(t0);
    const double diag = bbox_diagonal(d.coarse.topology().vertices);
    double codec_rmse = 0.0, pred_rmse = 0.0;
    const auto predicted = predict_coarse_sequence(model, d.clip);
    for (int t = 0; t < d.clip.frame_count(); ++t) {
        const auto& truth = d.coarse.frame(t);
        const auto root = d.clip.pose(t).root();
        const auto latent = encode_shape(model.codec, model.normalizer.normalize(truth, root));
        const auto recon = model.normalizer.denormalize(decode_shape(model.codec, latent), root);
        codec_rmse = std::max(codec_rmse, vertex_rmse(recon, truth));
        pred_rmse = std::max(pred_rmse, vertex_rmse(predicted.frame(t), truth));
    }
    Checks c;
    c.add(d.clip.frame_count() == 50, std::to_string(d.clip.frame_count()) + " frames");
    c.add(codec_rmse <= 0.02 * diag, "codec worst-frame RMSE " + fmt(100 * codec_rmse / diag, 3) + "% of diagonal");
    c.add(pred_rmse <= 0.05 * diag, "predict_coarse worst-frame RMSE " + fmt(100 * pred_rmse / diag, 3) + "%");
    c.add(secs <= 600.0, fmt(secs, 3) + " s");
    return c.done();
}

Outcome renderer_overfit(Context& ctx) {
    const auto& d = ctx.desk_dataset();
    const auto& cfg = ctx.desk;
    const auto coarse = predict_coarse_sequence(ctx.desk_coarse_model(), d.clip);
    const auto t0 = Clock::now();
    TrainingSet train(d, coarse, {0, 1}, cfg.layout(), 0, 19);
    auto renderer = Renderer::create(cfg.layout(), cfg.resolution, cfg.generator_config(), cfg.discriminator, cfg.seed);
    auto ex = make_extractor(cfg);
    TrainConfig tc = cfg.train;
    tc.steps = 2000;
    tc.eval_every = 50;
    tc.target_mse = 0.02;
    tc.log_csv = ctx.work / "overfit_log.csv";
    const auto rep = train_renderer(renderer, train, *ex, tc);
    const double train_mse = evaluate_samples(renderer, train, train.samples()).mu_mse;
    TrainingSet unseen(d, coarse, {2}, cfg.layout(), 0, 19);
    const double unseen_mse = evaluate_samples(renderer, unseen, unseen.samples()).mu_mse;
    const double secs = seconds_since(t0);
    save_renderer(ctx.work / "overfit.ckpt", renderer);
    Checks c;
    c.add(train.samples().size() == 36 && rep.steps_run <= 2000,
          std::to_string(train.samples().size()) + " samples, " + std::to_string(rep.steps_run) + " steps");
    c.add(train_mse <= 0.02, "training mu_mse " + fmt(train_mse));
    c.add(unseen_mse <= 2 * train_mse, "unseen view mu_mse " + fmt(unseen_mse) + " (" +
                                           fmt(unseen_mse / train_mse, 3) + "x)");
    c.add(secs <= 45 * 60.0, fmt(secs / 60, 3) + " min");
    return c.done();
}

// Trains a 64x64 renderer on the small dataset for `steps` with the given views.
Renderer train_small(Context& ctx, const Dataset& data, const std::vector<int>& views, bool motion, int steps,
                     std::uint64_t seed) {
    PipelineConfig cfg = ctx.small;
    cfg.motion.enabled = motion;
    TrainingSet set(data, data.coarse, views, cfg.layout());
    auto renderer = Renderer::create(cfg.layout(), cfg.resolution, cfg.generator_config(), cfg.discriminator, seed);
    auto ex = make_extractor(cfg);
    TrainConfig tc = cfg.train;
    tc.steps = steps;
    tc.seed = seed;
    train_renderer(renderer, set, *ex, tc);
    return renderer;
}

double small_mse(Renderer& r, const Dataset& data, const std::vector<int>& views) {
    TrainingSet set(data, data.coarse, views, r.layout);
    return evaluate_samples(r, set, set.samples()).mu_mse;
}

Renderer& small_base(Context& ctx) {
    if (!ctx.small_base) ctx.small_base = train_small(ctx, ctx.small_dataset(), {0, 1}, true, ctx.small_steps, 1);
    return *ctx.small_base;
}

// Both comparisons use the mean over three seed pairs; single GAN runs swing by more than
// the effect being measured.
Outcome ablations(Context& ctx) {
    const auto& d = ctx.small_dataset();
    const auto t0 = Clock::now();
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    double motion = 0, plain = 0, held_two = 0, held_four = 0;
    std::ostringstream pairs;
    for (const auto seed : seeds) {
        std::optional<Renderer> local;
        Renderer* two = nullptr;
        if (seed == 1) {
            two = &small_base(ctx);
        } else {
            local = train_small(ctx, d, {0, 1}, true, ctx.small_steps, seed);
            two = &*local;
        }
        auto without = train_small(ctx, d, {0, 1}, false, ctx.small_steps, seed);
        auto four = train_small(ctx, d, {0, 1, 2, 3}, true, ctx.small_steps, seed);
        const double m = small_mse(*two, d, {0, 1}), p = small_mse(without, d, {0, 1});
        const double h2 = small_mse(*two, d, {4, 5}), h4 = small_mse(four, d, {4, 5});
        pairs << (seed == 1 ? "" : ", ") << fmt(m, 3) << "/" << fmt(p, 3) << " " << fmt(h2, 3) << "/" << fmt(h4, 3);
        motion += m / seeds.size();
        plain += p / seeds.size();
        held_two += h2 / seeds.size();
        held_four += h4 / seeds.size();
    }
    Checks c;
    c.add(motion <= plain, "mean training mu_mse with motion " + fmt(motion) + " vs without " + fmt(plain));
    c.add(held_two >= held_four, "mean held-out mu_mse 2-view " + fmt(held_two) + " vs 4-view " + fmt(held_four));
    c.add(true, "per seed motion/plain 2v/4v: " + pairs.str());
    c.add(true, std::to_string(ctx.small_steps) + " steps per run, " + fmt(seconds_since(t0) / 60, 3) + " min");
    return c.done();
}

Outcome finetunes(Context& ctx) {
    const auto t0 = Clock::now();
    Checks c;
    auto& base = small_base(ctx);

    // new background colour, same motion and cameras
    PipelineConfig bg_cfg = ctx.small;
    bg_cfg.data.palette.background = Vec3(0.30f, 0.55f, 0.32f);
    const auto bg_data = generate_dataset(bg_cfg);
    {
        Renderer r = base.clone();
        TrainingSet examples(bg_data, bg_data.coarse, {0, 1}, r.layout);
        examples.set_samples(pick_examples(examples.samples(), bg_cfg.background_examples));
        std::map<std::string, torch::Tensor> before;
        for (const auto& [k, v] : named_parameters(r)) before[k] = v.detach().clone();
        const double mse0 = evaluate_samples(r, examples, examples.samples()).mu_mse;
        auto ex = make_extractor(bg_cfg);
        TrainConfig tc = bg_cfg.train;
        tc.steps = bg_cfg.background_iterations;
        finetune_background(r, examples, *ex, tc);
        const double mse1 = evaluate_samples(r, examples, examples.samples()).mu_mse;
        int frozen_changed = 0, open_changed = 0;
        for (const auto& [k, v] : named_parameters(r)) {
            const bool open = k.rfind("generator.refine.", 0) == 0 || k.rfind("discriminator.", 0) == 0;
            const bool same = torch::equal(v, before.at(k));
            if (!open && !same) ++frozen_changed;
            if (open && !same) ++open_changed;
        }
        c.add(frozen_changed == 0 && open_changed > 0,
              "background: " + std::to_string(frozen_changed) + " frozen tensors changed, " +
                  std::to_string(open_changed) + " refinement/D tensors changed");
        c.add(mse1 <= 0.5 * mse0, "example mu_mse " + fmt(mse0) + " -> " + fmt(mse1) + " in " +
                                      std::to_string(tc.steps) + " iterations");
    }

    // new body girth: from scratch vs fine-tuned from the base
    PipelineConfig body_cfg = ctx.small;
    body_cfg.data.body_girth = 1.3f;
    const auto body_data = generate_dataset(body_cfg);
    {
        const int n = ctx.small_steps;
        auto scratch = train_small(ctx, body_data, {0, 1}, true, n, 1);
        const double target = small_mse(scratch, body_data, {0, 1});
        Renderer r = base.clone();
        TrainingSet set(body_data, body_data.coarse, {0, 1}, r.layout);
        auto ex = make_extractor(body_cfg);
        TrainConfig tc = body_cfg.train;
        tc.steps = static_cast<int>(std::lround(body_cfg.body_finetune_fraction * n));
        tc.eval_every = 10;
        tc.target_mse = target;
        const auto rep = finetune_body_shape(r, set, *ex, tc);
        const double reached = small_mse(r, body_data, {0, 1});
        c.add(reached <= target && rep.steps_run <= 0.3 * n,
              "body: scratch " + std::to_string(n) + " steps -> " + fmt(target) + ", fine-tune " +
                  std::to_string(rep.steps_run) + " steps -> " + fmt(reached));
    }
    c.add(true, fmt(seconds_since(t0) / 60, 3) + " min");
    return c.done();
}

int run_cli(const Context& ctx, const std::string& args) {
    const std::string cmd = "\"" + ctx.cli.string() + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome descriptor_arithmetic(Context& ctx) {
    Checks c;
    const auto cfg = config_from_json(json::object());
    c.add(cfg.layout().channels() == 178, "channels " + std::to_string(cfg.layout().channels()));
    const auto clip = animate_skeleton(MotionStyle::kSway, 40, 30.0, std::uint64_t{0});
    const auto desc = make_descriptor(clip, 39, cfg.window);
    c.add(desc.flat_size() == 969, "motion descriptor length " + std::to_string(desc.flat_size()));
    Discriminator d(cfg.discriminator);
    c.add(d->receptive_field() == 70, "receptive field " + std::to_string(d->receptive_field()));

    // checkpoints written under the default layout, then read back under other layouts
    const fs::path dir = ctx.work / "schema";
    fs::create_directories(dir);
    const Resolution res{64, 64};
    auto renderer = Renderer::create(cfg.layout(), res, cfg.generator_config(), cfg.discriminator, 0);
    save_renderer(dir / "renderer.ckpt", renderer);
    CoarseModel cm;
    const auto garment = build_garment_grid(GarmentKind::kLongSkirt, cfg.data.coarse_spacing);
    cm.topology = garment.mesh;
    cm.normalizer = CoarseNormalizer::from_rest(garment.mesh);
    cm.window = cfg.window;
    cm.codec = ShapeCodec(garment.mesh.vertex_count(), CodecConfig{{64}, 16, 0.0});
    cm.motion = MotionEncoder(static_cast<int>(desc.flat_size()), MotionEncoderConfig{{64}, 16, 0.0});
    save_coarse_model(dir / "coarse.ckpt", cm);
    write_json(dir / "clip.json", clip_to_json(clip));
    write_json(dir / "camera.json", camera_to_json(Camera::look_at({0, 1, 2.4f}, {0, 0.7f, 0}, 0.6f, 64, 64)));

    auto code_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return static_cast<int>(e.code());
        }
        return 0;
    };
    auto no_motion = cfg.layout();
    no_motion.motion.enabled = false;
    auto other_sigma = cfg.layout();
    other_sigma.motion.sigma = 0.5f;
    c.add(code_of([&] { load_renderer(dir / "renderer.ckpt", no_motion); }) == 4 &&
              code_of([&] { load_renderer(dir / "renderer.ckpt", other_sigma); }) == 4 &&
              code_of([&] { load_coarse_model(dir / "coarse.ckpt", DescriptorWindow{3, 17}, kDefaultJointCount); }) == 4,
          "in-process loaders reject mismatches with code 4");

    const std::string common = "--resolution 64x64 --renderer \"" + (dir / "renderer.ckpt").string() + "\" --coarse \"" +
                               (dir / "coarse.ckpt").string() + "\" --motion \"" + (dir / "clip.json").string() +
                               "\" --camera \"" + (dir / "camera.json").string() + "\" --out \"" +
                               (dir / "out").string() + "\"";
    write_json(dir / "no_motion.json", json{{"descriptor", {{"motion_features", false}}}});
    write_json(dir / "window.json", json{{"descriptor", {{"count", 9}}}});
    const int a = run_cli(ctx, "render --config \"" + (dir / "no_motion.json").string() + "\" " + common);
    const int b = run_cli(ctx, "render --config \"" + (dir / "window.json").string() + "\" " + common);
    const int ok = run_cli(ctx, "render " + common);
    c.add(a == 4 && b == 4 && ok == 0, "CLI exit codes: texture/motion layout " + std::to_string(a) +
                                           ", descriptor window " + std::to_string(b) + ", matching " +
                                           std::to_string(ok));
    return c.done();
}

// Random scene: the arm is a disc, the garment a rectangle, both with tilted depth planes.
struct Scene {
    Image render, body, arm, garment;
    std::vector<float> arm_depth, garment_depth;
};

Scene random_scene(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> size(24, 64);
    const int h = size(rng), w = size(rng);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Scene s{Image(h, w, 3, ImageKind::kRgb), Image(h, w, 3, ImageKind::kRgb), Image(h, w, 1, ImageKind::kMask),
            Image(h, w, 1, ImageKind::kMask), std::vector<float>(static_cast<size_t>(h) * w, 0.0f),
            std::vector<float>(static_cast<size_t>(h) * w, 0.0f)};
    for (auto& p : s.render.pixels) p = u(rng);
    for (auto& p : s.body.pixels) p = u(rng);
    const float cx = u(rng) * w, cy = u(rng) * h, rad = (0.15f + 0.3f * u(rng)) * std::min(h, w);
    const int x0 = static_cast<int>(u(rng) * w / 2), y0 = static_cast<int>(u(rng) * h / 2);
    const int x1 = x0 + static_cast<int>((0.3f + 0.5f * u(rng)) * w), y1 = y0 + static_cast<int>((0.3f + 0.5f * u(rng)) * h);
    const float a0 = 1.8f + 0.4f * u(rng), ax = 0.02f * (u(rng) - 0.5f), ay = 0.02f * (u(rng) - 0.5f);
    const float g0 = 1.8f + 0.4f * u(rng), gx = 0.02f * (u(rng) - 0.5f), gy = 0.02f * (u(rng) - 0.5f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= rad * rad) {
                s.arm.pixels[i] = 1.0f;
                s.arm_depth[i] = a0 + ax * x + ay * y;
            }
            if (x >= x0 && x < x1 && y >= y0 && y < y1) {
                s.garment.pixels[i] = 1.0f;
                s.garment_depth[i] = g0 + gx * x + gy * y;
            }
        }
    }
    return s;
}

Outcome relayer_invariants(Context&) {
    std::mt19937_64 rng(31);
    int oracle_mismatch = 0, not_idempotent = 0, nonlocal = 0, total_changed = 0;
    for (int k = 0; k < 20; ++k) {
        Scene s = random_scene(rng);
        const LayerInputs in{s.render, s.body, s.arm, s.garment, s.arm_depth, s.garment_depth};
        const auto px = relayer_pixels(in);
        if (px != oracle::relayer_pixels(s.arm.pixels, s.garment.pixels, s.arm_depth, s.garment_depth, in.delta)) {
            ++oracle_mismatch;
        }
        total_changed += static_cast<int>(px.size());
        const Image out = relayer(in);
        const std::set<size_t> changed(px.begin(), px.end());
        for (size_t i = 0; i < s.arm_depth.size(); ++i) {
            for (int c = 0; c < 3; ++c) {
                const float want = changed.count(i) ? s.body.pixels[3 * i + c] : s.render.pixels[3 * i + c];
                if (out.pixels[3 * i + c] != want) ++nonlocal;
            }
        }
        const LayerInputs again{out, s.body, s.arm, s.garment, s.arm_depth, s.garment_depth};
        if (relayer(again).pixels != out.pixels) ++not_idempotent;

        // a perturbation at one pixel can only change that pixel
        std::uniform_int_distribution<size_t> pick(0, s.arm_depth.size() - 1);
        const size_t p = pick(rng);
        s.arm_depth[p] = s.arm_depth[p] > 0 ? 0.0f : 0.5f;
        s.arm.pixels[p] = s.arm_depth[p] > 0 ? 1.0f : 0.0f;
        s.garment.pixels[p] = 1.0f;
        s.garment_depth[p] = 3.0f;
        const Image out2 = relayer({s.render, s.body, s.arm, s.garment, s.arm_depth, s.garment_depth});
        for (size_t i = 0; i < s.arm_depth.size(); ++i) {
            if (i == p) continue;
            for (int c = 0; c < 3; ++c) {
                if (out2.pixels[3 * i + c] != out.pixels[3 * i + c]) ++nonlocal;
            }
        }
    }
    Checks c;
    c.add(oracle_mismatch == 0, "oracle mismatches " + std::to_string(oracle_mismatch) + " (" +
                                    std::to_string(total_changed) + " corrected px over 20 scenes)");
    c.add(not_idempotent == 0, "non-idempotent scenes " + std::to_string(not_idempotent));
    c.add(nonlocal == 0, "non-local changes " + std::to_string(nonlocal));
    return c.done();
}

struct Criterion {
    int id;
    std::string name;
    std::function<Outcome(Context&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    configure_runtime();
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    std::string work = (fs::temp_directory_path() / "dng_acceptance").string();
    std::string cli = DNG_CLI_PATH;
    int small_steps = 600;
    app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
    app.add_option("--work", work, "scratch directory");
    app.add_option("--cli", cli, "path of the dng executable");
    app.add_option("--small-steps", small_steps, "training steps of the 64x64 ablation and fine-tune runs");
    CLI11_PARSE(app, argc, argv);

    Context ctx;
    ctx.work = work;
    ctx.cli = cli;
    ctx.small_steps = small_steps;
    fs::create_directories(ctx.work);

    const std::vector<Criterion> criteria{
        {1, "rasterizer oracle", rasterizer_oracle},
        {2, "texture gradient", texture_gradient},
        {3, "formula checks", formulas},
        {4, "loss analytics", loss_analytics},
        {5, "simulator invariants", simulator},
        {6, "joint2coarse fit", joint2coarse},
        {7, "renderer overfit", renderer_overfit},
        {8, "ablation direction", ablations},
        {9, "fine-tune contracts", finetunes},
        {10, "descriptor arithmetic", descriptor_arithmetic},
        {11, "relayer invariants", relayer_invariants},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << c.id << "  " << c.name << ": "
                  << o.detail << " (" << fmt(seconds_since(t0), 3) << " s)" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
