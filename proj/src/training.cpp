#include "dng/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dng/checkpoint.hpp"
#include "dng/log.hpp"

namespace dng {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

json DescriptorLayout::to_json() const {
    return {{"texture_resolution", texture.base_resolution},
            {"texture_levels", texture.levels},
            {"texture_channels", texture.channels},
            {"motion_features", motion.enabled},
            {"motion_maps", motion.enabled ? motion.maps : 0},
            {"motion_stride", motion.enabled ? motion.stride : 0},
            {"sigma", motion.enabled ? motion.sigma : 0.0f},
            {"joint_count", joint_count}};
}

DescriptorLayout DescriptorLayout::from_json(const json& j) {
    DescriptorLayout l;
    try {
        l.texture.base_resolution = j.at("texture_resolution").get<int>();
        l.texture.levels = j.at("texture_levels").get<int>();
        l.texture.channels = j.at("texture_channels").get<int>();
        l.motion.enabled = j.at("motion_features").get<bool>();
        if (l.motion.enabled) {
            l.motion.maps = j.at("motion_maps").get<int>();
            l.motion.stride = j.at("motion_stride").get<int>();
            l.motion.sigma = j.at("sigma").get<float>();
        }
        l.joint_count = j.at("joint_count").get<int>();
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("descriptor layout: ") + e.what());
    }
    return l;
}

Renderer Renderer::create(const DescriptorLayout& layout, Resolution resolution, GeneratorConfig generator_config,
                          const DiscriminatorConfig& discriminator_config, std::uint64_t seed) {
    if (generator_config.in_channels != layout.channels()) {
        throw ConfigError("generator expects " + std::to_string(generator_config.in_channels) +
                          " input channels but the descriptor has " + std::to_string(layout.channels()));
    }
    Renderer r;
    r.layout = layout;
    r.resolution = resolution;
    r.generator_config = std::move(generator_config);
    r.discriminator_config = discriminator_config;
    torch::manual_seed(seed);
    r.generator = Generator(r.generator_config);
    r.discriminator = Discriminator(r.discriminator_config);
    r.texture = NeuralTexture(layout.texture, seed + 1);
    return r;
}

std::vector<torch::Tensor> Renderer::generator_parameters() const {
    auto params = generator->parameters();
    for (const auto& l : texture.levels()) params.push_back(l);
    return params;
}

std::map<std::string, torch::Tensor> named_parameters(const Renderer& r) {
    std::map<std::string, torch::Tensor> out;
    for (const auto& p : r.generator->named_parameters()) out["generator." + p.key()] = p.value();
    for (std::size_t l = 0; l < r.texture.levels().size(); ++l) out["texture.level" + std::to_string(l)] = r.texture.levels()[l];
    for (const auto& p : r.discriminator->named_parameters()) out["discriminator." + p.key()] = p.value();
    return out;
}

Renderer Renderer::clone() const {
    Renderer c = create(layout, resolution, generator_config, discriminator_config, 0);
    c.data_schema = data_schema;
    torch::NoGradGuard guard;
    auto src = named_parameters(*this);
    for (auto& [name, dst] : named_parameters(c)) dst.copy_(src.at(name));
    return c;
}

void save_renderer(const std::filesystem::path& path, const Renderer& r) {
    Checkpoint ckpt;
    ckpt.kind = "renderer";
    ckpt.config = {{"resolution", {r.resolution.width, r.resolution.height}},
                   {"generator", r.generator_config.to_json()},
                   {"discriminator", r.discriminator_config.to_json()},
                   {"data_schema", r.data_schema}};
    ckpt.descriptor = r.layout.to_json();
    for (const auto& [name, t] : named_parameters(r)) ckpt.add(name, t);
    save_checkpoint(path, ckpt);
}

Renderer load_renderer(const std::filesystem::path& path, const std::optional<DescriptorLayout>& expected) {
    const auto ckpt = load_checkpoint(path);
    if (ckpt.kind != "renderer") throw SchemaMismatch(path.string() + " holds a '" + ckpt.kind + "' checkpoint");
    if (expected) require_same_descriptor(ckpt.descriptor, expected->to_json());
    const auto layout = DescriptorLayout::from_json(ckpt.descriptor);
    Resolution res;
    GeneratorConfig gc;
    DiscriminatorConfig dc;
    std::string schema;
    try {
        const auto r = ckpt.config.at("resolution").get<std::vector<int>>();
        res = {r.at(0), r.at(1)};
        gc = GeneratorConfig::from_json(ckpt.config.at("generator"));
        dc = DiscriminatorConfig::from_json(ckpt.config.at("discriminator"));
        schema = ckpt.config.value("data_schema", std::string());
    } catch (const std::exception& e) {
        throw SchemaMismatch(std::string("renderer checkpoint config: ") + e.what());
    }
    Renderer out = Renderer::create(layout, res, gc, dc, 0);
    out.data_schema = schema;
    torch::NoGradGuard guard;
    for (auto& [name, dst] : named_parameters(out)) {
        const auto& src = ckpt.get(name);
        if (src.sizes() != dst.sizes()) throw SchemaMismatch("renderer checkpoint: shape mismatch for " + name);
        dst.copy_(src);
    }
    return out;
}

torch::Tensor image_tensor(const Image& image) { return to_chw(image); }

TrainingSet::TrainingSet(const Dataset& dataset, MeshSequence coarse, std::vector<int> views,
                         const DescriptorLayout& layout, int first_frame, int last_frame)
    : dataset_(&dataset), coarse_(std::move(coarse)), views_(std::move(views)), layout_(layout) {
    if (coarse_.frame_count() != dataset.clip.frame_count()) {
        throw SchemaMismatch("coarse sequence has " + std::to_string(coarse_.frame_count()) + " frames, clip has " +
                             std::to_string(dataset.clip.frame_count()));
    }
    if (layout.joint_count != dataset.clip.joint_count()) {
        throw SchemaMismatch("descriptor layout expects " + std::to_string(layout.joint_count) + " joints, dataset has " +
                             std::to_string(dataset.clip.joint_count()));
    }
    if (views_.empty()) throw ConfigError("training set needs at least one view");
    if (last_frame < 0) last_frame = dataset.meta.frame_count - 1;
    for (int p : views_) {
        const auto& v = dataset.view(p);
        if (v.gt.empty()) throw ConfigError("dataset was loaded without images");
        for (int t : dataset.meta.triplet_frames) {
            if (t - 1 >= first_frame && t + 1 <= last_frame) samples_.push_back({p, t});
        }
    }
    if (samples_.empty()) throw ConfigError("no training triplets inside the requested frame range");
}

const FrameInputs& TrainingSet::inputs(int view, int t) {
    const auto key = std::make_pair(view, t);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        it = cache_.emplace(key, make_frame_inputs(coarse_, dataset_->clip, t, dataset_->view(view).camera,
                                                   dataset_->meta.resolution, layout_.texture, layout_.motion))
                 .first;
    }
    return it->second;
}

torch::Tensor TrainingSet::gt(int view, int t) const {
    return image_tensor(dataset_->view(view).gt.at(static_cast<std::size_t>(t)));
}

torch::Tensor TrainingSet::bg(int view, int t) const {
    return image_tensor(dataset_->view(view).bg.at(static_cast<std::size_t>(t)));
}

void TrainConfig::validate() const {
    if (steps < 0 || batch_size < 1) throw ConfigError("training needs steps >= 0 and batch_size >= 1");
    if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0,1)");
    weights.validate();
}

namespace {

struct Batch {
    torch::Tensor q_t, q_prev, bg, i_prev, i_t, i_next;
};

Batch assemble(Renderer& r, TrainingSet& data, const std::vector<Sample>& samples) {
    std::vector<torch::Tensor> qt, qp, bg, ip, it, in;
    for (const auto& s : samples) {
        qt.push_back(descriptor_tensor(r.texture, data.inputs(s.view, s.t)));
        qp.push_back(descriptor_tensor(r.texture, data.inputs(s.view, s.t - 1)));
        bg.push_back(data.bg(s.view, s.t));
        ip.push_back(data.gt(s.view, s.t - 1));
        it.push_back(data.gt(s.view, s.t));
        in.push_back(data.gt(s.view, s.t + 1));
    }
    return {torch::stack(qt), torch::stack(qp), torch::stack(bg), torch::stack(ip), torch::stack(it), torch::stack(in)};
}

std::string describe(const std::vector<Sample>& samples) {
    std::ostringstream os;
    for (std::size_t i = 0; i < samples.size(); ++i) os << (i ? " " : "") << "(view " << samples[i].view << ", t " << samples[i].t << ")";
    return os.str();
}

void set_requires_grad(const std::vector<torch::Tensor>& params, bool on) {
    for (auto p : params) p.set_requires_grad(on);
}

}  // namespace

TrainReport train_renderer(Renderer& r, TrainingSet& data, PerceptualExtractor& extractor, const TrainConfig& config) {
    config.validate();
    if (data.resolution() != r.resolution) throw SchemaMismatch("dataset resolution differs from the renderer's");
    const auto start = Clock::now();
    torch::manual_seed(config.seed);
    std::mt19937_64 rng(config.seed);

    std::vector<torch::Tensor> g_params;
    if (config.scope == TrainScope::kAll) {
        g_params = r.generator_parameters();
    } else {
        g_params = r.generator->refinement()->parameters();
    }
    // freeze everything the scope excludes, so gradients never reach it
    set_requires_grad(r.generator_parameters(), false);
    set_requires_grad(g_params, true);
    const auto d_params = r.discriminator->parameters();

    torch::optim::Adam g_opt(g_params, torch::optim::AdamOptions(config.lr_generator).betas({config.beta1, config.beta2}));
    torch::optim::Adam d_opt(d_params, torch::optim::AdamOptions(config.lr_discriminator).betas({config.beta1, config.beta2}));

    const auto extractor_hash = parameter_hash(extractor.parameters());
    std::ofstream csv;
    if (!config.log_csv.empty()) {
        if (config.log_csv.has_parent_path()) std::filesystem::create_directories(config.log_csv.parent_path());
        csv.open(config.log_csv);
        if (!csv) throw ConfigError("cannot write " + config.log_csv.string());
        csv << "step,L_feat,L_percept,L_GAN,L_D\n";
    }

    const bool use_d_in_g = config.weights.feat > 0.0 || config.weights.gan > 0.0;
    std::vector<Sample> order;
    std::size_t cursor = 0;
    TrainReport report;
    for (int step = 0; step < config.steps; ++step) {
        std::vector<Sample> batch;
        for (int b = 0; b < config.batch_size; ++b) {
            if (cursor == order.size()) {
                order = data.samples();
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        auto x = assemble(r, data, batch);
        auto out = r.generator->forward(x.q_t, x.q_prev, x.bg);
        const auto& rgb = out.rgb;

        d_opt.zero_grad();
        auto ld = d_loss(r.discriminator, rgb, x.i_prev, x.i_t, x.i_next);
        const double ld_v = ld.item<double>();
        if (std::isfinite(ld_v)) {
            ld.backward();
            d_opt.step();
        }

        set_requires_grad(d_params, false);
        GeneratorAdversarialLosses adv{torch::zeros({}), torch::zeros({})};
        if (use_d_in_g) adv = generator_adversarial_losses(r.discriminator, rgb, x.i_prev, x.i_t, x.i_next);
        auto& lfeat = adv.feat;
        auto& lgan = adv.gan;
        auto lper = perceptual_loss(extractor, rgb, x.i_t);
        auto total = g_total_loss(config.weights, lfeat, lper, lgan);

        StepLoss s{step, lfeat.item<double>(), lper.item<double>(), lgan.item<double>(), ld_v, total.item<double>()};
        if (!std::isfinite(s.total) || !std::isfinite(s.d)) {
            set_requires_grad(d_params, true);
            std::ostringstream msg;
            msg << "non-finite loss at step " << step << " on " << describe(batch) << ": L_feat=" << s.feat
                << " L_percept=" << s.percept << " L_GAN=" << s.gan << " L_D=" << s.d;
            if (!config.diagnostics.empty()) {
                json diag{{"step", step}, {"samples", json::array()}, {"L_feat", s.feat}, {"L_percept", s.percept},
                          {"L_GAN", s.gan}, {"L_D", s.d}};
                for (const auto& b : batch) diag["samples"].push_back({{"view", b.view}, {"t", b.t}});
                // non-finite doubles are not representable in JSON
                for (const char* k : {"L_feat", "L_percept", "L_GAN", "L_D"}) {
                    if (!std::isfinite(diag[k].get<double>())) diag[k] = std::to_string(diag[k].get<double>());
                }
                write_json(config.diagnostics, diag);
            }
            throw NumericalError(msg.str());
        }
        g_opt.zero_grad();
        total.backward();
        g_opt.step();
        set_requires_grad(d_params, true);

        report.losses.push_back(s);
        if (csv) csv << step << ',' << s.feat << ',' << s.percept << ',' << s.gan << ',' << s.d << '\n';
        report.steps_run = step + 1;

        if (config.eval_every > 0 && (step + 1) % config.eval_every == 0) {
            const double mse = evaluate_samples(r, data, data.samples()).mu_mse;
            report.eval_curve.emplace_back(step + 1, mse);
            log::info("step ", step + 1, ": mu_mse ", mse);
            if (config.target_mse > 0.0 && mse <= config.target_mse) break;
        }
    }
    set_requires_grad(r.generator_parameters(), true);
    if (parameter_hash(extractor.parameters()) != extractor_hash) {
        throw NumericalError("perceptual extractor parameters changed during training");
    }
    report.seconds = seconds_since(start);
    return report;
}

TrainReport finetune_body_shape(Renderer& renderer, TrainingSet& data, PerceptualExtractor& extractor,
                                const TrainConfig& config) {
    TrainConfig c = config;
    c.scope = TrainScope::kAll;
    return train_renderer(renderer, data, extractor, c);
}

TrainReport finetune_background(Renderer& renderer, TrainingSet& examples, PerceptualExtractor& extractor,
                                TrainConfig config) {
    if (examples.samples().size() < 2) throw ConfigError("background fine-tuning needs at least two example images");
    config.scope = TrainScope::kRefinement;
    return train_renderer(renderer, examples, extractor, config);
}

std::vector<Image> render_samples(Renderer& r, TrainingSet& data, const std::vector<Sample>& samples) {
    torch::NoGradGuard guard;
    std::vector<Image> out;
    for (const auto& s : samples) {
        const auto& cur = data.inputs(s.view, s.t);
        const FrameInputs* prev = s.t > 0 ? &data.inputs(s.view, s.t - 1) : nullptr;
        const auto res = render_frame(r.generator, r.texture, cur, prev, data.bg(s.view, s.t));
        out.push_back(from_chw(res.rgb, ImageKind::kRgb));
    }
    return out;
}

Metrics evaluate_samples(Renderer& r, TrainingSet& data, const std::vector<Sample>& samples) {
    const auto pred = render_samples(r, data, samples);
    std::vector<Image> gt;
    for (const auto& s : samples) gt.push_back(data.dataset().view(s.view).gt.at(static_cast<std::size_t>(s.t)));
    return evaluate(pred, gt);
}

SequenceRender render_sequence(Renderer& r, const MeshSequence& coarse, const MotionClip& clip, const Camera& camera,
                               std::span<const Image> backgrounds) {
    if (static_cast<int>(backgrounds.size()) != clip.frame_count() || coarse.frame_count() != clip.frame_count()) {
        throw SchemaMismatch("render_sequence: clip, coarse sequence and backgrounds differ in length");
    }
    torch::NoGradGuard guard;
    SequenceRender out;
    std::optional<FrameInputs> prev;
    for (int t = 0; t < clip.frame_count(); ++t) {
        const auto start = Clock::now();
        auto cur = make_frame_inputs(coarse, clip, t, camera, r.resolution, r.layout.texture, r.layout.motion);
        const auto& bg = backgrounds[static_cast<std::size_t>(t)];
        if (bg.width != r.resolution.width || bg.height != r.resolution.height || bg.channels != 3) {
            throw SchemaMismatch("background frame " + std::to_string(t) + " does not match the renderer resolution");
        }
        const auto res = render_frame(r.generator, r.texture, cur, prev ? &*prev : nullptr, image_tensor(bg));
        out.rgb.push_back(from_chw(res.rgb, ImageKind::kRgb));
        out.garment_mask.push_back(from_chw((res.blend.mask > 0.5).to(torch::kFloat32), ImageKind::kMask));
        out.proxy_depth.push_back(cur.gbuffer.depth);
        out.frame_ms.push_back(seconds_since(start) * 1000.0);
        prev = std::move(cur);
    }
    return out;
}

}  // namespace dng
