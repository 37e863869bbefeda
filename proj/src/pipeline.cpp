#include "dng/pipeline.hpp"

#include <cmath>
#include <regex>
#include <set>

#include "dng/checkpoint.hpp"
#include "dng/image_io.hpp"
#include "dng/log.hpp"
#include "dng/postprocess.hpp"

namespace dng {

namespace fs = std::filesystem;

DescriptorLayout PipelineConfig::layout() const {
    DescriptorLayout l;
    l.texture = texture;
    l.motion = motion;
    l.joint_count = kDefaultJointCount;
    return l;
}

GeneratorConfig PipelineConfig::generator_config() const {
    GeneratorConfig g = generator;
    g.in_channels = layout().channels();
    return g;
}

void PipelineConfig::validate() const {
    if (resolution.width <= 0 || resolution.height <= 0) throw ConfigError("resolution must be positive");
    const int factor = generator.downsampling();
    if (resolution.width % factor != 0 || resolution.height % factor != 0) {
        throw ConfigError("resolution must be a multiple of " + std::to_string(factor));
    }
    if (data.frames < 3) throw ConfigError("data.frames must be >= 3 (triplets need t-1 and t+1)");
    if (!(data.fps > 0.0)) throw ConfigError("data.fps must be positive");
    if (data.views < 1) throw ConfigError("data.views must be >= 1");
    if (window.stride < 1 || window.count < 1) throw ConfigError("descriptor stride and count must be >= 1");
    if (motion.maps < 1 || motion.stride < 1 || !(motion.sigma > 0.0f)) {
        throw ConfigError("motion_maps, motion_stride and sigma must be positive");
    }
    if (train_views < 0) throw ConfigError("train.views must be >= 0");
    if (!(body_finetune_fraction > 0.0 && body_finetune_fraction <= 1.0)) {
        throw ConfigError("finetune.body_fraction must lie in (0, 1]");
    }
    if (background_iterations < 0 || background_examples < 2) {
        throw ConfigError("finetune.background_examples must be >= 2 and iterations >= 0");
    }
    if (perceptual != "random" && perceptual != "scripted") throw ConfigError("perceptual.mode must be random or scripted");
    if (perceptual == "scripted" && perceptual_path.empty()) throw ConfigError("perceptual.path is required in scripted mode");
    train.validate();
    data.sim.validate();
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
    }
}

void read_vec3(const json& j, const char* key, Vec3& out, const std::string& where) {
    std::vector<float> v;
    read(j, key, v, where);
    if (!j.contains(key)) return;
    if (v.size() != 3) throw ConfigError("config key '" + where + "." + key + "' needs 3 values");
    out = Vec3(v[0], v[1], v[2]);
}

json vec3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    check_keys(j, {"seed", "resolution", "data", "descriptor", "texture", "generator", "discriminator", "coarse", "train",
                   "finetune", "perceptual", "relayer"},
               "config");
    read(j, "seed", c.seed, "config");
    if (j.contains("resolution")) {
        std::vector<int> r;
        read(j, "resolution", r, "config");
        if (r.size() != 2) throw ConfigError("resolution must be [width, height]");
        c.resolution = {r[0], r[1]};
    }
    read(j, "relayer", c.relayer, "config");

    if (j.contains("data")) {
        const auto& d = j.at("data");
        const std::string w = "data";
        check_keys(d, {"frames", "fps", "motion_style", "garment", "coarse_garment", "target_spacing", "coarse_spacing",
                       "views", "camera_target", "camera_radius", "camera_elevation", "camera_fov", "body_girth",
                       "background", "sim"},
                   w);
        read(d, "frames", c.data.frames, w);
        read(d, "fps", c.data.fps, w);
        read(d, "motion_style", c.data.motion_style, w);
        read(d, "garment", c.data.garment, w);
        read(d, "coarse_garment", c.data.coarse_garment, w);
        read(d, "target_spacing", c.data.target_spacing, w);
        read(d, "coarse_spacing", c.data.coarse_spacing, w);
        read(d, "views", c.data.views, w);
        read_vec3(d, "camera_target", c.data.camera_target, w);
        read(d, "camera_radius", c.data.camera_radius, w);
        read(d, "camera_elevation", c.data.camera_elevation, w);
        read(d, "camera_fov", c.data.camera_fov, w);
        read(d, "body_girth", c.data.body_girth, w);
        read_vec3(d, "background", c.data.palette.background, w);
        if (d.contains("sim")) {
            const auto& s = d.at("sim");
            check_keys(s, {"substeps", "iterations", "stretch_compliance", "damping", "collision_margin", "settle_frames"},
                       "data.sim");
            read(s, "substeps", c.data.sim.substeps, "data.sim");
            read(s, "iterations", c.data.sim.iterations, "data.sim");
            read(s, "stretch_compliance", c.data.sim.stretch_compliance, "data.sim");
            read(s, "damping", c.data.sim.damping, "data.sim");
            read(s, "collision_margin", c.data.sim.collision_margin, "data.sim");
            read(s, "settle_frames", c.data.sim.settle_frames, "data.sim");
        }
        // fail early on unknown names
        parse_motion_style(c.data.motion_style);
        parse_garment_kind(c.data.garment);
        parse_garment_kind(c.data.coarse_garment);
    }
    if (j.contains("descriptor")) {
        const auto& d = j.at("descriptor");
        check_keys(d, {"stride", "count", "motion_features", "motion_maps", "motion_stride", "sigma"}, "descriptor");
        read(d, "stride", c.window.stride, "descriptor");
        read(d, "count", c.window.count, "descriptor");
        read(d, "motion_features", c.motion.enabled, "descriptor");
        read(d, "motion_maps", c.motion.maps, "descriptor");
        read(d, "motion_stride", c.motion.stride, "descriptor");
        read(d, "sigma", c.motion.sigma, "descriptor");
    }
    if (j.contains("texture")) {
        const auto& t = j.at("texture");
        check_keys(t, {"resolution", "levels", "channels", "init_range"}, "texture");
        read(t, "resolution", c.texture.base_resolution, "texture");
        read(t, "levels", c.texture.levels, "texture");
        read(t, "channels", c.texture.channels, "texture");
        read(t, "init_range", c.texture.init_range, "texture");
    }
    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        check_keys(g, {"encoder_channels", "feature_channels", "leaky_slope"}, "generator");
        read(g, "encoder_channels", c.generator.encoder_channels, "generator");
        read(g, "feature_channels", c.generator.feature_channels, "generator");
        read(g, "leaky_slope", c.generator.leaky_slope, "generator");
    }
    if (j.contains("discriminator")) {
        const auto& d = j.at("discriminator");
        check_keys(d, {"base_channels", "leaky_slope"}, "discriminator");
        read(d, "base_channels", c.discriminator.base_channels, "discriminator");
        read(d, "leaky_slope", c.discriminator.leaky_slope, "discriminator");
    }
    if (j.contains("coarse")) {
        const auto& k = j.at("coarse");
        const std::string w = "coarse";
        check_keys(k, {"codec_hidden", "latent", "dropout", "motion_hidden", "codec_epochs", "motion_epochs", "lr",
                       "batch_size"},
                   w);
        read(k, "codec_hidden", c.codec.hidden, w);
        read(k, "latent", c.codec.latent, w);
        c.motion_encoder.latent = c.codec.latent;
        read(k, "dropout", c.codec.dropout, w);
        read(k, "motion_hidden", c.motion_encoder.hidden, w);
        read(k, "codec_epochs", c.codec_fit.epochs, w);
        read(k, "motion_epochs", c.motion_fit.epochs, w);
        read(k, "lr", c.codec_fit.lr, w);
        c.motion_fit.lr = c.codec_fit.lr;
        read(k, "batch_size", c.codec_fit.batch_size, w);
        c.motion_fit.batch_size = c.codec_fit.batch_size;
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        const std::string w = "train";
        check_keys(t, {"steps", "batch_size", "lr_generator", "lr_discriminator", "beta1", "beta2", "lambda_feat",
                       "lambda_percept", "lambda_gan", "views", "eval_every", "target_mse"},
                   w);
        read(t, "steps", c.train.steps, w);
        read(t, "batch_size", c.train.batch_size, w);
        read(t, "lr_generator", c.train.lr_generator, w);
        read(t, "lr_discriminator", c.train.lr_discriminator, w);
        read(t, "beta1", c.train.beta1, w);
        read(t, "beta2", c.train.beta2, w);
        read(t, "lambda_feat", c.train.weights.feat, w);
        read(t, "lambda_percept", c.train.weights.percept, w);
        read(t, "lambda_gan", c.train.weights.gan, w);
        read(t, "views", c.train_views, w);
        read(t, "eval_every", c.train.eval_every, w);
        read(t, "target_mse", c.train.target_mse, w);
    }
    if (j.contains("finetune")) {
        const auto& f = j.at("finetune");
        check_keys(f, {"body_fraction", "background_iterations", "background_examples"}, "finetune");
        read(f, "body_fraction", c.body_finetune_fraction, "finetune");
        read(f, "background_iterations", c.background_iterations, "finetune");
        read(f, "background_examples", c.background_examples, "finetune");
    }
    if (j.contains("perceptual")) {
        const auto& p = j.at("perceptual");
        check_keys(p, {"mode", "seed", "path"}, "perceptual");
        read(p, "mode", c.perceptual, "perceptual");
        read(p, "seed", c.perceptual_seed, "perceptual");
        std::string path;
        read(p, "path", path, "perceptual");
        c.perceptual_path = path;
    }
    c.train.seed = c.seed;
    c.codec_fit.seed = c.seed;
    c.motion_fit.seed = c.seed + 1;
    c.data.sim.seed = c.seed;
    c.validate();
    return c;
}

json config_to_json(const PipelineConfig& c) {
    const auto& d = c.data;
    return {
        {"seed", c.seed},
        {"resolution", {c.resolution.width, c.resolution.height}},
        {"data",
         {{"frames", d.frames}, {"fps", d.fps}, {"motion_style", d.motion_style}, {"garment", d.garment},
          {"coarse_garment", d.coarse_garment}, {"target_spacing", d.target_spacing}, {"coarse_spacing", d.coarse_spacing},
          {"views", d.views}, {"camera_target", vec3(d.camera_target)}, {"camera_radius", d.camera_radius},
          {"camera_elevation", d.camera_elevation}, {"camera_fov", d.camera_fov}, {"body_girth", d.body_girth},
          {"background", vec3(d.palette.background)},
          {"sim",
           {{"substeps", d.sim.substeps}, {"iterations", d.sim.iterations},
            {"stretch_compliance", d.sim.stretch_compliance}, {"damping", d.sim.damping},
            {"collision_margin", d.sim.collision_margin}, {"settle_frames", d.sim.settle_frames}}}}},
        {"descriptor",
         {{"stride", c.window.stride}, {"count", c.window.count}, {"motion_features", c.motion.enabled},
          {"motion_maps", c.motion.maps}, {"motion_stride", c.motion.stride}, {"sigma", c.motion.sigma}}},
        {"texture",
         {{"resolution", c.texture.base_resolution}, {"levels", c.texture.levels}, {"channels", c.texture.channels},
          {"init_range", c.texture.init_range}}},
        {"generator",
         {{"encoder_channels", c.generator.encoder_channels}, {"feature_channels", c.generator.feature_channels},
          {"leaky_slope", c.generator.leaky_slope}}},
        {"discriminator", {{"base_channels", c.discriminator.base_channels}, {"leaky_slope", c.discriminator.leaky_slope}}},
        {"coarse",
         {{"codec_hidden", c.codec.hidden}, {"latent", c.codec.latent}, {"dropout", c.codec.dropout},
          {"motion_hidden", c.motion_encoder.hidden}, {"codec_epochs", c.codec_fit.epochs},
          {"motion_epochs", c.motion_fit.epochs}, {"lr", c.codec_fit.lr}, {"batch_size", c.codec_fit.batch_size}}},
        {"train",
         {{"steps", c.train.steps}, {"batch_size", c.train.batch_size}, {"lr_generator", c.train.lr_generator},
          {"lr_discriminator", c.train.lr_discriminator}, {"beta1", c.train.beta1}, {"beta2", c.train.beta2},
          {"lambda_feat", c.train.weights.feat}, {"lambda_percept", c.train.weights.percept},
          {"lambda_gan", c.train.weights.gan}, {"views", c.train_views}, {"eval_every", c.train.eval_every},
          {"target_mse", c.train.target_mse}}},
        {"finetune",
         {{"body_fraction", c.body_finetune_fraction}, {"background_iterations", c.background_iterations},
          {"background_examples", c.background_examples}}},
        {"perceptual", {{"mode", c.perceptual}, {"seed", c.perceptual_seed}, {"path", c.perceptual_path.string()}}},
        {"relayer", c.relayer}};
}

PipelineConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

std::unique_ptr<PerceptualExtractor> make_extractor(const PipelineConfig& config) {
    if (config.perceptual == "scripted") return load_scripted_extractor(config.perceptual_path);
    return make_random_extractor(config.perceptual_seed);
}

Dataset generate_dataset(const PipelineConfig& config) {
    config.validate();
    const auto& dc = config.data;
    Dataset d;
    d.clip = animate_skeleton(parse_motion_style(dc.motion_style), dc.frames, dc.fps, config.seed);
    const auto body = BodyProxy::standard(dc.body_girth);

    const auto target = build_garment_grid(parse_garment_kind(dc.garment), dc.target_spacing);
    const auto coarse = build_garment_grid(parse_garment_kind(dc.coarse_garment), dc.coarse_spacing);
    log::info("simulating target garment (", target.mesh.vertex_count(), " vertices) and coarse proxy (",
              coarse.mesh.vertex_count(), " vertices) over ", dc.frames, " frames");
    const auto target_seq = simulate(target, d.clip, body, dc.sim);
    d.coarse = simulate(coarse, d.clip, body, dc.sim);

    const auto cameras = ring_cameras(dc.views, dc.camera_target, dc.camera_radius, dc.camera_elevation, dc.camera_fov,
                                      config.resolution, config.seed + 101);
    d.views = render_ground_truth(target_seq, body, d.clip, cameras, config.resolution, dc.palette);
    // what is written to disk is 8-bit; keep the in-memory copy identical
    for (auto& v : d.views) {
        for (auto* frames : {&v.gt, &v.bg, &v.arm}) {
            for (auto& img : *frames) img = quantize_8bit(img);
        }
    }

    auto& m = d.meta;
    m.fps = dc.fps;
    m.frame_count = dc.frames;
    for (const auto& n : joint_names()) m.joint_names.emplace_back(n);
    m.resolution = config.resolution;
    for (const auto& c : cameras) m.views.push_back(c.view_id);
    m.window = config.window;
    m.motion = config.motion;
    m.body_girth = dc.body_girth;
    m.garment = dc.garment;
    m.motion_style = dc.motion_style;
    for (int t = 1; t + 1 < dc.frames; ++t) m.triplet_frames.push_back(t);
    m.generator = config_to_json(config).at("data");
    m.generator["seed"] = config.seed;
    return d;
}

std::vector<int> training_views(const PipelineConfig& config, const Dataset& dataset) {
    std::vector<int> v = dataset.meta.views;
    if (config.train_views > 0) {
        if (config.train_views > static_cast<int>(v.size())) {
            throw ConfigError("requested " + std::to_string(config.train_views) + " training views but the dataset has " +
                              std::to_string(v.size()));
        }
        v.resize(static_cast<std::size_t>(config.train_views));
    }
    return v;
}

void cmd_gen_data(const PipelineConfig& config, const fs::path& out) {
    const auto d = generate_dataset(config);
    write_dataset(out, d);
    const auto problems = validate_dataset(out);
    if (!problems.empty()) throw SchemaMismatch("generated dataset failed validation: " + problems.front());
    log::info("wrote ", d.meta.frame_count, " frames x ", d.meta.views.size(), " views to ", out.string());
}

namespace {

void require_matching_meta(const PipelineConfig& config, const Dataset& d) {
    const auto& m = d.meta;
    if (m.resolution != config.resolution) throw SchemaMismatch("dataset resolution differs from the config");
    if (config.motion.enabled && (m.motion.maps != config.motion.maps || m.motion.stride != config.motion.stride ||
                                  m.motion.sigma != config.motion.sigma)) {
        throw SchemaMismatch("dataset motion-feature settings (maps, stride, sigma) differ from the config");
    }
    if (m.window != config.window) throw SchemaMismatch("dataset descriptor window differs from the config");
}

std::string data_schema(const Dataset& d) {
    return json_hash({{"resolution", {d.meta.resolution.width, d.meta.resolution.height}},
                      {"joints", d.meta.joint_names},
                      {"garment", d.meta.garment}});
}

MeshSequence coarse_for(const PipelineConfig& config, const Dataset& d, const std::optional<fs::path>& coarse) {
    if (!coarse) return d.coarse;
    auto model = load_coarse_model(*coarse, config.window, d.clip.joint_count());
    return predict_coarse_sequence(model, d.clip);
}

}  // namespace

CoarseTrainResult cmd_train_coarse(const PipelineConfig& config, const fs::path& data, const fs::path& out) {
    const auto d = load_dataset(data, false);
    require_matching_meta(config, d);
    auto r = train_coarse(d.coarse, d.clip, config.window, config.codec, config.motion_encoder, config.codec_fit,
                          config.motion_fit);
    save_coarse_model(out, r.model);
    const auto& cr = r.codec_report;
    const auto& mr = r.motion_report;
    log::info("coarse model: codec best epoch ", cr.best_epoch, " (loss ", cr.eval_loss[static_cast<std::size_t>(cr.best_epoch)],
              "), motion encoder best epoch ", mr.best_epoch, " (loss ",
              mr.eval_loss[static_cast<std::size_t>(mr.best_epoch)], ")");
    return r;
}

TrainReport cmd_train_render(const PipelineConfig& config, const fs::path& data, const std::optional<fs::path>& coarse,
                             const fs::path& out) {
    const auto d = load_dataset(data);
    require_matching_meta(config, d);
    TrainingSet set(d, coarse_for(config, d, coarse), training_views(config, d), config.layout());
    auto renderer = Renderer::create(config.layout(), config.resolution, config.generator_config(),
                                     config.discriminator, config.seed);
    renderer.data_schema = data_schema(d);
    auto extractor = make_extractor(config);
    TrainConfig tc = config.train;
    tc.log_csv = out.parent_path() / (out.stem().string() + "_log.csv");
    tc.diagnostics = out.parent_path() / (out.stem().string() + "_diagnostics.json");
    const auto report = train_renderer(renderer, set, *extractor, tc);
    save_renderer(out, renderer);
    const auto metrics = evaluate_samples(renderer, set, set.samples());
    log::info("trained ", report.steps_run, " steps in ", report.seconds, " s, training mu_mse ", metrics.mu_mse);
    return report;
}

SequenceRender cmd_render(const PipelineConfig& config, const RenderRequest& req) {
    auto renderer = load_renderer(req.renderer, config.layout());
    auto coarse_model = load_coarse_model(req.coarse, config.window, config.layout().joint_count);
    const MotionClip clip = fs::is_directory(req.motion) ? load_dataset(req.motion, false).clip
                                                         : clip_from_json(read_json(req.motion));
    Camera camera = camera_from_json(read_json(req.camera));

    const auto coarse = predict_coarse_sequence(coarse_model, clip);
    const auto body = BodyProxy::standard(config.data.body_girth);
    std::vector<BodyRender> bodies;
    std::vector<Image> backgrounds;
    for (int t = 0; t < clip.frame_count(); ++t) {
        bodies.push_back(render_body(body, clip.pose(t), camera, renderer.resolution, config.data.palette));
        // same 8-bit quantization the training backgrounds went through
        backgrounds.push_back(quantize_8bit(bodies.back().rgb));
    }
    auto seq = render_sequence(renderer, coarse, clip, camera, backgrounds);

    fs::create_directories(req.out);
    for (int t = 0; t < clip.frame_count(); ++t) {
        const auto i = static_cast<std::size_t>(t);
        Image frame = seq.rgb[i];
        if (req.relayer) {
            std::vector<float> arm_depth(bodies[i].depth.size(), 0.0f);
            for (std::size_t p = 0; p < arm_depth.size(); ++p) {
                if (bodies[i].arm_mask.pixels[p] > 0.5f) arm_depth[p] = bodies[i].depth[p];
            }
            frame = relayer({seq.rgb[i], backgrounds[i], bodies[i].arm_mask, seq.garment_mask[i], arm_depth,
                             seq.proxy_depth[i]});
            seq.rgb[i] = frame;
        }
        write_png(req.out / ("frame_" + std::to_string(t) + ".png"), frame);
        log::info("frame ", t, ": ", seq.frame_ms[i], " ms");
    }
    double mean = 0.0;
    for (double ms : seq.frame_ms) mean += ms;
    mean /= static_cast<double>(seq.frame_ms.size());
    write_json(req.out / "timing.json", {{"frame_ms", seq.frame_ms}, {"mean_ms", mean}});
    log::info("rendered ", clip.frame_count(), " frames, ", mean, " ms per frame");
    return seq;
}

namespace {

std::map<int, fs::path> numbered_pngs(const fs::path& dir, const std::string& prefix) {
    if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
    const std::regex pattern(prefix + "_([0-9]+)\\.png");
    std::map<int, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::smatch m;
        const auto name = e.path().filename().string();
        if (std::regex_match(name, m, pattern)) out[std::stoi(m[1].str())] = e.path();
    }
    return out;
}

}  // namespace

Metrics cmd_evaluate(const fs::path& pred, const fs::path& gt, const fs::path& out, const std::string& pred_prefix,
                     const std::string& gt_prefix) {
    const auto p = numbered_pngs(pred, pred_prefix);
    const auto g = numbered_pngs(gt, gt_prefix);
    if (p.empty()) throw ConfigError("no " + pred_prefix + "_<t>.png frames in " + pred.string());
    if (p.size() != g.size()) {
        throw SchemaMismatch("evaluate: " + std::to_string(p.size()) + " predicted vs " + std::to_string(g.size()) +
                             " ground-truth frames");
    }
    std::vector<Image> pi, gi;
    for (const auto& [t, path] : p) {
        const auto it = g.find(t);
        if (it == g.end()) throw SchemaMismatch("evaluate: no ground truth for frame " + std::to_string(t));
        pi.push_back(read_png(path));
        gi.push_back(read_png(it->second));
    }
    const auto m = evaluate(pi, gi);
    write_json(out, m.to_json());
    return m;
}

TrainReport cmd_finetune_body(const PipelineConfig& config, const fs::path& base, const fs::path& data,
                              const std::optional<fs::path>& coarse, const fs::path& out) {
    auto renderer = load_renderer(base, config.layout());
    const auto d = load_dataset(data);
    require_matching_meta(config, d);
    TrainingSet set(d, coarse_for(config, d, coarse), training_views(config, d), config.layout());
    auto extractor = make_extractor(config);
    TrainConfig tc = config.train;
    tc.steps = std::max(1, static_cast<int>(std::lround(config.body_finetune_fraction * config.train.steps)));
    tc.log_csv = out.parent_path() / (out.stem().string() + "_log.csv");
    const auto report = finetune_body_shape(renderer, set, *extractor, tc);
    renderer.data_schema = data_schema(d);
    save_renderer(out, renderer);
    log::info("body fine-tune: ", report.steps_run, " steps in ", report.seconds, " s");
    return report;
}

std::vector<Sample> pick_examples(const std::vector<Sample>& samples, int count) {
    if (count < 1 || samples.empty()) return {};
    std::vector<Sample> out;
    const auto n = samples.size();
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(count), n);
    for (std::size_t i = 0; i < k; ++i) out.push_back(samples[i * n / k]);
    return out;
}

TrainReport cmd_finetune_background(const PipelineConfig& config, const fs::path& base, const fs::path& data,
                                    const std::optional<fs::path>& coarse, const fs::path& out) {
    auto renderer = load_renderer(base, config.layout());
    const auto d = load_dataset(data);
    require_matching_meta(config, d);
    TrainingSet set(d, coarse_for(config, d, coarse), training_views(config, d), config.layout());
    set.set_samples(pick_examples(set.samples(), config.background_examples));
    auto extractor = make_extractor(config);
    TrainConfig tc = config.train;
    tc.steps = config.background_iterations;
    tc.eval_every = 0;
    tc.log_csv = out.parent_path() / (out.stem().string() + "_log.csv");
    const auto before = evaluate_samples(renderer, set, set.samples()).mu_mse;
    const auto report = finetune_background(renderer, set, *extractor, tc);
    const auto after = evaluate_samples(renderer, set, set.samples()).mu_mse;
    save_renderer(out, renderer);
    log::info("background fine-tune: example mu_mse ", before, " -> ", after);
    return report;
}

}  // namespace dng
