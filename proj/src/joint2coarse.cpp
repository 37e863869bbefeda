#include "dng/joint2coarse.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dng/checkpoint.hpp"
#include "dng/dataset_io.hpp"

namespace dng {

MlpImpl::MlpImpl(std::vector<int> widths, double dropout) : widths_(std::move(widths)), dropout_(dropout) {
    if (widths_.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
        if (widths_[i] < 1 || widths_[i + 1] < 1) throw ConfigError("MLP widths must be positive");
        layers_->push_back(torch::nn::Linear(widths_[i], widths_[i + 1]));
    }
    register_module("layers", layers_);
}

torch::Tensor MlpImpl::forward(torch::Tensor x) {
    const std::size_t n = layers_->size();
    for (std::size_t i = 0; i < n; ++i) {
        x = layers_[i]->as<torch::nn::Linear>()->forward(x);
        if (i + 1 < n) {
            x = torch::relu(x);
            if (dropout_ > 0.0) x = torch::dropout(x, dropout_, is_training());
        }
    }
    return x;
}

ShapeCodecImpl::ShapeCodecImpl(int vertex_count, const CodecConfig& config)
    : vertex_count_(vertex_count), config_(config) {
    if (vertex_count < 1) throw ConfigError("codec vertex count must be positive");
    std::vector<int> enc{vertex_count * 3};
    enc.insert(enc.end(), config.hidden.begin(), config.hidden.end());
    enc.push_back(config.latent);
    std::vector<int> dec(enc.rbegin(), enc.rend());
    encoder_ = register_module("encoder", Mlp(enc, config.dropout));
    decoder_ = register_module("decoder", Mlp(dec, config.dropout));
}

torch::Tensor ShapeCodecImpl::encode(torch::Tensor x) { return encoder_->forward(x); }
torch::Tensor ShapeCodecImpl::decode(torch::Tensor z) { return decoder_->forward(z); }

MotionEncoderImpl::MotionEncoderImpl(int input_dim, const MotionEncoderConfig& config)
    : input_dim_(input_dim), config_(config) {
    std::vector<int> w{input_dim};
    w.insert(w.end(), config.hidden.begin(), config.hidden.end());
    w.push_back(config.latent);
    mlp_ = register_module("mlp", Mlp(w, config.dropout));
}

torch::Tensor MotionEncoderImpl::forward(torch::Tensor x) { return mlp_->forward(x); }

double bbox_diagonal(std::span<const Vec3> vertices) {
    if (vertices.empty()) return 0.0;
    Vec3 lo = vertices[0], hi = vertices[0];
    for (const auto& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return static_cast<double>((hi - lo).norm());
}

double vertex_rmse(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.size() != b.size()) throw SchemaMismatch("vertex_rmse: vertex counts differ");
    if (a.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).cast<double>().squaredNorm();
    return std::sqrt(sum / static_cast<double>(a.size()));
}

CoarseNormalizer CoarseNormalizer::from_rest(const TriMesh& rest) {
    const double d = bbox_diagonal(rest.vertices);
    if (!(d > 0.0)) throw ConfigError("rest mesh has an empty bounding box");
    return {static_cast<float>(d)};
}

std::vector<float> CoarseNormalizer::normalize(std::span<const Vec3> vertices, const Vec3& root) const {
    std::vector<float> out;
    out.reserve(vertices.size() * 3);
    for (const auto& v : vertices) {
        const Vec3 n = (v - root) / scale;
        out.insert(out.end(), {n.x(), n.y(), n.z()});
    }
    return out;
}

std::vector<Vec3> CoarseNormalizer::denormalize(std::span<const float> values, const Vec3& root) const {
    if (values.size() % 3 != 0) throw SchemaMismatch("normalized vertex array length is not a multiple of 3");
    std::vector<Vec3> out;
    out.reserve(values.size() / 3);
    for (std::size_t i = 0; i < values.size(); i += 3) {
        out.push_back(Vec3(values[i], values[i + 1], values[i + 2]) * scale + root);
    }
    return out;
}

namespace {

torch::Tensor row(std::span<const float> v) {
    return torch::from_blob(const_cast<float*>(v.data()), {1, static_cast<std::int64_t>(v.size())}, torch::kFloat32).clone();
}

std::vector<float> to_vector(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kFloat32).contiguous().reshape({-1});
    return {c.data_ptr<float>(), c.data_ptr<float>() + c.numel()};
}

// Evaluation-mode forward; restores the previous mode.
template <typename M, typename F>
torch::Tensor eval_forward(M& module, F&& f) {
    const bool was_training = module->is_training();
    module->eval();
    torch::NoGradGuard guard;
    auto out = f();
    module->train(was_training);
    return out;
}

}  // namespace

std::vector<float> encode_shape(ShapeCodec& codec, std::span<const float> normalized_vertices) {
    if (normalized_vertices.size() != static_cast<std::size_t>(codec->vertex_count()) * 3) {
        throw SchemaMismatch("encode_shape: expected " + std::to_string(codec->vertex_count() * 3) + " values, got " +
                             std::to_string(normalized_vertices.size()));
    }
    return to_vector(eval_forward(codec, [&] { return codec->encode(row(normalized_vertices)); }));
}

std::vector<float> decode_shape(ShapeCodec& codec, std::span<const float> latent) {
    if (latent.size() != static_cast<std::size_t>(codec->config().latent)) {
        throw SchemaMismatch("decode_shape: latent length " + std::to_string(latent.size()));
    }
    return to_vector(eval_forward(codec, [&] { return codec->decode(row(latent)); }));
}

std::vector<float> encode_motion(MotionEncoder& encoder, const MotionDescriptor& descriptor) {
    if (descriptor.window.size() != static_cast<std::size_t>(encoder->input_dim())) {
        throw SchemaMismatch("encode_motion: descriptor length " + std::to_string(descriptor.window.size()) +
                             ", encoder expects " + std::to_string(encoder->input_dim()));
    }
    return to_vector(eval_forward(encoder, [&] { return encoder->forward(row(descriptor.window)); }));
}

json CoarseModel::descriptor_json() const {
    return {{"stride", window.stride}, {"count", window.count}, {"joint_count", joint_count}};
}

std::vector<Vec3> predict_coarse(CoarseModel& model, const MotionDescriptor& descriptor, const Vec3& root) {
    const auto z = encode_motion(model.motion, descriptor);
    return model.normalizer.denormalize(decode_shape(model.codec, z), root);
}

MeshSequence predict_coarse_sequence(CoarseModel& model, const MotionClip& clip) {
    if (clip.joint_count() != model.joint_count) {
        throw SchemaMismatch("clip has " + std::to_string(clip.joint_count()) + " joints, coarse model expects " +
                             std::to_string(model.joint_count));
    }
    std::vector<std::vector<Vec3>> frames;
    for (int t = 0; t < clip.frame_count(); ++t) {
        frames.push_back(predict_coarse(model, make_descriptor(clip, t, model.window), clip.pose(t).root()));
    }
    return MeshSequence(model.topology, std::move(frames));
}

namespace {

template <typename LossFn, typename EvalFn>
FitReport fit(torch::nn::Module& module, std::int64_t samples, const FitConfig& config, LossFn&& batch_loss,
              EvalFn&& eval_loss) {
    if (config.epochs < 1 || config.batch_size < 1 || !(config.lr > 0.0)) {
        throw ConfigError("fit needs epochs >= 1, batch_size >= 1 and lr > 0");
    }
    if (samples < 1) throw ConfigError("fit needs at least one sample");
    torch::optim::RMSprop opt(module.parameters(), torch::optim::RMSpropOptions(config.lr));
    std::mt19937_64 rng(config.seed);
    std::vector<std::int64_t> order(static_cast<std::size_t>(samples));
    std::iota(order.begin(), order.end(), 0);

    FitReport report;
    double best = std::numeric_limits<double>::infinity();
    std::vector<torch::Tensor> best_params;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        module.train();
        double total = 0.0;
        int batches = 0;
        for (std::int64_t s = 0; s < samples; s += config.batch_size) {
            const auto n = std::min<std::int64_t>(config.batch_size, samples - s);
            const auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + s, order.begin() + s + n));
            opt.zero_grad();
            auto loss = batch_loss(idx);
            const double v = loss.template item<double>();
            if (!std::isfinite(v)) {
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batches));
            }
            loss.backward();
            opt.step();
            total += v;
            ++batches;
        }
        report.epoch_loss.push_back(total / batches);
        module.eval();
        double ev = 0.0;
        {
            torch::NoGradGuard guard;
            ev = eval_loss().template item<double>();
        }
        report.eval_loss.push_back(ev);
        if (ev < best) {
            best = ev;
            report.best_epoch = epoch;
            best_params.clear();
            for (const auto& p : module.parameters()) best_params.push_back(p.detach().clone());
        }
    }
    {
        torch::NoGradGuard guard;
        auto params = module.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) params[i].copy_(best_params[i]);
    }
    module.eval();
    return report;
}

}  // namespace

FitReport train_codec(ShapeCodec& codec, const torch::Tensor& frames, const FitConfig& config) {
    if (frames.dim() != 2 || frames.size(1) != codec->vertex_count() * 3) {
        throw SchemaMismatch("train_codec: frames must be [T, V*3] with V = " + std::to_string(codec->vertex_count()));
    }
    torch::manual_seed(config.seed);
    return fit(
        *codec, frames.size(0), config,
        [&](const torch::Tensor& idx) {
            const auto x = frames.index_select(0, idx);
            return torch::mse_loss(codec->forward(x), x);
        },
        [&] { return torch::mse_loss(codec->forward(frames), frames); });
}

FitReport train_motion_encoder(MotionEncoder& encoder, ShapeCodec& codec, const torch::Tensor& descriptors,
                               const torch::Tensor& frames, const FitConfig& config) {
    if (descriptors.dim() != 2 || descriptors.size(1) != encoder->input_dim()) {
        throw SchemaMismatch("train_motion_encoder: descriptors must be [T, " + std::to_string(encoder->input_dim()) + "]");
    }
    if (frames.size(0) != descriptors.size(0)) throw SchemaMismatch("train_motion_encoder: frame counts differ");
    torch::manual_seed(config.seed);
    codec->eval();
    for (auto& p : codec->parameters()) p.set_requires_grad(false);
    torch::Tensor targets;
    {
        torch::NoGradGuard guard;
        targets = codec->encode(frames);
    }
    auto report = fit(
        *encoder, descriptors.size(0), config,
        [&](const torch::Tensor& idx) {
            return torch::mse_loss(encoder->forward(descriptors.index_select(0, idx)), targets.index_select(0, idx));
        },
        [&] { return torch::mse_loss(encoder->forward(descriptors), targets); });
    for (auto& p : codec->parameters()) p.set_requires_grad(true);
    return report;
}

CoarseTrainingData coarse_training_data(const MeshSequence& coarse, const MotionClip& clip,
                                        const CoarseNormalizer& normalizer, const DescriptorWindow& window) {
    if (coarse.frame_count() != clip.frame_count()) throw SchemaMismatch("coarse sequence and clip lengths differ");
    std::vector<float> frames, descriptors;
    for (int t = 0; t < clip.frame_count(); ++t) {
        const auto n = normalizer.normalize(coarse.frame(t), clip.pose(t).root());
        frames.insert(frames.end(), n.begin(), n.end());
        const auto d = make_descriptor(clip, t, window);
        descriptors.insert(descriptors.end(), d.window.begin(), d.window.end());
    }
    const std::int64_t T = clip.frame_count();
    CoarseTrainingData data;
    data.frames = torch::tensor(frames).reshape({T, -1});
    data.descriptors = torch::tensor(descriptors).reshape({T, -1});
    return data;
}

CoarseTrainResult train_coarse(const MeshSequence& coarse, const MotionClip& clip, const DescriptorWindow& window,
                               const CodecConfig& codec_config, const MotionEncoderConfig& motion_config,
                               const FitConfig& codec_fit, const FitConfig& motion_fit) {
    CoarseTrainResult r;
    r.model.window = window;
    r.model.joint_count = clip.joint_count();
    r.model.topology = coarse.topology();
    r.model.normalizer = CoarseNormalizer::from_rest(coarse.topology());
    const auto data = coarse_training_data(coarse, clip, r.model.normalizer, window);

    torch::manual_seed(codec_fit.seed);
    r.model.codec = ShapeCodec(coarse.vertex_count(), codec_config);
    r.codec_report = train_codec(r.model.codec, data.frames, codec_fit);

    torch::manual_seed(motion_fit.seed + 1);
    r.model.motion = MotionEncoder(static_cast<int>(data.descriptors.size(1)), motion_config);
    r.motion_report = train_motion_encoder(r.model.motion, r.model.codec, data.descriptors, data.frames, motion_fit);
    return r;
}

void save_coarse_model(const std::filesystem::path& path, const CoarseModel& model) {
    Checkpoint ckpt;
    ckpt.kind = "coarse";
    const auto& cc = model.codec->config();
    const auto& mc = model.motion->config();
    ckpt.config = {{"vertex_count", model.codec->vertex_count()},
                   {"codec_hidden", cc.hidden},
                   {"codec_latent", cc.latent},
                   {"codec_dropout", cc.dropout},
                   {"motion_hidden", mc.hidden},
                   {"motion_latent", mc.latent},
                   {"motion_dropout", mc.dropout},
                   {"motion_input", model.motion->input_dim()},
                   {"scale", model.normalizer.scale},
                   {"topology", topology_to_json(model.topology)}};
    ckpt.descriptor = model.descriptor_json();
    add_module(ckpt, "codec", *model.codec);
    add_module(ckpt, "motion", *model.motion);
    save_checkpoint(path, ckpt);
}

namespace {

CoarseModel coarse_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != "coarse") throw SchemaMismatch("expected a coarse checkpoint, found '" + ckpt.kind + "'");
    CoarseModel m;
    try {
        const auto& c = ckpt.config;
        CodecConfig cc;
        cc.hidden = c.at("codec_hidden").get<std::vector<int>>();
        cc.latent = c.at("codec_latent").get<int>();
        cc.dropout = c.at("codec_dropout").get<double>();
        MotionEncoderConfig mc;
        mc.hidden = c.at("motion_hidden").get<std::vector<int>>();
        mc.latent = c.at("motion_latent").get<int>();
        mc.dropout = c.at("motion_dropout").get<double>();
        m.codec = ShapeCodec(c.at("vertex_count").get<int>(), cc);
        m.motion = MotionEncoder(c.at("motion_input").get<int>(), mc);
        m.normalizer.scale = c.at("scale").get<float>();
        m.topology = topology_from_json(c.at("topology"));
        m.window.stride = ckpt.descriptor.at("stride").get<int>();
        m.window.count = ckpt.descriptor.at("count").get<int>();
        m.joint_count = ckpt.descriptor.at("joint_count").get<int>();
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("coarse checkpoint config: ") + e.what());
    }
    load_module(ckpt, "codec", *m.codec);
    load_module(ckpt, "motion", *m.motion);
    m.codec->eval();
    m.motion->eval();
    return m;
}

}  // namespace

CoarseModel load_coarse_model(const std::filesystem::path& path) {
    return coarse_from_checkpoint(load_checkpoint(path));
}

CoarseModel load_coarse_model(const std::filesystem::path& path, const DescriptorWindow& expected_window,
                              int expected_joints) {
    const auto ckpt = load_checkpoint(path);
    require_same_descriptor(ckpt.descriptor, {{"stride", expected_window.stride},
                                              {"count", expected_window.count},
                                              {"joint_count", expected_joints}});
    return coarse_from_checkpoint(ckpt);
}

}  // namespace dng
