#include "dng/losses.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <torch/script.h>

#include "dng/error.hpp"

namespace dng {

void LossWeights::validate() const {
    if (!(feat >= 0.0) || !(percept >= 0.0) || !(gan >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

namespace {

class RandomConvExtractor : public PerceptualExtractor {
public:
    explicit RandomConvExtractor(std::uint64_t seed) {
        auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
        const int widths[] = {3, 16, 32, 64};
        const int strides[] = {1, 2, 2};
        for (int i = 0; i < 3; ++i) {
            const int in = widths[i], out = widths[i + 1];
            const double bound = std::sqrt(6.0 / (in * 9));  // He-uniform keeps activations in range
            weights_.push_back((torch::rand({out, in, 3, 3}, gen) * 2 - 1) * bound);
            strides_.push_back(strides[i]);
        }
    }

    std::vector<torch::Tensor> taps(const torch::Tensor& image) override {
        std::vector<torch::Tensor> out;
        auto x = image;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            x = torch::relu(torch::conv2d(x, weights_[i], {}, strides_[i], 1));
            out.push_back(x);
        }
        return out;
    }

    std::vector<torch::Tensor> parameters() override { return weights_; }
    std::string name() const override { return "random-conv"; }

private:
    std::vector<torch::Tensor> weights_;
    std::vector<int64_t> strides_;
};

class ScriptedExtractor : public PerceptualExtractor {
public:
    explicit ScriptedExtractor(const std::filesystem::path& path) : path_(path) {
        try {
            module_ = torch::jit::load(path.string());
        } catch (const c10::Error& e) {
            throw ConfigError("cannot load perceptual network " + path.string() + ": " + e.what_without_backtrace());
        }
        module_.eval();
        for (const auto& p : module_.parameters()) p.set_requires_grad(false);
    }

    std::vector<torch::Tensor> taps(const torch::Tensor& image) override {
        const auto out = module_.forward({image});
        std::vector<torch::Tensor> result;
        if (out.isTensorList()) {
            for (const auto& t : out.toTensorList()) result.push_back(t);
        } else if (out.isList()) {
            for (const auto& v : out.toList()) result.push_back(v.get().toTensor());
        } else if (out.isTuple()) {
            for (const auto& v : out.toTuple()->elements()) result.push_back(v.toTensor());
        } else {
            throw SchemaMismatch("perceptual network must return a list or tuple of tensors");
        }
        return result;
    }

    std::vector<torch::Tensor> parameters() override {
        std::vector<torch::Tensor> out;
        for (const auto& p : module_.parameters()) out.push_back(p);
        return out;
    }
    std::string name() const override { return "scripted:" + path_.filename().string(); }

private:
    std::filesystem::path path_;
    torch::jit::Module module_;
};

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) throw SchemaMismatch(std::string(what) + ": input shapes differ");
}

}  // namespace

std::unique_ptr<PerceptualExtractor> make_random_extractor(std::uint64_t seed) {
    return std::make_unique<RandomConvExtractor>(seed);
}

std::unique_ptr<PerceptualExtractor> load_scripted_extractor(const std::filesystem::path& path) {
    return std::make_unique<ScriptedExtractor>(path);
}

std::uint64_t parameter_hash(const std::vector<torch::Tensor>& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params) {
        const auto c = p.detach().contiguous();
        const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
        for (std::size_t i = 0; i < c.nbytes(); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

torch::Tensor perceptual_loss(PerceptualExtractor& extractor, const torch::Tensor& r, const torch::Tensor& i) {
    require_same_shape(r, i, "perceptual_loss");
    const auto fr = extractor.taps(r);
    const auto fi = extractor.taps(i);
    auto loss = (r - i).abs().mean();
    for (std::size_t k = 0; k < fr.size(); ++k) loss = loss + (fr[k] - fi[k]).abs().mean();
    return loss;
}

torch::Tensor bce(const torch::Tensor& prob, bool real) {
    const auto p = prob.clamp(kLogEpsilon, 1.0 - kLogEpsilon);
    return real ? -torch::log(p).mean() : -torch::log(1.0 - p).mean();
}

torch::Tensor d_loss_from_probs(const torch::Tensor& real1, const torch::Tensor& fake1, const torch::Tensor& real2,
                                const torch::Tensor& fake2) {
    return bce(real1, true) + bce(fake1, false) + bce(real2, true) + bce(fake2, false);
}

torch::Tensor g_gan_loss_from_probs(const torch::Tensor& fake1, const torch::Tensor& fake2) {
    return bce(fake1, true) + bce(fake2, true);
}

torch::Tensor d_loss(Discriminator& d, const torch::Tensor& r_t, const torch::Tensor& i_prev, const torch::Tensor& i_t,
                     const torch::Tensor& i_next) {
    require_same_shape(r_t, i_t, "d_loss");
    const auto r = r_t.detach();
    const auto n = r.size(0);
    // one batched pass over the four pairs
    const auto probs = torch::sigmoid(d->forward(torch::cat(
        {frame_pair(i_t, i_prev), frame_pair(r, i_prev), frame_pair(i_next, i_t), frame_pair(i_next, r)}, 0)));
    return d_loss_from_probs(probs.narrow(0, 0, n), probs.narrow(0, n, n), probs.narrow(0, 2 * n, n),
                             probs.narrow(0, 3 * n, n));
}

torch::Tensor g_gan_loss(Discriminator& d, const torch::Tensor& r_t, const torch::Tensor& i_prev,
                         const torch::Tensor& i_next) {
    const auto n = r_t.size(0);
    const auto probs = torch::sigmoid(d->forward(torch::cat({frame_pair(r_t, i_prev), frame_pair(i_next, r_t)}, 0)));
    return g_gan_loss_from_probs(probs.narrow(0, 0, n), probs.narrow(0, n, n));
}

namespace {

torch::Tensor matching_term(const std::vector<torch::Tensor>& fake, const std::vector<torch::Tensor>& real, int64_t n) {
    auto loss = torch::zeros({}, fake.front().options());
    // intermediate layers only: the logit map grows without bound as D gets confident
    for (std::size_t k = 0; k + 1 < fake.size(); ++k) {
        // mean over each pair separately, matching the two sums of the objective
        loss = loss + (fake[k].narrow(0, 0, n) - real[k].narrow(0, 0, n)).abs().mean() +
               (fake[k].narrow(0, n, n) - real[k].narrow(0, n, n)).abs().mean();
    }
    return loss;
}

std::vector<torch::Tensor> real_features(Discriminator& d, const torch::Tensor& i_prev, const torch::Tensor& i_t,
                                         const torch::Tensor& i_next) {
    torch::NoGradGuard guard;
    return d->features(torch::cat({frame_pair(i_t, i_prev), frame_pair(i_next, i_t)}, 0));
}

}  // namespace

torch::Tensor feature_matching_loss(Discriminator& d, const torch::Tensor& r_t, const torch::Tensor& i_prev,
                                    const torch::Tensor& i_t, const torch::Tensor& i_next) {
    return generator_adversarial_losses(d, r_t, i_prev, i_t, i_next).feat;
}

GeneratorAdversarialLosses generator_adversarial_losses(Discriminator& d, const torch::Tensor& r_t,
                                                        const torch::Tensor& i_prev, const torch::Tensor& i_t,
                                                        const torch::Tensor& i_next) {
    require_same_shape(r_t, i_t, "feature_matching_loss");
    const auto n = r_t.size(0);
    const auto fake = d->features(torch::cat({frame_pair(r_t, i_prev), frame_pair(i_next, r_t)}, 0));
    const auto real = real_features(d, i_prev, i_t, i_next);
    const auto probs = torch::sigmoid(fake.back());
    return {matching_term(fake, real, n), g_gan_loss_from_probs(probs.narrow(0, 0, n), probs.narrow(0, n, n))};
}

torch::Tensor g_total_loss(const LossWeights& w, const torch::Tensor& feat, const torch::Tensor& percept,
                           const torch::Tensor& gan) {
    return w.feat * feat + w.percept * percept + w.gan * gan;
}

double g_total_loss(const LossWeights& w, double feat, double percept, double gan) {
    return w.feat * feat + w.percept * percept + w.gan * gan;
}

}  // namespace dng
