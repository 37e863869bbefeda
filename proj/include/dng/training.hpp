#pragma once

// Renderer state (G, neural texture, D), the training set built from a dataset container,
// the alternating adversarial training loop and the two fine-tuning recipes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "dng/dataset_io.hpp"
#include "dng/discriminator.hpp"
#include "dng/evaluation.hpp"
#include "dng/losses.hpp"
#include "dng/neural_descriptor.hpp"
#include "dng/render_net.hpp"

namespace dng {

using json = nlohmann::json;

/// Everything that fixes the meaning of the descriptor channels.
struct DescriptorLayout {
    TextureConfig texture;
    MotionFeatureConfig motion;
    int joint_count = kDefaultJointCount;

    int channels() const { return texture.feature_dim() + motion.channels(joint_count); }
    json to_json() const;
    static DescriptorLayout from_json(const json& j);
};

struct Renderer {
    DescriptorLayout layout;
    Resolution resolution;
    GeneratorConfig generator_config;
    DiscriminatorConfig discriminator_config;
    Generator generator{nullptr};
    NeuralTexture texture;
    Discriminator discriminator{nullptr};
    std::string data_schema;  // hash of the dataset settings the model was trained on

    /// Throws ConfigError when generator_config.in_channels disagrees with the layout.
    static Renderer create(const DescriptorLayout& layout, Resolution resolution, GeneratorConfig generator_config,
                           const DiscriminatorConfig& discriminator_config, std::uint64_t seed);
    /// Deep copy of all parameters.
    Renderer clone() const;

    std::vector<torch::Tensor> generator_parameters() const;  // G and texture
};

void save_renderer(const std::filesystem::path& path, const Renderer& renderer);
/// With `expected`, throws SchemaMismatch (exit code 4) when the stored layout differs.
Renderer load_renderer(const std::filesystem::path& path, const std::optional<DescriptorLayout>& expected = std::nullopt);

/// Named parameters of the renderer, "generator.*", "texture.level<l>", "discriminator.*".
std::map<std::string, torch::Tensor> named_parameters(const Renderer& renderer);

struct Sample {
    int view = 0;  // camera view_id
    int t = 0;     // frames t-1, t, t+1 are used
};

/// Samples, cached per-(view, frame) renderer inputs and image tensors over a dataset.
/// The dataset must outlive the training set.
class TrainingSet {
public:
    /// `coarse` drives the descriptors (simulated or predicted). Samples cover the dataset's
    /// triplet frames inside [first_frame, last_frame] for every listed view.
    TrainingSet(const Dataset& dataset, MeshSequence coarse, std::vector<int> views, const DescriptorLayout& layout,
                int first_frame = 0, int last_frame = -1);

    const std::vector<Sample>& samples() const { return samples_; }
    void set_samples(std::vector<Sample> samples) { samples_ = std::move(samples); }
    const std::vector<int>& views() const { return views_; }
    const Dataset& dataset() const { return *dataset_; }
    const MeshSequence& coarse() const { return coarse_; }
    Resolution resolution() const { return dataset_->meta.resolution; }

    const FrameInputs& inputs(int view, int t);
    torch::Tensor gt(int view, int t) const;  // [3, H, W]
    torch::Tensor bg(int view, int t) const;

private:
    const Dataset* dataset_;
    MeshSequence coarse_;
    std::vector<int> views_;
    DescriptorLayout layout_;
    std::vector<Sample> samples_;
    std::map<std::pair<int, int>, FrameInputs> cache_;
};

enum class TrainScope {
    kAll,         // generator, texture and discriminator
    kRefinement,  // refinement stage and discriminator only
};

struct TrainConfig {
    int steps = 2000;
    int batch_size = 2;
    double lr_generator = 1e-4;  // also the texture
    double lr_discriminator = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    LossWeights weights;
    TrainScope scope = TrainScope::kAll;
    std::uint64_t seed = 0;
    int eval_every = 0;         // steps between training-set evaluations (0 = never)
    double target_mse = 0.0;    // stop at the first evaluation with mu_mse <= target (0 = off)
    std::filesystem::path log_csv;      // step,L_feat,L_percept,L_GAN,L_D
    std::filesystem::path diagnostics;  // written when a loss turns non-finite

    void validate() const;
};

struct StepLoss {
    int step = 0;
    double feat = 0, percept = 0, gan = 0, d = 0, total = 0;
};

struct TrainReport {
    std::vector<StepLoss> losses;
    std::vector<std::pair<int, double>> eval_curve;  // (steps done, training mu_mse)
    int steps_run = 0;
    double seconds = 0.0;
};

/// Alternating updates: one discriminator step on d_loss, then one generator step on
/// g_total_loss, both with Adam. Throws NumericalError on a non-finite loss.
TrainReport train_renderer(Renderer& renderer, TrainingSet& data, PerceptualExtractor& extractor,
                           const TrainConfig& config);

/// Continues training all parameters of a trained renderer on a new body shape (same coarse
/// template). `config.steps` is the reduced budget.
TrainReport finetune_body_shape(Renderer& renderer, TrainingSet& data, PerceptualExtractor& extractor,
                                const TrainConfig& config);

/// Adapts to a new background from a few examples: only the refinement stage and D change.
TrainReport finetune_background(Renderer& renderer, TrainingSet& examples, PerceptualExtractor& extractor,
                                TrainConfig config);

/// Renders the samples' frames t (with t-1 as the previous frame) in sample order.
std::vector<Image> render_samples(Renderer& renderer, TrainingSet& data, const std::vector<Sample>& samples);
/// Metrics of render_samples against the ground truth.
Metrics evaluate_samples(Renderer& renderer, TrainingSet& data, const std::vector<Sample>& samples);

struct SequenceRender {
    std::vector<Image> rgb;
    std::vector<Image> garment_mask;            // A thresholded at 0.5
    std::vector<std::vector<float>> proxy_depth;  // coarse-proxy depth per pixel, 0 where empty
    std::vector<double> frame_ms;
};

/// Test-time path for one camera over a whole clip: frame 0 uses itself as previous frame.
SequenceRender render_sequence(Renderer& renderer, const MeshSequence& coarse, const MotionClip& clip,
                               const Camera& camera, std::span<const Image> backgrounds);

torch::Tensor image_tensor(const Image& image);  // [C, H, W]

}  // namespace dng
