#pragma once

// End-to-end orchestration behind the command line: one JSON config drives data
// generation, the two training stages, rendering, fine-tuning and evaluation.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dng/cloth_sim.hpp"
#include "dng/dataset_io.hpp"
#include "dng/evaluation.hpp"
#include "dng/joint2coarse.hpp"
#include "dng/losses.hpp"
#include "dng/training.hpp"

namespace dng {

using json = nlohmann::json;

struct DataGenConfig {
    int frames = 50;
    double fps = 30.0;
    std::string motion_style = "sway";
    std::string garment = "long_skirt";         // target garment
    std::string coarse_garment = "long_skirt";  // proxy template
    float target_spacing = 0.03f;
    float coarse_spacing = 0.09f;
    int views = 3;
    Vec3 camera_target{0.0f, 0.72f, 0.0f};
    float camera_radius = 2.4f;
    float camera_elevation = 0.2f;
    float camera_fov = 0.62f;  // vertical, radians
    float body_girth = 1.0f;
    Palette palette;
    SimParams sim;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    Resolution resolution{128, 128};
    DataGenConfig data;

    DescriptorWindow window;
    MotionFeatureConfig motion;
    TextureConfig texture;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;

    CodecConfig codec;
    MotionEncoderConfig motion_encoder;
    FitConfig codec_fit;
    FitConfig motion_fit;

    TrainConfig train;
    int train_views = 0;  // first N dataset views; 0 = all

    double body_finetune_fraction = 0.25;
    int background_iterations = 100;
    int background_examples = 2;

    std::string perceptual = "random";  // or "scripted"
    std::filesystem::path perceptual_path;
    std::uint64_t perceptual_seed = 7;

    bool relayer = false;

    DescriptorLayout layout() const;
    /// Generator config with in_channels matching the descriptor layout.
    GeneratorConfig generator_config() const;
    /// Throws ConfigError on inconsistent values.
    void validate() const;
};

/// Unknown keys and wrong types are ConfigErrors.
PipelineConfig config_from_json(const json& j);
json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

std::unique_ptr<PerceptualExtractor> make_extractor(const PipelineConfig& config);

/// Simulates target and coarse garments on one procedural clip and renders every view.
Dataset generate_dataset(const PipelineConfig& config);

/// Dataset views used for training under `config.train_views`.
std::vector<int> training_views(const PipelineConfig& config, const Dataset& dataset);

// Commands. Each writes its outputs under `out` and is rerunnable with identical results
// for identical config and seed.
void cmd_gen_data(const PipelineConfig& config, const std::filesystem::path& out);
CoarseTrainResult cmd_train_coarse(const PipelineConfig& config, const std::filesystem::path& data,
                                   const std::filesystem::path& out);
TrainReport cmd_train_render(const PipelineConfig& config, const std::filesystem::path& data,
                             const std::optional<std::filesystem::path>& coarse, const std::filesystem::path& out);

struct RenderRequest {
    std::filesystem::path renderer;
    std::filesystem::path coarse;
    std::filesystem::path motion;  // clip JSON, or a dataset directory (its clip is used)
    std::filesystem::path camera;  // camera JSON
    std::filesystem::path out;
    bool relayer = false;
};

SequenceRender cmd_render(const PipelineConfig& config, const RenderRequest& request);
/// Matches <pred>/<pred_prefix>_<t>.png with <gt>/<gt_prefix>_<t>.png and writes metrics.json.
Metrics cmd_evaluate(const std::filesystem::path& pred, const std::filesystem::path& gt,
                     const std::filesystem::path& out, const std::string& pred_prefix = "frame",
                     const std::string& gt_prefix = "gt");
TrainReport cmd_finetune_body(const PipelineConfig& config, const std::filesystem::path& base,
                              const std::filesystem::path& data, const std::optional<std::filesystem::path>& coarse,
                              const std::filesystem::path& out);
TrainReport cmd_finetune_background(const PipelineConfig& config, const std::filesystem::path& base,
                                    const std::filesystem::path& data,
                                    const std::optional<std::filesystem::path>& coarse,
                                    const std::filesystem::path& out);

/// Evenly spaced samples of a training set, used as the few background examples.
std::vector<Sample> pick_examples(const std::vector<Sample>& samples, int count);

}  // namespace dng
