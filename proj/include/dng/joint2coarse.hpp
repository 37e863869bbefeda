#pragma once

// Joint2Coarse: an autoencoder over coarse-garment vertex arrays and a motion encoder that
// maps motion descriptors into its latent space, V^c_t = decode(motion_encode(descriptor_t)).

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "dng/domain.hpp"

namespace dng {

using json = nlohmann::json;

/// Fully connected stack. Hidden layers use ReLU and dropout; the output layer is linear.
class MlpImpl : public torch::nn::Module {
public:
    MlpImpl(std::vector<int> widths, double dropout);
    torch::Tensor forward(torch::Tensor x);

    const std::vector<int>& widths() const { return widths_; }

private:
    std::vector<int> widths_;
    double dropout_;
    torch::nn::ModuleList layers_;
};
TORCH_MODULE(Mlp);

struct CodecConfig {
    std::vector<int> hidden{2048, 1024, 512, 256, 128};
    int latent = 64;
    double dropout = 0.05;
};

struct MotionEncoderConfig {
    std::vector<int> hidden{512, 256, 128};
    int latent = 64;
    double dropout = 0.0;
};

class ShapeCodecImpl : public torch::nn::Module {
public:
    ShapeCodecImpl(int vertex_count, const CodecConfig& config = {});

    torch::Tensor encode(torch::Tensor x);   // [B, V*3] -> [B, latent]
    torch::Tensor decode(torch::Tensor z);   // [B, latent] -> [B, V*3]
    torch::Tensor forward(torch::Tensor x) { return decode(encode(x)); }

    int vertex_count() const { return vertex_count_; }
    const CodecConfig& config() const { return config_; }

private:
    int vertex_count_;
    CodecConfig config_;
    Mlp encoder_{nullptr};
    Mlp decoder_{nullptr};
};
TORCH_MODULE(ShapeCodec);

class MotionEncoderImpl : public torch::nn::Module {
public:
    MotionEncoderImpl(int input_dim, const MotionEncoderConfig& config = {});
    torch::Tensor forward(torch::Tensor x);

    int input_dim() const { return input_dim_; }
    const MotionEncoderConfig& config() const { return config_; }

private:
    int input_dim_;
    MotionEncoderConfig config_;
    Mlp mlp_{nullptr};
};
TORCH_MODULE(MotionEncoder);

/// Maps world vertices of frame t to (v - root_t) / scale and back.
struct CoarseNormalizer {
    float scale = 1.0f;

    static CoarseNormalizer from_rest(const TriMesh& rest);  // scale = rest bbox diagonal
    std::vector<float> normalize(std::span<const Vec3> vertices, const Vec3& root) const;
    std::vector<Vec3> denormalize(std::span<const float> values, const Vec3& root) const;
};

/// Evaluation-mode wrappers. Throw SchemaMismatch on size mismatches.
std::vector<float> encode_shape(ShapeCodec& codec, std::span<const float> normalized_vertices);
std::vector<float> decode_shape(ShapeCodec& codec, std::span<const float> latent);
std::vector<float> encode_motion(MotionEncoder& encoder, const MotionDescriptor& descriptor);

struct CoarseModel {
    ShapeCodec codec{nullptr};
    MotionEncoder motion{nullptr};
    CoarseNormalizer normalizer;
    DescriptorWindow window;
    int joint_count = kDefaultJointCount;
    TriMesh topology;  // rest mesh of the coarse proxy

    json descriptor_json() const;
};

std::vector<Vec3> predict_coarse(CoarseModel& model, const MotionDescriptor& descriptor, const Vec3& root);
/// Coarse proxy for every frame of `clip`, history clamped at frame 0.
MeshSequence predict_coarse_sequence(CoarseModel& model, const MotionClip& clip);

struct FitConfig {
    int epochs = 500;
    double lr = 1e-3;
    int batch_size = 10;
    std::uint64_t seed = 0;
};

struct FitReport {
    std::vector<double> epoch_loss;  // mean training loss per epoch (training mode)
    std::vector<double> eval_loss;   // evaluation-mode loss over the whole set after each epoch
    int best_epoch = 0;
};

/// Minimizes mean squared reconstruction error with RMSprop and restores the best epoch.
/// `frames` is [T, V*3] in normalized coordinates. Throws NumericalError on a non-finite loss.
FitReport train_codec(ShapeCodec& codec, const torch::Tensor& frames, const FitConfig& config);

/// Fits motion_encoder(descriptors) to codec.encode(frames) with the codec frozen.
FitReport train_motion_encoder(MotionEncoder& encoder, ShapeCodec& codec, const torch::Tensor& descriptors,
                               const torch::Tensor& frames, const FitConfig& config);

struct CoarseTrainingData {
    torch::Tensor frames;       // [T, V*3] normalized
    torch::Tensor descriptors;  // [T, count*J*3]
};

CoarseTrainingData coarse_training_data(const MeshSequence& coarse, const MotionClip& clip,
                                        const CoarseNormalizer& normalizer, const DescriptorWindow& window);

struct CoarseTrainResult {
    CoarseModel model;
    FitReport codec_report;
    FitReport motion_report;
};

CoarseTrainResult train_coarse(const MeshSequence& coarse, const MotionClip& clip, const DescriptorWindow& window,
                               const CodecConfig& codec_config, const MotionEncoderConfig& motion_config,
                               const FitConfig& codec_fit, const FitConfig& motion_fit);

/// sqrt(mean over vertices of |a - b|^2).
double vertex_rmse(std::span<const Vec3> a, std::span<const Vec3> b);
double bbox_diagonal(std::span<const Vec3> vertices);

void save_coarse_model(const std::filesystem::path& path, const CoarseModel& model);
/// Throws SchemaMismatch (exit code 4) when `expected_window`/`expected_joints` differ from
/// the stored descriptor layout.
CoarseModel load_coarse_model(const std::filesystem::path& path, const DescriptorWindow& expected_window,
                              int expected_joints);
CoarseModel load_coarse_model(const std::filesystem::path& path);

}  // namespace dng
