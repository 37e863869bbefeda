#pragma once

// Frame-sequence metrics: per-frame MSE statistics and optional embedding distances.

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dng/domain.hpp"

namespace dng {

using json = nlohmann::json;

/// Maps an image (FID) or a clip of consecutive images (V-FID) to a feature vector.
class FrameEmbedder {
public:
    virtual ~FrameEmbedder() = default;
    virtual Eigen::VectorXd embed_frame(const Image& frame) = 0;
    virtual Eigen::VectorXd embed_clip(std::span<const Image> clip) = 0;
    virtual int clip_length() const { return 8; }
};

struct EvalOptions {
    FrameEmbedder* embedder = nullptr;  // FID / V-FID stay empty without one
};

struct Metrics {
    double mu_mse = 0.0;     // mean over frames of the per-frame MSE (mean over H x W x 3)
    double sigma_mse = 0.0;  // population std over frames
    std::vector<double> per_frame_mse;
    std::optional<double> fid;
    std::optional<double> vfid;

    json to_json() const;
};

/// Mean over all pixels and channels of (a - b)^2. Throws SchemaMismatch on shape mismatch.
double frame_mse(const Image& a, const Image& b);

/// Throws SchemaMismatch when the sequences differ in length or frame shape.
Metrics evaluate(std::span<const Image> pred, std::span<const Image> gt, const EvalOptions& options = {});

/// Frechet distance between Gaussians fitted to two sets of row-vector samples.
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace dng
