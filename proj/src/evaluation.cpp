#include "dng/evaluation.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace dng {

json Metrics::to_json() const {
    json j{{"mu_mse", mu_mse}, {"sigma_mse", sigma_mse}, {"per_frame_mse", per_frame_mse},
           {"mse_convention", "mean over H x W x 3 per frame, pixel values in [0,1]"}};
    j["fid"] = fid ? json(*fid) : json(nullptr);
    j["vfid"] = vfid ? json(*vfid) : json(nullptr);
    return j;
}

double frame_mse(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw SchemaMismatch("frame_mse: image shapes differ");
    if (a.pixels.empty()) throw SchemaMismatch("frame_mse: empty image");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.pixels.size());
}

namespace {

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
}

}  // namespace

Metrics evaluate(std::span<const Image> pred, std::span<const Image> gt, const EvalOptions& options) {
    if (pred.size() != gt.size()) {
        throw SchemaMismatch("evaluate: " + std::to_string(pred.size()) + " predicted vs " + std::to_string(gt.size()) +
                             " ground-truth frames");
    }
    if (pred.empty()) throw SchemaMismatch("evaluate: empty sequences");
    Metrics m;
    for (std::size_t i = 0; i < pred.size(); ++i) m.per_frame_mse.push_back(frame_mse(pred[i], gt[i]));
    const double n = static_cast<double>(m.per_frame_mse.size());
    for (double v : m.per_frame_mse) m.mu_mse += v;
    m.mu_mse /= n;
    for (double v : m.per_frame_mse) m.sigma_mse += (v - m.mu_mse) * (v - m.mu_mse);
    m.sigma_mse = std::sqrt(m.sigma_mse / n);

    if (options.embedder) {
        auto& e = *options.embedder;
        std::vector<Eigen::VectorXd> ep, eg;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            ep.push_back(e.embed_frame(pred[i]));
            eg.push_back(e.embed_frame(gt[i]));
        }
        m.fid = frechet_distance(stack_rows(ep), stack_rows(eg));
        const auto len = static_cast<std::size_t>(e.clip_length());
        if (len >= 1 && pred.size() >= len) {
            std::vector<Eigen::VectorXd> cp, cg;
            for (std::size_t s = 0; s + len <= pred.size(); ++s) {
                cp.push_back(e.embed_clip(pred.subspan(s, len)));
                cg.push_back(e.embed_clip(gt.subspan(s, len)));
            }
            m.vfid = frechet_distance(stack_rows(cp), stack_rows(cg));
        }
    }
    return m;
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols() || a.rows() < 1 || b.rows() < 1) throw SchemaMismatch("frechet_distance: bad sample sets");
    const Eigen::VectorXd mu_a = a.colwise().mean(), mu_b = b.colwise().mean();
    const Eigen::MatrixXd ca = a.rowwise() - mu_a.transpose(), cb = b.rowwise() - mu_b.transpose();
    const Eigen::MatrixXd sa = ca.transpose() * ca / std::max<Eigen::Index>(1, a.rows() - 1);
    const Eigen::MatrixXd sb = cb.transpose() * cb / std::max<Eigen::Index>(1, b.rows() - 1);

    // tr(sqrt(sa sb)) = tr(sqrt(sqrt(sa) sb sqrt(sa))), the inner matrix being symmetric PSD
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(sa);
    const Eigen::MatrixXd root_a =
        ea.eigenvectors() * ea.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(root_a * sb * root_a);
    const double tr_cross = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_cross;
}

}  // namespace dng
