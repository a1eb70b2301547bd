#include "shield/disturbance.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "shield/errors.hpp"

namespace shield {

void check_psd(const Eigen::Matrix3d& m, const char* what) {
    if (!m.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite matrix");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw InvalidArgument(std::string(what) + ": matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
    if (es.eigenvalues().minCoeff() < -1e-9)
        throw InvalidArgument(std::string(what) + ": matrix is not positive semi-definite");
}

Eigen::Matrix3d psd_factor(const Eigen::Matrix3d& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (m + m.transpose()));
    const Eigen::Vector3d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

Eigen::Vector3d standard_normal3(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::Vector3d z;
    for (int i = 0; i < 3; ++i) z[i] = n(rng);
    return z;
}

Eigen::Vector3d student_t_draw(double dof, const Eigen::Matrix3d& factor, double clip_radius, Rng& rng) {
    Eigen::Vector3d v = factor * standard_normal3(rng);
    if (std::isfinite(dof)) {
        std::chi_squared_distribution<double> chi(dof);
        const double w = chi(rng);
        v /= std::sqrt(w / dof);
    }
    const double n = v.norm();
    if (n > clip_radius) v *= clip_radius / n;
    return v;
}

void check_student_t(double dof, double clip_radius) {
    if (!(dof > 0.0)) throw InvalidArgument("student_t: dof must be positive");
    if (!(clip_radius > 0.0)) throw InvalidArgument("student_t: clip radius must be positive");
}

constexpr std::size_t kHeavyTailSamples = 4096;
constexpr std::uint64_t kHeavyTailSeed = 0x5eedULL;

}  // namespace

GaussianModel::GaussianModel(const Eigen::Vector3d& mean, const Eigen::Matrix3d& cov)
    : mean_(mean), cov_(cov) {
    if (!mean.allFinite()) throw InvalidArgument("gaussian model: non-finite mean");
    check_psd(cov, "gaussian model");
    factor_ = psd_factor(cov);
}

Disturbance GaussianModel::sample(const HistoryWindow&, Rng& rng) const {
    return Disturbance::from_vec(mean_ + factor_ * standard_normal3(rng));
}

Disturbance student_t_sample(double dof, const Eigen::Matrix3d& scale, double clip_radius, Rng& rng) {
    check_student_t(dof, clip_radius);
    check_psd(scale, "student_t_sample");
    return Disturbance::from_vec(student_t_draw(dof, psd_factor(scale), clip_radius, rng));
}

StudentTModel::StudentTModel(double dof, const Eigen::Matrix3d& scale, double clip_radius,
                             const Eigen::Vector3d& offset)
    : dof_(dof), scale_(scale), clip_radius_(clip_radius), offset_(offset) {
    check_student_t(dof, clip_radius);
    check_psd(scale, "student_t model");
    if (!offset.allFinite()) throw InvalidArgument("student_t model: non-finite offset");
    factor_ = psd_factor(scale);
}

DisturbanceMoments StudentTModel::moments(const HistoryWindow& window) const {
    if (dof_ > 2.0) {
        const double inflation = std::isfinite(dof_) ? dof_ / (dof_ - 2.0) : 1.0;
        return {offset_, inflation * scale_};
    }
    return moments_by_sampling(*this, window, kHeavyTailSamples, kHeavyTailSeed);
}

Disturbance StudentTModel::sample(const HistoryWindow&, Rng& rng) const {
    return Disturbance::from_vec(offset_ + student_t_draw(dof_, factor_, clip_radius_, rng));
}

ReplayModel::ReplayModel(std::vector<Disturbance> residuals) : residuals_(std::move(residuals)) {
    if (residuals_.empty()) throw InvalidArgument("replay model: no residuals");
    const auto n = static_cast<double>(residuals_.size());
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& d : residuals_) mean += d.vec();
    mean /= n;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    if (residuals_.size() > 1) {
        for (const auto& d : residuals_) {
            const Eigen::Vector3d c = d.vec() - mean;
            cov += c * c.transpose();
        }
        cov /= (n - 1.0);
    }
    moments_ = {mean, cov};
}

Disturbance ReplayModel::sample(const HistoryWindow&, Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, residuals_.size() - 1);
    return residuals_[pick(rng)];
}

std::vector<Disturbance> extract_residuals(const std::vector<RomState>& states,
                                           const std::vector<Command>& commands, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("extract_residuals: dt must be positive");
    if (states.size() != commands.size()) throw InvalidArgument("extract_residuals: length mismatch");
    std::vector<Disturbance> out;
    if (states.size() < 2) return out;
    out.reserve(states.size() - 1);
    for (std::size_t k = 0; k + 1 < states.size(); ++k) {
        double dyaw = std::remainder(states[k + 1].theta - states[k].theta, kTwoPi);
        if (dyaw <= -kTwoPi / 2) dyaw += kTwoPi;
        out.push_back({(states[k + 1].px - states[k].px) / dt - commands[k].vx,
                       (states[k + 1].py - states[k].py) / dt - commands[k].vy,
                       dyaw / dt - commands[k].omega});
    }
    return out;
}

DisturbanceMoments moments_by_sampling(const DisturbanceModel& model, const HistoryWindow& window,
                                       std::size_t M, std::uint64_t seed) {
    if (M < 2) throw InvalidArgument("moments_by_sampling: need at least 2 samples");
    Rng rng(seed);
    std::vector<Eigen::Vector3d> draws;
    draws.reserve(M);
    for (std::size_t i = 0; i < M; ++i) draws.push_back(model.sample(window, rng).vec());
    // shifted by the first draw so a constant model gives exactly zero spread
    const Eigen::Vector3d shift = draws.front();
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
    for (const auto& d : draws) offset += d - shift;
    offset /= static_cast<double>(M);
    const Eigen::Vector3d mean = shift + offset;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& d : draws) {
        const Eigen::Vector3d c = (d - shift) - offset;
        cov += c * c.transpose();
    }
    cov /= static_cast<double>(M - 1);
    cov = 0.5 * (cov + cov.transpose());
    return {mean, cov};
}

Eigen::VectorXd context_features(const HistoryWindow& window, std::size_t context_len) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kFeaturesPerSlot * context_len));
    if (window.empty()) return f;
    const auto& xs = window.states();
    const auto& us = window.commands();
    const std::size_t have = std::min(xs.size(), context_len);
    const std::size_t first = xs.size() - have;
    for (std::size_t slot = 0; slot < context_len; ++slot) {
        // slots before the available data repeat the oldest pair
        const std::size_t pad = context_len - have;
        const std::size_t src = first + (slot < pad ? 0 : slot - pad);
        const auto base = static_cast<Eigen::Index>(slot * kFeaturesPerSlot);
        f.segment<3>(base) = xs[src].vec();
        f.segment<3>(base + 3) = us[src].vec();
    }
    return f;
}

Disturbance decoder_infer(const DecoderWeights& w, const HistoryWindow& window, const Eigen::VectorXd& z) {
    if (static_cast<std::size_t>(z.size()) != w.latent_dim)
        throw ShapeError("decoder_infer: latent vector has " + std::to_string(z.size()) + " entries, expected " +
                         std::to_string(w.latent_dim));
    if (w.layers.empty()) throw ShapeError("decoder_infer: no layers");
    const Eigen::VectorXd ctx = context_features(window, w.context_len);
    Eigen::VectorXd a(static_cast<Eigen::Index>(w.input_dim()));
    a.head(ctx.size()) = (ctx - w.input.mean).cwiseQuotient(w.input.scale);
    a.tail(z.size()) = z;
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        const auto& L = w.layers[i];
        if (L.weights.cols() != a.size())
            throw ShapeError("decoder_infer: layer " + std::to_string(i) + " expects " +
                             std::to_string(L.weights.cols()) + " inputs, got " + std::to_string(a.size()));
        Eigen::VectorXd next = L.weights * a + L.bias;
        if (L.activation == Activation::Relu) next = next.cwiseMax(0.0);
        a = std::move(next);
    }
    if (a.size() != 3) throw ShapeError("decoder_infer: output dimension is not 3");
    const Eigen::Vector3d out = a.cwiseProduct(w.output.scale) + w.output.mean;
    return Disturbance::from_vec(out);
}

DecoderModel::DecoderModel(DecoderWeights weights, std::size_t samples, std::uint64_t base_seed)
    : weights_(std::move(weights)), samples_(samples), base_seed_(base_seed) {
    weights_.validate();
    if (samples_ < 2) throw InvalidArgument("decoder model: need at least 2 samples");
}

DisturbanceMoments DecoderModel::moments(const HistoryWindow& window) const {
    return moments_by_sampling(*this, window, samples_, derive_seed(base_seed_, {window.pushed()}));
}

Disturbance DecoderModel::sample(const HistoryWindow& window, Rng& rng) const {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(weights_.latent_dim));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = n(rng);
    return decoder_infer(weights_, window, z);
}

}  // namespace shield
