#pragma once

// Conditional models of the dynamics residual d_k given the recent
// (state, command) history. The safety filter needs only the first two
// moments; the simulator also draws samples.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shield/random.hpp"
#include "shield/rom.hpp"

namespace shield {

struct DisturbanceMoments {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();

    Disturbance mean_disturbance() const { return Disturbance::from_vec(mean); }
};

/// Moments must be a deterministic function of the window.
class DisturbanceModel {
public:
    virtual ~DisturbanceModel() = default;
    virtual DisturbanceMoments moments(const HistoryWindow& window) const = 0;
    virtual Disturbance sample(const HistoryWindow& window, Rng& rng) const = 0;
};

/// Throws InvalidArgument unless `m` is symmetric (1e-9) with eigenvalues >= -1e-9.
void check_psd(const Eigen::Matrix3d& m, const char* what);
/// Symmetric square root factor F with F F^T = m (negative round-off eigenvalues zeroed).
Eigen::Matrix3d psd_factor(const Eigen::Matrix3d& m);

class GaussianModel final : public DisturbanceModel {
public:
    GaussianModel(const Eigen::Vector3d& mean, const Eigen::Matrix3d& cov);
    static GaussianModel zero() { return {Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero()}; }

    DisturbanceMoments moments(const HistoryWindow&) const override { return {mean_, cov_}; }
    Disturbance sample(const HistoryWindow&, Rng& rng) const override;

private:
    Eigen::Vector3d mean_;
    Eigen::Matrix3d cov_;
    Eigen::Matrix3d factor_;
};

/// Multivariate Student-t with norm-clipped tails. `dof` may be +inf
/// (Gaussian limit) and `clip_radius` may be +inf (no clipping).
class StudentTModel final : public DisturbanceModel {
public:
    StudentTModel(double dof, const Eigen::Matrix3d& scale, double clip_radius,
                  const Eigen::Vector3d& offset = Eigen::Vector3d::Zero());

    /// For dof > 2: mean = offset, cov = dof/(dof-2) * scale. This is an upper
    /// bound on the clipped covariance. Otherwise a fixed-seed sample estimate.
    DisturbanceMoments moments(const HistoryWindow& window) const override;
    Disturbance sample(const HistoryWindow&, Rng& rng) const override;

    double dof() const { return dof_; }
    double clip_radius() const { return clip_radius_; }
    const Eigen::Matrix3d& scale() const { return scale_; }

private:
    double dof_;
    Eigen::Matrix3d scale_;
    Eigen::Matrix3d factor_;
    double clip_radius_;
    Eigen::Vector3d offset_;
};

/// One zero-mean clipped Student-t draw (offset not applied).
Disturbance student_t_sample(double dof, const Eigen::Matrix3d& scale, double clip_radius, Rng& rng);

/// Replays recorded residuals; its moments are the sample moments of the set.
class ReplayModel final : public DisturbanceModel {
public:
    explicit ReplayModel(std::vector<Disturbance> residuals);

    DisturbanceMoments moments(const HistoryWindow&) const override { return moments_; }
    Disturbance sample(const HistoryWindow&, Rng& rng) const override;
    const std::vector<Disturbance>& residuals() const { return residuals_; }

private:
    std::vector<Disturbance> residuals_;
    DisturbanceMoments moments_;
};

/// d_k = (x_{k+1} - x_k)/dt - u_k with the yaw increment wrapped to (-pi, pi].
std::vector<Disturbance> extract_residuals(const std::vector<RomState>& states,
                                           const std::vector<Command>& commands, double dt);

/// Sample mean and unbiased covariance of M draws from `model`, using an
/// RNG seeded with `seed`.
DisturbanceMoments moments_by_sampling(const DisturbanceModel& model, const HistoryWindow& window,
                                       std::size_t M, std::uint64_t seed);

// --- generative decoder -----------------------------------------------------

inline constexpr const char* kWeightFormatVersion = "shield-cvae-1";
/// Raw context features per history slot: px, py, theta, vx, vy, omega.
inline constexpr std::size_t kFeaturesPerSlot = 6;

enum class Activation { Relu, Linear };

struct DenseLayer {
    Eigen::MatrixXd weights;  ///< rows = outputs, cols = inputs
    Eigen::VectorXd bias;
    Activation activation = Activation::Linear;
};

struct Normalization {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
};

struct DecoderWeights {
    std::size_t context_len = 4;
    std::size_t latent_dim = 4;
    Normalization input;   ///< 6 * context_len entries
    Normalization output;  ///< 3 entries
    std::vector<DenseLayer> layers;

    std::size_t context_dim() const { return kFeaturesPerSlot * context_len; }
    std::size_t input_dim() const { return context_dim() + latent_dim; }
    /// Throws ShapeError (naming the offending layer) on any inconsistency.
    void validate() const;
};

/// Raw (un-normalized) context vector: oldest slot first. Short windows are
/// left-padded with the oldest available pair; an empty window is all zeros.
Eigen::VectorXd context_features(const HistoryWindow& window, std::size_t context_len);

/// Decoder forward pass: [normalized context, z] -> layers -> denormalized d.
Disturbance decoder_infer(const DecoderWeights& w, const HistoryWindow& window, const Eigen::VectorXd& z);

DecoderWeights load_weights(const std::filesystem::path& path);
DecoderWeights parse_weights(const std::string& text);
std::string serialize_weights(const DecoderWeights& w);
void save_weights(const DecoderWeights& w, const std::filesystem::path& path);

class DecoderModel final : public DisturbanceModel {
public:
    static constexpr std::size_t kDefaultSamples = 256;

    explicit DecoderModel(DecoderWeights weights, std::size_t samples = kDefaultSamples,
                          std::uint64_t base_seed = 0);

    /// moments_by_sampling with the seed derived from (base seed, window.pushed()).
    DisturbanceMoments moments(const HistoryWindow& window) const override;
    Disturbance sample(const HistoryWindow& window, Rng& rng) const override;
    const DecoderWeights& weights() const { return weights_; }

private:
    DecoderWeights weights_;
    std::size_t samples_;
    std::uint64_t base_seed_;
};

}  // namespace shield
