#pragma once

// K-step exit-probability bound from Freedman's inequality.
//
// With a = alpha^K h0, s = sigma^2 K and lambda = a delta + s:
//
//   P_exit <= exp(a / delta) * (s / lambda)^(lambda / delta^2)
//
// The exponents run to several hundred in magnitude for typical parameters,
// so everything is evaluated in log space.

#include <cstddef>
#include <vector>

#include "shield/barrier.hpp"

namespace shield {

/// Alpha is searched in [kAlphaEps, 1 - kAlphaEps].
inline constexpr double kAlphaEps = 1e-6;

struct RiskBudget {
    double P = 0.01;     ///< target K-step exit probability
    int K = 10;          ///< steps per interval
    double delta = 1.0;  ///< bound on E[h_k | F_{k-1}] - h_k
    double sigma = 0.0;  ///< std bound on h(x_{k+1}); <= 0 means derive from the model covariance
    double alpha = 0.99; ///< initial decay rate

    void validate() const;
};

/// Natural log of the raw bound, which may be positive for extreme parameters.
double freedman_log_bound(double alpha, int K, double h0, double delta, double sigma);

/// Bound clamped to (0, 1]. Throws AlreadyUnsafe for h0 < 0 and
/// InvalidArgument for parameters outside their ranges.
double freedman_bound(double alpha, int K, double h0, double delta, double sigma);

struct AlphaSolution {
    double alpha = 1.0 - kAlphaEps;
    double bound = 1.0;
    bool monotone = true;  ///< false when the grid fallback was used
};

/// Decay rate alpha whose exit bound equals P (relative tolerance 1e-6).
/// Returns kAlphaEps if even that alpha already meets P. Throws InfeasibleRisk
/// if no alpha in the search range gets the bound down to P.
AlphaSolution solve_alpha_detailed(double P, int K, double h0, double delta, double sigma);
inline double solve_alpha(double P, int K, double h0, double delta, double sigma) {
    return solve_alpha_detailed(P, K, h0, delta, sigma).alpha;
}

/// 2 * gamma * lambda * max_step: twice the barrier's Lipschitz constant
/// times the largest per-step displacement.
double estimate_delta(double max_step, const BarrierConfig& config);

/// Union bound over consecutive K-step intervals.
class SafetyLedger {
public:
    void accumulate(double interval_bound);
    void record_violation() { ++violations_; }

    double total() const { return total_; }
    std::size_t intervals() const { return bounds_.size(); }
    std::size_t violations() const { return violations_; }
    const std::vector<double>& interval_bounds() const { return bounds_; }

private:
    std::vector<double> bounds_;
    double total_ = 0.0;
    std::size_t violations_ = 0;
};

SafetyLedger ledger_accumulate(SafetyLedger ledger, double interval_bound);

}  // namespace shield
