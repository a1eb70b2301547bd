#include "shield/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "shield/errors.hpp"

namespace shield {

namespace {

void check_params(double alpha, int K, double delta, double sigma) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("freedman_bound: alpha must lie in (0, 1)");
    if (K < 1) throw InvalidArgument("freedman_bound: K must be >= 1");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidArgument("freedman_bound: delta must be positive");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("freedman_bound: sigma must be positive");
}

constexpr int kMonotoneGrid = 64;
constexpr int kFallbackGrid = 10000;

}  // namespace

void RiskBudget::validate() const {
    if (!(P > 0.0 && P < 1.0)) throw InvalidArgument("risk: P must lie in (0, 1)");
    if (K < 1) throw InvalidArgument("risk: K must be >= 1");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidArgument("risk: delta must be positive");
    if (!std::isfinite(sigma)) throw InvalidArgument("risk: sigma must be finite");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("risk: alpha must lie in (0, 1)");
}

double freedman_log_bound(double alpha, int K, double h0, double delta, double sigma) {
    check_params(alpha, K, delta, sigma);
    if (h0 < 0.0) throw AlreadyUnsafe("freedman_bound: h0 < 0");
    if (!std::isfinite(h0)) throw InvalidArgument("freedman_bound: h0 must be finite");
    const double a = std::pow(alpha, K) * h0;
    const double s = sigma * sigma * K;
    const double lam = a * delta + s;
    // ln(s / lam) = -log1p(a delta / s)
    return a / delta - (lam / (delta * delta)) * std::log1p(a * delta / s);
}

double freedman_bound(double alpha, int K, double h0, double delta, double sigma) {
    const double lb = freedman_log_bound(alpha, K, h0, delta, sigma);
    if (lb >= 0.0) return 1.0;
    // exp underflows below about -745; keep the result a positive probability
    return std::max(std::exp(lb), std::numeric_limits<double>::denorm_min());
}

AlphaSolution solve_alpha_detailed(double P, int K, double h0, double delta, double sigma) {
    if (!(P > 0.0 && P < 1.0)) throw InvalidArgument("solve_alpha: P must lie in (0, 1)");
    const double log_p = std::log(P);
    const double lo_alpha = kAlphaEps;
    const double hi_alpha = 1.0 - kAlphaEps;
    auto log_bound = [&](double a) { return std::min(0.0, freedman_log_bound(a, K, h0, delta, sigma)); };

    AlphaSolution out;
    const double at_hi = log_bound(hi_alpha);
    if (at_hi > log_p)
        throw InfeasibleRisk("solve_alpha: bound at alpha = 1 - eps is " + std::to_string(std::exp(at_hi)) +
                             " > P = " + std::to_string(P));
    const double at_lo = log_bound(lo_alpha);
    if (at_lo <= log_p) {
        out.alpha = lo_alpha;
        out.bound = std::exp(at_lo);
        return out;
    }

    double prev = at_lo;
    for (int i = 1; i <= kMonotoneGrid; ++i) {
        const double a = lo_alpha + (hi_alpha - lo_alpha) * i / kMonotoneGrid;
        const double v = log_bound(a);
        if (v > prev + 1e-12 * (1.0 + std::abs(prev))) {
            out.monotone = false;
            break;
        }
        prev = v;
    }

    if (!out.monotone) {
        for (int i = 0; i <= kFallbackGrid; ++i) {
            const double a = lo_alpha + (hi_alpha - lo_alpha) * i / kFallbackGrid;
            const double v = log_bound(a);
            if (v <= log_p) {
                out.alpha = a;
                out.bound = std::exp(v);
                return out;
            }
        }
        // at_hi <= log_p guarantees the last grid point qualifies
        out.alpha = hi_alpha;
        out.bound = std::exp(at_hi);
        return out;
    }

    // invariant: log_bound(lo) > log_p >= log_bound(hi)
    double lo = lo_alpha;
    double hi = hi_alpha;
    double v_hi = at_hi;
    // |b/P - 1| <= 1e-6 holds when the log gap is below ~1e-6
    constexpr double kLogTol = 9.9e-7;
    for (int it = 0; it < 200; ++it) {
        if (log_p - v_hi <= kLogTol) break;
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double v = log_bound(mid);
        if (v > log_p) {
            lo = mid;
        } else {
            hi = mid;
            v_hi = v;
        }
    }
    out.alpha = hi;
    out.bound = std::exp(v_hi);
    return out;
}

double estimate_delta(double max_step, const BarrierConfig& config) {
    if (max_step < 0.0 || !std::isfinite(max_step)) throw InvalidArgument("estimate_delta: max_step must be >= 0");
    return 2.0 * config.gamma * config.lambda * max_step;
}

void SafetyLedger::accumulate(double interval_bound) {
    if (!(interval_bound > 0.0 && interval_bound <= 1.0))
        throw InvalidArgument("ledger: interval bound must lie in (0, 1]");
    bounds_.push_back(interval_bound);
    total_ += interval_bound;
}

SafetyLedger ledger_accumulate(SafetyLedger ledger, double interval_bound) {
    ledger.accumulate(interval_bound);
    return ledger;
}

}  // namespace shield
