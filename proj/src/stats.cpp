#include "shield/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "shield/errors.hpp"

namespace shield {

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double standard_error(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    const auto n = static_cast<double>(xs.size());
    return std::sqrt(ss / (n - 1.0) / n);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double wilcoxon_decrease_pvalue(std::span<const double> before, std::span<const double> after) {
    if (before.size() != after.size()) throw InvalidArgument("wilcoxon: samples must be paired");
    std::vector<double> d;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const double diff = after[i] - before[i];
        if (diff != 0.0) d.push_back(diff);
    }
    const std::size_t n = d.size();
    if (n == 0) return 1.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<double> rank(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        const auto t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0.0) w_plus += rank[i];

    const auto nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return w_plus < mu ? 0.0 : 1.0;
    // small W+ is evidence of a decrease
    const double z = (w_plus - mu + 0.5) / std::sqrt(var);
    return normal_cdf(z);
}

}  // namespace shield
