#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "tshift/core/error.hpp"

namespace tshift {

/// 1-based ranks; tied values share their average rank.
inline std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

struct Correlation {
    double rho = 0;
    double p_value = 1;
};

enum class PValueMethod { t_approximation, exact_permutation };

/// Spearman rank correlation with a two-sided p-value. The exact permutation
/// test enumerates all n! orderings and is limited to n <= 12.
inline Correlation spearman(std::span<const double> xs, std::span<const double> ys,
                            PValueMethod method = PValueMethod::t_approximation) {
    if (xs.size() != ys.size()) throw DataError("spearman: series lengths differ");
    if (xs.size() < 3) throw DataError("spearman: need at least 3 pairs");
    auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(xs) || constant(ys)) throw DataError("spearman: constant series has undefined rank correlation");

    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    Correlation c;
    c.rho = std::clamp(pearson(rx, ry), -1.0, 1.0);
    const std::size_t n = xs.size();

    if (method == PValueMethod::exact_permutation) {
        if (n > 12) throw DataError("spearman: exact permutation test limited to n <= 12");
        std::vector<double> perm = ry;
        std::sort(perm.begin(), perm.end());
        std::size_t extreme = 0, total = 0;
        const double threshold = std::abs(c.rho) - 1e-12;
        do {
            ++total;
            if (std::abs(pearson(rx, perm)) >= threshold) ++extreme;
        } while (std::next_permutation(perm.begin(), perm.end()));
        c.p_value = static_cast<double>(extreme) / static_cast<double>(total);
        return c;
    }

    if (std::abs(c.rho) >= 1.0) {
        c.p_value = 0.0;
        return c;
    }
    const double df = static_cast<double>(n - 2);
    const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
    const boost::math::students_t dist(df);
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    return c;
}

}  // namespace tshift
