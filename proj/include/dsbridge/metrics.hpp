#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dsbridge/linalg.hpp"
#include "dsbridge/rng.hpp"

namespace dsb {

// Exact 2-Wasserstein distance between two 1-d empirical distributions:
// quantile functions are step functions, integrate the squared difference
// over the merged breakpoints.
inline double wasserstein2_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein2_1d: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t n = a.size(), m = b.size();
    double acc = 0.0, q = 0.0;
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        const double qa = double(i + 1) / double(n);
        const double qb = double(j + 1) / double(m);
        const double next = std::min(qa, qb);
        const double d = a[i] - b[j];
        acc += (next - q) * d * d;
        q = next;
        if (qa <= qb) ++i;
        if (qb <= qa) ++j;
    }
    return std::sqrt(acc);
}

// Average over random unit directions of the 1-d W2 distance between the
// projections of the two samples.
inline double sliced_wasserstein(const std::vector<Vec>& a, const std::vector<Vec>& b,
                                 std::size_t n_projections, Rng& rng) {
    if (a.empty() || b.empty()) throw std::invalid_argument("sliced_wasserstein: empty input");
    const std::size_t d = a[0].size();
    if (b[0].size() != d) throw std::invalid_argument("sliced_wasserstein: dimension mismatch");
    double total = 0.0;
    std::vector<double> pa(a.size()), pb(b.size());
    for (std::size_t p = 0; p < n_projections; ++p) {
        Vec dir = gaussian_vector(rng, d);
        const double nrm = norm2(dir);
        for (auto& x : dir) x /= (nrm > 0.0 ? nrm : 1.0);
        for (std::size_t i = 0; i < a.size(); ++i) pa[i] = dot(a[i], dir);
        for (std::size_t i = 0; i < b.size(); ++i) pb[i] = dot(b[i], dir);
        total += wasserstein2_1d(pa, pb);
    }
    return total / double(n_projections);
}

// Energy statistic 2 E|X-Y| - E|X-X'| - E|Y-Y'| over all sample pairs.
inline double energy_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("energy_distance: empty input");
    auto mean_pairwise = [](const std::vector<Vec>& u, const std::vector<Vec>& v) {
        double s = 0.0;
        for (const auto& x : u)
            for (const auto& y : v) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i)
                    d2 += (x[i] - y[i]) * (x[i] - y[i]);
                s += std::sqrt(d2);
            }
        return s / double(u.size() * v.size());
    };
    return 2.0 * mean_pairwise(a, b) - mean_pairwise(a, a) - mean_pairwise(b, b);
}

}  // namespace dsb
