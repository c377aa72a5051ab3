#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsbridge/linalg.hpp"
#include "dsbridge/rng.hpp"

namespace dsb {

// Toy target distributions. The 2-d generator formulas follow the widely
// used conventions (scikit-learn shapes, rescaled to O(1) coordinates); the
// exact parameterizations are fixed here, not prescribed elsewhere.
struct DatasetSpec {
    std::string name = "gaussian";  // two_moons | swiss_roll_2d | s_curve_2d |
                                    // checkerboard | circles | gaussian_mixture_8 |
                                    // gaussian
    double scale = 1.0;
    double noise = 0.0;
    // gaussian family: mean = offset * 1, covariance = variance * I
    std::size_t dim = 2;
    double offset = 0.0;
    double variance = 1.0;

    std::size_t dimension() const { return name == "gaussian" ? dim : 2; }
};

inline Vec sample_point(const DatasetSpec& spec, Rng& rng) {
    const double pi = 3.14159265358979323846;
    auto noisy = [&](Vec p) {
        for (auto& x : p) x = spec.scale * x + spec.noise * rng.normal();
        return p;
    };
    if (spec.name == "gaussian") {
        Vec p(spec.dim);
        const double sd = std::sqrt(spec.variance);
        for (auto& x : p) x = spec.offset + sd * rng.normal();
        return p;
    }
    if (spec.name == "two_moons") {
        // unit-radius arcs, lower moon shifted by (1, -0.5), recentred
        const double t = pi * rng.uniform();
        Vec p(2);
        if (rng.next_u64() & 1) {
            p[0] = std::cos(t) - 0.5;
            p[1] = std::sin(t) - 0.25;
        } else {
            p[0] = 1.0 - std::cos(t) - 0.5;
            p[1] = 0.5 - std::sin(t) - 0.25;
        }
        return noisy(std::move(p));
    }
    if (spec.name == "swiss_roll_2d") {
        // spiral r = t over t in [1.5 pi, 4.5 pi], shrunk to O(1)
        const double t = 1.5 * pi * (1.0 + 2.0 * rng.uniform());
        Vec p = {t * std::cos(t) / 15.0, t * std::sin(t) / 15.0};
        return noisy(std::move(p));
    }
    if (spec.name == "s_curve_2d") {
        const double t = 1.5 * pi * (2.0 * rng.uniform() - 1.0);
        const double sgn = t >= 0.0 ? 1.0 : -1.0;
        Vec p = {std::sin(t), sgn * (std::cos(t) - 1.0) * 0.5};
        return noisy(std::move(p));
    }
    if (spec.name == "checkerboard") {
        // alternating unit cells on [-2, 2)^2
        for (;;) {
            const double x = rng.uniform(-2.0, 2.0);
            const double y = rng.uniform(-2.0, 2.0);
            const int cx = int(std::floor(x)) + 2, cy = int(std::floor(y)) + 2;
            if ((cx + cy) % 2 == 0) return noisy({x, y});
        }
    }
    if (spec.name == "circles") {
        // concentric radii 1 and 0.5
        const double t = 2.0 * pi * rng.uniform();
        const double r = (rng.next_u64() & 1) ? 1.0 : 0.5;
        return noisy({r * std::cos(t), r * std::sin(t)});
    }
    if (spec.name == "gaussian_mixture_8") {
        // eight modes on a circle of radius 2, component sd 0.2
        const std::size_t m = rng.uniform_index(8);
        const double ang = 2.0 * pi * double(m) / 8.0;
        Vec p = {2.0 * std::cos(ang) + 0.2 * rng.normal(),
                 2.0 * std::sin(ang) + 0.2 * rng.normal()};
        for (auto& x : p) x *= spec.scale;
        return p;
    }
    throw std::invalid_argument("sample_point: unknown dataset '" + spec.name + "'");
}

inline std::vector<Vec> sample_dataset(const DatasetSpec& spec, std::size_t n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
    std::vector<Vec> out(n);
    for (auto& p : out) p = sample_point(spec, rng);
    return out;
}

// Prior over the terminal marginal: an isotropic Gaussian, or a second
// dataset for dataset-interpolation runs.
struct PriorSpec {
    bool is_dataset = false;
    DatasetSpec dataset;
    Vec mean;           // gaussian prior mean
    double variance = 1.0;

    std::size_t dimension() const { return is_dataset ? dataset.dimension() : mean.size(); }

    Vec sample(Rng& rng) const {
        if (is_dataset) return sample_point(dataset, rng);
        Vec p(mean.size());
        const double sd = std::sqrt(variance);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = mean[i] + sd * rng.normal();
        return p;
    }

    double log_density(const Vec& x) const {
        if (is_dataset)
            throw std::invalid_argument("prior log-density only defined for gaussian priors");
        const double d = double(mean.size());
        double q = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double c = x[i] - mean[i];
            q += c * c;
        }
        return -0.5 * d * std::log(2.0 * 3.14159265358979323846 * variance) -
               0.5 * q / variance;
    }

    // OU rate whose stationary law matches this prior: alpha = 1 / variance.
    double matched_alpha() const { return 1.0 / variance; }
};

// Gaussian prior fitted to data moments: mean of the data, isotropic
// variance = inflation x pooled per-coordinate variance.
inline PriorSpec prior_from_data(const std::vector<Vec>& samples, double inflation = 1.0) {
    if (samples.size() < 2) throw std::invalid_argument("prior_from_data: need >= 2 samples");
    if (inflation < 1.0) throw std::invalid_argument("prior_from_data: inflation must be >= 1");
    const std::size_t n = samples.size(), d = samples[0].size();
    PriorSpec prior;
    prior.mean.assign(d, 0.0);
    for (const auto& x : samples) axpy(1.0 / double(n), x, prior.mean);
    double pooled = 0.0;
    for (const auto& x : samples)
        for (std::size_t i = 0; i < d; ++i) {
            const double c = x[i] - prior.mean[i];
            pooled += c * c / double(n - 1) / double(d);
        }
    double mean_scale = 1.0;
    for (double m : prior.mean) mean_scale += m * m;
    if (!(pooled > 1e-15 * mean_scale))
        throw std::invalid_argument("prior_from_data: degenerate (zero-variance) data");
    prior.variance = inflation * pooled;
    return prior;
}

}  // namespace dsb
