#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dsbridge/linalg.hpp"
#include "dsbridge/rng.hpp"

namespace dsb {

struct GaussianDist {
    Vec mean;
    Mat cov;  // symmetric positive definite

    std::size_t dim() const { return mean.size(); }
};

// Ornstein-Uhlenbeck transition moments for dX = -alpha X dt + sqrt(2) dB:
//   X_t | X_0 = x0  ~  N(c_t x0, sigma2_t I),
//   c_t = exp(-alpha t), sigma2_t = (1 - exp(-2 alpha t)) / alpha,
// with the Brownian limit sigma2_t = 2t at alpha = 0.
struct OuMoments {
    double c = 1.0;
    double sigma2 = 0.0;
};

inline OuMoments ou_moments(double t, double alpha) {
    if (t < 0.0) throw std::invalid_argument("ou_moments: t must be >= 0");
    if (alpha < 0.0) throw std::invalid_argument("ou_moments: alpha must be >= 0");
    OuMoments m;
    if (alpha == 0.0) {
        m.c = 1.0;
        m.sigma2 = 2.0 * t;
    } else {
        m.c = std::exp(-alpha * t);
        m.sigma2 = (1.0 - std::exp(-2.0 * alpha * t)) / alpha;
    }
    return m;
}

// Static Schrodinger bridge between N(-a, I) and N(a, I) under a Brownian
// reference with unit transition variance: the coupling is Gaussian with
// mean (-a, a) and covariance [[I, b I], [b I, I]], b = (sqrt(5) - 1) / 2.
struct StaticSbGauss {
    std::size_t dim;
    Vec offset;        // a
    double beta_sb;    // off-diagonal correlation

    GaussianDist joint() const {
        GaussianDist g;
        g.mean.resize(2 * dim);
        for (std::size_t i = 0; i < dim; ++i) {
            g.mean[i] = -offset[i];
            g.mean[dim + i] = offset[i];
        }
        g.cov = Mat(2 * dim, 2 * dim);
        for (std::size_t i = 0; i < dim; ++i) {
            g.cov(i, i) = 1.0;
            g.cov(dim + i, dim + i) = 1.0;
            g.cov(i, dim + i) = beta_sb;
            g.cov(dim + i, i) = beta_sb;
        }
        return g;
    }

    // density of the coupling at (x0, x1), each of length dim
    double density(const Vec& x0, const Vec& x1) const {
        const double b = beta_sb;
        const double det1 = 1.0 - b * b;  // per-coordinate 2x2 block determinant
        double quad = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double u = x0[i] + offset[i];
            const double v = x1[i] - offset[i];
            quad += (u * u - 2.0 * b * u * v + v * v) / det1;
        }
        const double log_norm =
            -double(dim) * std::log(2.0 * 3.14159265358979323846) - 0.5 * double(dim) * std::log(det1);
        return std::exp(log_norm - 0.5 * quad);
    }
};

inline StaticSbGauss brownian_sb(const Vec& a) {
    StaticSbGauss sb;
    sb.dim = a.size();
    sb.offset = a;
    sb.beta_sb = (std::sqrt(5.0) - 1.0) / 2.0;
    return sb;
}

// Scalar IPF recursion for the Gaussian model with coupling parameter
// alpha and marginal parameter beta (entering as beta^2):
//   gamma_{n+1} = beta^2 - 1 + alpha^2 / (gamma_n + 1).
inline double gauss_ipf_step(double gamma_n, double alpha_cpl, double beta_marg) {
    if (!(gamma_n > -1.0)) throw std::invalid_argument("gauss_ipf_step: gamma must be > -1");
    return beta_marg * beta_marg - 1.0 + alpha_cpl * alpha_cpl / (gamma_n + 1.0);
}

// Fixed point gamma* = -1 + beta^2/2 + (1/2) sqrt(beta^4 + 4 alpha^2).
inline double gauss_ipf_fixed_point(double alpha_cpl, double beta_marg) {
    const double b2 = beta_marg * beta_marg;
    return -1.0 + 0.5 * b2 + 0.5 * std::sqrt(b2 * b2 + 4.0 * alpha_cpl * alpha_cpl);
}

// Convergence rate kappa = rho / (1 + rho) with rho = 2 alpha / beta^2.
inline double gauss_ipf_rate(double alpha_cpl, double beta_marg) {
    const double rho = 2.0 * alpha_cpl / (beta_marg * beta_marg);
    return rho / (1.0 + rho);
}

// KL(mu | mu_0 x mu_1) = -(d/2) log(1 - alpha^2) for the Gaussian coupling
// p(x0, x1) ~ exp(-|x0|^2 + 2 alpha <x0, x1> - |x1|^2).
inline double mutual_information(double alpha_cpl, std::size_t d) {
    if (!(alpha_cpl >= 0.0 && alpha_cpl < 1.0))
        throw std::invalid_argument("mutual_information: alpha must be in [0, 1)");
    return -0.5 * double(d) * std::log(1.0 - alpha_cpl * alpha_cpl);
}

// Affine map x -> E[X_a | X_b = x] for a joint Gaussian over (X_a, X_b):
//   coef = Cov_ab Cov_bb^{-1},  intercept = mean_a - coef * mean_b.
struct AffineMap {
    Mat coef;
    Vec intercept;

    Vec operator()(const Vec& x) const {
        Vec y = matvec(coef, x);
        axpy(1.0, intercept, y);
        return y;
    }
};

inline AffineMap gauss_conditional_map(const GaussianDist& joint, std::size_t dim_a) {
    const std::size_t n = joint.dim();
    if (dim_a == 0 || dim_a >= n)
        throw std::invalid_argument("gauss_conditional_map: bad block split");
    const std::size_t dim_b = n - dim_a;
    Mat cov_bb(dim_b, dim_b), cov_ab(dim_a, dim_b);
    for (std::size_t i = 0; i < dim_b; ++i)
        for (std::size_t j = 0; j < dim_b; ++j) cov_bb(i, j) = joint.cov(dim_a + i, dim_a + j);
    for (std::size_t i = 0; i < dim_a; ++i)
        for (std::size_t j = 0; j < dim_b; ++j) cov_ab(i, j) = joint.cov(i, dim_a + j);

    const Mat l = cholesky(cov_bb);  // throws on singular covariance
    AffineMap map;
    map.coef = Mat(dim_a, dim_b);
    // rows of coef solve cov_bb^T row = cov_ab row (cov_bb symmetric)
    for (std::size_t i = 0; i < dim_a; ++i) {
        Vec row(dim_b);
        for (std::size_t j = 0; j < dim_b; ++j) row[j] = cov_ab(i, j);
        row = cholesky_solve(l, std::move(row));
        for (std::size_t j = 0; j < dim_b; ++j) map.coef(i, j) = row[j];
    }
    Vec mean_b(dim_b);
    for (std::size_t j = 0; j < dim_b; ++j) mean_b[j] = joint.mean[dim_a + j];
    map.intercept = matvec(map.coef, mean_b);
    for (std::size_t i = 0; i < dim_a; ++i)
        map.intercept[i] = joint.mean[i] - map.intercept[i];
    return map;
}

// Unbiased sample statistics used for the Gaussian bridge diagnostics.
struct GaussStats {
    Vec mean;
    Vec variance;        // per coordinate
    double cross_cov01;  // first-component covariance of paired (X_0, X_N)
};

inline GaussStats empirical_gauss_stats(const std::vector<Vec>& samples,
                                        const std::vector<Vec>* paired = nullptr) {
    if (samples.size() < 2) throw std::invalid_argument("empirical_gauss_stats: need n >= 2");
    const std::size_t n = samples.size(), d = samples[0].size();
    GaussStats s;
    s.mean.assign(d, 0.0);
    s.variance.assign(d, 0.0);
    s.cross_cov01 = 0.0;
    for (const auto& x : samples) axpy(1.0 / double(n), x, s.mean);
    for (const auto& x : samples)
        for (std::size_t i = 0; i < d; ++i) {
            const double c = x[i] - s.mean[i];
            s.variance[i] += c * c / double(n - 1);
        }
    if (paired) {
        if (paired->size() != n) throw std::invalid_argument("empirical_gauss_stats: pair mismatch");
        double mp = 0.0;
        for (const auto& y : *paired) mp += y[0] / double(n);
        for (std::size_t j = 0; j < n; ++j)
            s.cross_cov01 += (samples[j][0] - s.mean[0]) * ((*paired)[j][0] - mp) / double(n - 1);
    }
    return s;
}

inline Vec sample_gaussian(const GaussianDist& g, Rng& rng) {
    const Mat l = cholesky(g.cov);
    const Vec z = gaussian_vector(rng, g.dim());
    Vec x = matvec(l, z);
    axpy(1.0, g.mean, x);
    return x;
}

}  // namespace dsb
