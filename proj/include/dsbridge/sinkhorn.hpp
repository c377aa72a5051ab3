#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dsbridge/linalg.hpp"

namespace dsb {

// 1-D quadrature grid used by the exact finite-support oracle.
struct GridSpec {
    Vec points;
    Vec weights;

    std::size_t size() const { return points.size(); }
};

inline GridSpec make_uniform_grid(double lo, double hi, std::size_t n) {
    if (n < 2 || !(hi > lo)) throw std::invalid_argument("grid: need n >= 2 and hi > lo");
    GridSpec g;
    g.points.resize(n);
    g.weights.assign(n, (hi - lo) / double(n - 1));
    for (std::size_t i = 0; i < n; ++i)
        g.points[i] = lo + (hi - lo) * double(i) / double(n - 1);
    return g;
}

struct PotentialPair {
    // Densities w.r.t. mu0 resp. mu1: the coupling mass factors as
    // pi_ij = a_i h_ij b_j mu0_i mu1_j. Strictly positive.
    Vec a, b;
};

// Diagnostics for the transition pi^{n-1} -> pi^n (iter = n, n >= 1).
struct IpfStepStats {
    std::size_t iter = 0;
    double kl_step_fwd = 0.0;  // KL(pi^n | pi^{n-1})
    double kl_step_bwd = 0.0;  // KL(pi^{n-1} | pi^n)
    double tv_step = 0.0;      // TV(pi^n, pi^{n-1})
    double tv_marg0 = 0.0;     // TV of current row marginal vs nu0
    double tv_marg1 = 0.0;
    double kl_marg0 = 0.0;     // KL(current row marginal | nu0)
    double kl_marg1 = 0.0;
};

struct DiscreteIpfResult {
    Mat coupling;
    PotentialPair potentials;
    std::vector<IpfStepStats> trace;
    bool converged = false;
    std::size_t half_steps = 0;
};

namespace detail {

inline double kl_between(const Mat& p, const Mat& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double pi = p.data[i];
        if (pi > 0.0) s += pi * std::log(pi / q.data[i]);
    }
    return std::max(s, 0.0);  // clamp tiny negative round-off
}

inline double tv_between(const Vec& p, const Vec& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

inline double kl_vec(const Vec& p, const Vec& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
    return std::max(s, 0.0);
}

}  // namespace detail

// Alternating KL projections on a finite grid (Sinkhorn scalings). The
// reference coupling is mu0_i h_ij mu1_j; odd half-steps fix the column
// marginal to nu1, even half-steps fix the row marginal to nu0. max_iters
// counts half-steps. Non-convergence is reported via the flag, never by
// silently truncating the trace.
inline DiscreteIpfResult run_discrete_ipf(const Mat& h, const Vec& mu0, const Vec& mu1,
                                          const Vec& nu0, const Vec& nu1,
                                          std::size_t max_iters, double tol = 1e-10) {
    const std::size_t n0 = h.rows, n1 = h.cols;
    if (mu0.size() != n0 || mu1.size() != n1 || nu0.size() != n0 || nu1.size() != n1)
        throw std::invalid_argument("discrete ipf: marginal size mismatch");
    for (double v : h.data)
        if (!(v > 0.0)) throw std::invalid_argument("discrete ipf: kernel must be > 0 entrywise");
    for (double v : mu0)
        if (!(v > 0.0)) throw std::invalid_argument("discrete ipf: mu0 must be positive");
    for (double v : mu1)
        if (!(v > 0.0)) throw std::invalid_argument("discrete ipf: mu1 must be positive");
    for (double v : nu0)
        if (!(v > 0.0)) throw std::invalid_argument("discrete ipf: nu0 must be positive");
    for (double v : nu1)
        if (!(v > 0.0)) throw std::invalid_argument("discrete ipf: nu1 must be positive");

    // reference mass matrix, normalized to a probability coupling
    Mat k(n0, n1);
    double mass = 0.0;
    for (std::size_t i = 0; i < n0; ++i)
        for (std::size_t j = 0; j < n1; ++j) {
            k(i, j) = mu0[i] * h(i, j) * mu1[j];
            mass += k(i, j);
        }
    Vec u(n0, 1.0 / mass), v(n1, 1.0);

    auto coupling_of = [&](const Vec& uu, const Vec& vv) {
        Mat p(n0, n1);
        for (std::size_t i = 0; i < n0; ++i)
            for (std::size_t j = 0; j < n1; ++j) p(i, j) = uu[i] * k(i, j) * vv[j];
        return p;
    };

    DiscreteIpfResult res;
    Mat prev = coupling_of(u, v);
    for (std::size_t n = 1; n <= max_iters; ++n) {
        if (n % 2 == 1) {  // project onto the nu1 constraint
            for (std::size_t j = 0; j < n1; ++j) {
                double col = 0.0;
                for (std::size_t i = 0; i < n0; ++i) col += u[i] * k(i, j);
                v[j] = nu1[j] / col;
            }
        } else {  // project onto the nu0 constraint
            for (std::size_t i = 0; i < n0; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < n1; ++j) row += k(i, j) * v[j];
                u[i] = nu0[i] / row;
            }
        }
        Mat cur = coupling_of(u, v);
        Vec row_m(n0, 0.0), col_m(n1, 0.0);
        for (std::size_t i = 0; i < n0; ++i)
            for (std::size_t j = 0; j < n1; ++j) {
                row_m[i] += cur(i, j);
                col_m[j] += cur(i, j);
            }

        IpfStepStats st;
        st.iter = n;
        st.kl_step_fwd = detail::kl_between(cur, prev);
        st.kl_step_bwd = detail::kl_between(prev, cur);
        st.tv_step = 0.0;
        for (std::size_t i = 0; i < cur.data.size(); ++i)
            st.tv_step += std::abs(cur.data[i] - prev.data[i]);
        st.tv_step *= 0.5;
        st.tv_marg0 = detail::tv_between(row_m, nu0);
        st.tv_marg1 = detail::tv_between(col_m, nu1);
        st.kl_marg0 = detail::kl_vec(row_m, nu0);
        st.kl_marg1 = detail::kl_vec(col_m, nu1);
        res.trace.push_back(st);
        res.half_steps = n;
        prev = std::move(cur);

        if (st.tv_marg0 <= tol && st.tv_marg1 <= tol) {
            res.converged = true;
            break;
        }
    }
    res.coupling = std::move(prev);
    res.potentials.a = u;
    res.potentials.b = v;
    return res;
}

struct MonotonicityReport {
    std::vector<std::size_t> kl_fwd_violations;
    std::vector<std::size_t> kl_bwd_violations;
    std::vector<std::size_t> tv_violations;
    std::vector<std::size_t> jeffreys_violations;
    std::vector<std::size_t> marginal_decay_violations;

    bool ok() const {
        return kl_fwd_violations.empty() && kl_bwd_violations.empty() && tv_violations.empty() &&
               jeffreys_violations.empty() && marginal_decay_violations.empty();
    }
};

// Verifies the monotonicity properties of alternating KL projections on a
// trace from run_discrete_ipf, with numerical slack:
//   KL(pi^{n+1}|pi^n) <= KL(pi^{n-1}|pi^n),  KL(pi^n|pi^{n+1}) <= KL(pi^n|pi^{n-1}),
//   TV and Jeffreys step sequences non-increasing,
//   n * (marginal KLs to the targets) decreasing over the trailing half.
inline MonotonicityReport check_monotonicity(const std::vector<IpfStepStats>& trace,
                                             double slack = 1e-12) {
    MonotonicityReport rep;
    for (std::size_t n = 1; n < trace.size(); ++n) {
        if (trace[n].kl_step_fwd > trace[n - 1].kl_step_bwd + slack)
            rep.kl_fwd_violations.push_back(n);
        if (trace[n].kl_step_bwd > trace[n - 1].kl_step_fwd + slack)
            rep.kl_bwd_violations.push_back(n);
        if (trace[n].tv_step > trace[n - 1].tv_step + slack) rep.tv_violations.push_back(n);
        const double j_cur = trace[n].kl_step_fwd + trace[n].kl_step_bwd;
        const double j_prev = trace[n - 1].kl_step_fwd + trace[n - 1].kl_step_bwd;
        if (j_cur > j_prev + slack) rep.jeffreys_violations.push_back(n);
    }
    const std::size_t tail = trace.size() / 2;
    for (std::size_t n = std::max<std::size_t>(tail, 1); n < trace.size(); ++n) {
        const double cur = double(trace[n].iter) * (trace[n].kl_marg0 + trace[n].kl_marg1);
        const double prev = double(trace[n - 1].iter) * (trace[n - 1].kl_marg0 + trace[n - 1].kl_marg1);
        if (cur > prev + slack) rep.marginal_decay_violations.push_back(n);
    }
    return rep;
}

struct DiscreteGaussianCase {
    Mat h;
    Vec mu0, mu1, nu0, nu1;
    GridSpec grid;
};

// Discretization of the static bridge problem between N(-a, 1) and N(a, 1)
// under a Gaussian transition kernel of the given variance. The reference
// coupling starts at the nu0 side and applies the row-normalized kernel, so
// every returned distribution has total mass 1 exactly.
inline DiscreteGaussianCase discretize_gaussian_case(double a, const GridSpec& grid,
                                                     double transition_variance) {
    const std::size_t n = grid.size();
    if (n < 20) throw std::invalid_argument("discretize_gaussian_case: grid too coarse (< 20 points)");
    const double lo = grid.points.front(), hi = grid.points.back();
    if (lo > -std::abs(a) - 5.0 + 1e-9 || hi < std::abs(a) + 5.0 - 1e-9)
        throw std::invalid_argument("discretize_gaussian_case: grid must cover +-5 standard deviations");
    if (!(transition_variance > 0.0))
        throw std::invalid_argument("discretize_gaussian_case: variance must be > 0");

    DiscreteGaussianCase c;
    c.grid = grid;
    auto discretize_normal = [&](double mean) {
        Vec p(n);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = std::exp(-0.5 * (grid.points[i] - mean) * (grid.points[i] - mean)) *
                   grid.weights[i];
            z += p[i];
        }
        for (auto& x : p) x /= z;
        return p;
    };
    c.nu0 = discretize_normal(-a);
    c.nu1 = discretize_normal(a);
    c.mu0 = c.nu0;

    // row-normalized transition; reference joint R_ij = mu0_i T_ij
    Mat t(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = grid.points[i] - grid.points[j];
            t(i, j) = std::exp(-0.5 * d * d / transition_variance) * grid.weights[j];
            z += t(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) t(i, j) /= z;
    }
    c.mu1.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c.mu1[j] += c.mu0[i] * t(i, j);

    c.h = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c.h(i, j) = t(i, j) / c.mu1[j];
    return c;
}

// Quadratic transport cost of a coupling on its grid.
inline double transport_cost(const Mat& coupling, const GridSpec& grid) {
    double s = 0.0;
    for (std::size_t i = 0; i < coupling.rows; ++i)
        for (std::size_t j = 0; j < coupling.cols; ++j) {
            const double d = grid.points[i] - grid.points[j];
            s += coupling(i, j) * d * d;
        }
    return s;
}

// Exact 1-D optimal transport cost between grid distributions (monotone
// rearrangement; quadratic cost).
inline double grid_ot_cost(const Vec& p, const Vec& q, const GridSpec& grid) {
    double s = 0.0;
    std::size_t i = 0, j = 0;
    double pi = p[0], qj = q[0];
    while (i < p.size() && j < q.size()) {
        const double m = std::min(pi, qj);
        const double d = grid.points[i] - grid.points[j];
        s += m * d * d;
        pi -= m;
        qj -= m;
        if (pi <= 1e-18) {
            ++i;
            if (i < p.size()) pi = p[i];
        }
        if (qj <= 1e-18) {
            ++j;
            if (j < q.size()) qj = q[j];
        }
    }
    return s;
}

}  // namespace dsb
