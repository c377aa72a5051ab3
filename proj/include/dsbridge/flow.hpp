#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dsbridge/diffusion.hpp"
#include "dsbridge/linalg.hpp"
#include "dsbridge/net.hpp"
#include "dsbridge/rng.hpp"
#include "dsbridge/schedule.hpp"

namespace dsb {

// Time-indexed drift fields of the bridge: dX = f_t dt + sqrt(2) dB forward,
// and b the reverse-time drift. Learned fields are piecewise constant per
// step interval (the nets are trained at grid indices only).
struct FlowField {
    std::function<Vec(double, const Vec&)> f;
    std::function<Vec(double, const Vec&)> b;
    // optional exact gradient of <rhs(t, x), eps> w.r.t. x, where
    // rhs = (f - b)/2; used by the Hutchinson estimator when present
    std::function<Vec(double, const Vec&, const Vec&)> rhs_vjp;
};

// Probability-flow velocity (f_t(x) - b_t(x)) / 2.
inline Vec prob_flow_rhs(const FlowField& field, double t, const Vec& x) {
    Vec vf = field.f(t, x);
    const Vec vb = field.b(t, x);
    for (std::size_t i = 0; i < vf.size(); ++i) vf[i] = 0.5 * (vf[i] - vb[i]);
    return vf;
}

// Field built from transition-mean maps on a schedule. Off-range times are
// rejected; within a step interval the drift is held constant.
inline FlowField flow_field_from_maps(const DriftMap& fwd, const DriftMap& bwd,
                                      const StepSchedule& sched) {
    auto interval_of = [sched](double t) {
        if (t < -1e-12 || t > sched.horizon() + 1e-12)
            throw std::invalid_argument("flow field: time " + std::to_string(t) +
                                        " outside [0, T] and no interpolation rule applies");
        std::size_t k = 0;
        while (k + 1 < sched.n_steps() && t >= sched.times[k + 1]) ++k;
        return k;
    };
    FlowField field;
    field.f = [fwd, sched, interval_of](double t, const Vec& x) {
        const std::size_t k = interval_of(t);
        Vec v = fwd(k, x);
        const double g = sched.gamma_after(k);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - x[i]) / g;
        return v;
    };
    field.b = [bwd, sched, interval_of](double t, const Vec& x) {
        const std::size_t k = interval_of(t);
        Vec v = bwd(k + 1, x);
        const double g = sched.gamma_after(k);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - x[i]) / g;
        return v;
    };
    return field;
}

// Drift-matching nets are the drifts themselves, so the probability-flow
// velocity admits exact input gradients through the tape.
inline FlowField flow_field_from_drift_nets(const NetSpec& spec, const Vec& fwd_params,
                                            const Vec& bwd_params, const StepSchedule& sched) {
    auto interval_of = [sched](double t) {
        if (t < -1e-12 || t > sched.horizon() + 1e-12)
            throw std::invalid_argument("flow field: time outside [0, T]");
        std::size_t k = 0;
        while (k + 1 < sched.n_steps() && t >= sched.times[k + 1]) ++k;
        return k;
    };
    FlowField field;
    field.f = [spec, fwd_params, interval_of](double t, const Vec& x) {
        return net_forward(fwd_params, spec, double(interval_of(t)), x);
    };
    field.b = [spec, bwd_params, interval_of](double t, const Vec& x) {
        return net_forward(bwd_params, spec, double(interval_of(t) + 1), x);
    };
    field.rhs_vjp = [spec, fwd_params, bwd_params, interval_of](double t, const Vec& x,
                                                                const Vec& eps) {
        const std::size_t k = interval_of(t);
        Vec gf = net_input_vjp(fwd_params, spec, double(k), x, eps);
        const Vec gb = net_input_vjp(bwd_params, spec, double(k + 1), x, eps);
        for (std::size_t i = 0; i < gf.size(); ++i) gf[i] = 0.5 * (gf[i] - gb[i]);
        return gf;
    };
    return field;
}

using VectorField = std::function<Vec(const Vec&)>;

// Central finite-difference divergence, O(h^2).
inline double divergence_exact(const VectorField& v, const Vec& x, double h = 1e-4) {
    if (!(h > 0.0)) throw std::invalid_argument("divergence_exact: h must be > 0");
    double div = 0.0;
    Vec xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        div += (v(xp)[i] - v(xm)[i]) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return div;
}

enum class ProbeKind { Rademacher, Gaussian };

struct HutchinsonResult {
    double estimate = 0.0;
    double std_error = 0.0;
};

// Skilling-Hutchinson trace estimate of the Jacobian of v at x: mean over
// probes eps of eps^T (dv/dx) eps. The Jacobian-vector pairing uses the
// exact vjp when given, otherwise directional central differences.
inline HutchinsonResult divergence_hutchinson(
    const VectorField& v, const Vec& x, std::size_t n_probes, Rng& rng,
    const std::function<Vec(const Vec&, const Vec&)>& vjp = {},
    ProbeKind probes = ProbeKind::Rademacher, double h = 1e-5) {
    if (n_probes < 1) throw std::invalid_argument("divergence_hutchinson: need >= 1 probe");
    double sum = 0.0, sum2 = 0.0;
    Vec eps(x.size()), xp(x.size()), xm(x.size());
    for (std::size_t p = 0; p < n_probes; ++p) {
        for (auto& e : eps)
            e = probes == ProbeKind::Rademacher ? rng.rademacher() : rng.normal();
        double est;
        if (vjp) {
            est = dot(vjp(x, eps), eps);
        } else {
            for (std::size_t i = 0; i < x.size(); ++i) {
                xp[i] = x[i] + h * eps[i];
                xm[i] = x[i] - h * eps[i];
            }
            const Vec vp = v(xp), vm = v(xm);
            est = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                est += (vp[i] - vm[i]) / (2.0 * h) * eps[i];
        }
        sum += est;
        sum2 += est * est;
    }
    HutchinsonResult r;
    r.estimate = sum / double(n_probes);
    const double var = std::max(0.0, sum2 / double(n_probes) - r.estimate * r.estimate);
    r.std_error = std::sqrt(var / double(n_probes));
    return r;
}

enum class FlowDirection {
    FromData,   // integrate 0 -> T; returns log density of the input point
    FromPrior,  // integrate the reversed flow from a prior point; returns the
                // log density of the produced endpoint sample
};

struct LogLikResult {
    double log_lik = 0.0;
    double div_stderr = 0.0;
    std::size_t steps = 0;
    Vec endpoint;
};

// Instantaneous change of variables along the probability-flow ODE,
// explicit Euler on the schedule grid. n_probes = 0 selects the exact
// finite-difference divergence.
inline LogLikResult log_likelihood(const FlowField& field, const StepSchedule& sched,
                                   const Vec& point, FlowDirection direction,
                                   const std::function<double(const Vec&)>& log_prior,
                                   std::size_t n_probes = 0, Rng* rng = nullptr,
                                   double max_norm = 1e6) {
    const std::size_t n = sched.n_steps();
    LogLikResult res;
    res.steps = n;
    Vec x = point;
    double acc = 0.0, var_acc = 0.0;

    auto step_div = [&](double t, const Vec& at, double gamma, std::size_t k) {
        VectorField rhs = [&field, t](const Vec& y) { return prob_flow_rhs(field, t, y); };
        if (n_probes == 0) {
            acc += gamma * divergence_exact(rhs, at);
            return;
        }
        if (!rng) throw std::invalid_argument("log_likelihood: probes requested without rng");
        Rng stream = rng->substream(k);
        std::function<Vec(const Vec&, const Vec&)> vjp;
        if (field.rhs_vjp)
            vjp = [&field, t](const Vec& y, const Vec& e) { return field.rhs_vjp(t, y, e); };
        auto est = divergence_hutchinson(rhs, at, n_probes, stream, vjp);
        acc += gamma * est.estimate;
        var_acc += gamma * gamma * est.std_error * est.std_error;
    };

    if (direction == FlowDirection::FromData) {
        for (std::size_t k = 0; k < n; ++k) {
            const double t = sched.times[k];
            const double g = sched.gamma_after(k);
            step_div(t, x, g, k);
            Vec v = prob_flow_rhs(field, t, x);
            axpy(g, v, x);
            detail::check_state(x, k + 1, max_norm, "probability flow");
        }
        res.log_lik = log_prior(x) + acc;
    } else {
        res.log_lik = log_prior(point);
        for (std::size_t k = n; k >= 1; --k) {
            const double t = sched.times[k - 1];
            const double g = sched.gamma_before(k);
            // reversed flow: dY = (b - f)/2 dt, i.e. minus the forward rhs
            step_div(t, x, g, k);
            Vec v = prob_flow_rhs(field, t, x);
            axpy(-g, v, x);
            detail::check_state(x, k - 1, max_norm, "probability flow");
        }
        res.log_lik += acc;
    }
    res.div_stderr = std::sqrt(var_acc);
    res.endpoint = std::move(x);
    return res;
}

}  // namespace dsb
