#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsbridge/linalg.hpp"
#include "dsbridge/rng.hpp"
#include "dsbridge/schedule.hpp"

namespace dsb {

enum class Activation { LeakyRelu, Relu, Tanh, Identity };

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::LeakyRelu: return z > 0.0 ? z : 0.01 * z;
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    return z;
}

inline double activate_deriv(Activation a, double z) {
    switch (a) {
        case Activation::LeakyRelu: return z > 0.0 ? 1.0 : 0.01;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

// Dense stack: widths[0] -> widths[1] -> ... -> widths.back().
// Parameters per layer are stored row-major (out x in) followed by the bias.
struct MlpLayout {
    std::vector<std::size_t> widths;
    Activation act = Activation::LeakyRelu;
    bool act_on_output = false;
    bool bias = true;

    std::size_t n_layers() const { return widths.empty() ? 0 : widths.size() - 1; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l)
            n += widths[l + 1] * (widths[l] + (bias ? 1 : 0));
        return n;
    }
};

// Per-layer pre-activations and outputs cached for the backward pass.
struct MlpTape {
    std::vector<Vec> pre;  // z_l, l = 1..L
    std::vector<Vec> out;  // a_0 = input, a_l = act(z_l) or z_l on the last layer
};

namespace netdetail {
inline Vec& thread_scratch() {
    thread_local Vec scratch;
    return scratch;
}

// four independent accumulators let the compiler vectorize the reduction
// without reassociating a single serial sum
inline double dot_unrolled(const double* w, const double* a, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += w[j] * a[j];
        s1 += w[j + 1] * a[j + 1];
        s2 += w[j + 2] * a[j + 2];
        s3 += w[j + 3] * a[j + 3];
    }
    for (; j < n; ++j) s0 += w[j] * a[j];
    return (s0 + s1) + (s2 + s3);
}
}  // namespace netdetail

inline Vec mlp_forward(const MlpLayout& m, const Vec& params, std::size_t offset,
                       const Vec& input, MlpTape* tape = nullptr) {
    const std::size_t nl = m.n_layers();
    if (tape) {
        // resize-only bookkeeping so a reused tape never reallocates
        tape->pre.resize(nl);
        tape->out.resize(nl + 1);
        tape->out[0] = input;
    }
    Vec a = input;
    std::size_t p = offset;
    for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t nin = m.widths[l], nout = m.widths[l + 1];
        Vec& z = tape ? tape->pre[l] : netdetail::thread_scratch();
        z.resize(nout);
        for (std::size_t i = 0; i < nout; ++i)
            z[i] = netdetail::dot_unrolled(&params[p + i * nin], a.data(), nin);
        p += nout * nin;
        if (m.bias) {
            for (std::size_t i = 0; i < nout; ++i) z[i] += params[p + i];
            p += nout;
        }
        const bool act_here = (l + 1 < nl) || m.act_on_output;
        Vec next(nout);
        for (std::size_t i = 0; i < nout; ++i)
            next[i] = act_here ? activate(m.act, z[i]) : z[i];
        if (tape) tape->out[l + 1] = next;
        a = std::move(next);
    }
    return a;
}

// Accumulates parameter gradients into grad_params (same layout as params,
// starting at offset) and returns the gradient w.r.t. the input.
inline Vec mlp_backward(const MlpLayout& m, const Vec& params, std::size_t offset,
                        const MlpTape& tape, Vec grad_out, Vec& grad_params) {
    const std::size_t nl = m.n_layers();
    // parameter offsets per layer
    std::vector<std::size_t> layer_off(nl);
    {
        std::size_t p = offset;
        for (std::size_t l = 0; l < nl; ++l) {
            layer_off[l] = p;
            p += m.widths[l + 1] * (m.widths[l] + (m.bias ? 1 : 0));
        }
    }
    Vec delta = std::move(grad_out);
    for (std::size_t l = nl; l-- > 0;) {
        const std::size_t nin = m.widths[l], nout = m.widths[l + 1];
        const bool act_here = (l + 1 < nl) || m.act_on_output;
        if (act_here)
            for (std::size_t i = 0; i < nout; ++i)
                delta[i] *= activate_deriv(m.act, tape.pre[l][i]);
        const Vec& a_prev = tape.out[l];
        const std::size_t p = layer_off[l];
        for (std::size_t i = 0; i < nout; ++i) {
            double* gw = &grad_params[p + i * nin];
            const double di = delta[i];
            for (std::size_t j = 0; j < nin; ++j) gw[j] += di * a_prev[j];
        }
        if (m.bias) {
            const std::size_t pb = p + nout * nin;
            for (std::size_t i = 0; i < nout; ++i) grad_params[pb + i] += delta[i];
        }
        Vec prev_delta(nin, 0.0);
        for (std::size_t i = 0; i < nout; ++i) {
            const double* w = &params[p + i * nin];
            const double di = delta[i];
            for (std::size_t j = 0; j < nin; ++j) prev_delta[j] += di * w[j];
        }
        delta = std::move(prev_delta);
    }
    return delta;
}

inline void mlp_init(const MlpLayout& m, Vec& params, std::size_t offset, Rng& rng,
                     bool zero_last_layer = false) {
    std::size_t p = offset;
    const std::size_t nl = m.n_layers();
    for (std::size_t l = 0; l < nl; ++l) {
        const std::size_t nin = m.widths[l], nout = m.widths[l + 1];
        const bool zero = zero_last_layer && (l + 1 == nl);
        const double scale = std::sqrt(6.0 / double(nin));
        for (std::size_t i = 0; i < nout * nin; ++i)
            params[p + i] = zero ? 0.0 : rng.uniform(-scale, scale);
        p += nout * nin;
        if (m.bias) {
            for (std::size_t i = 0; i < nout; ++i) params[p + i] = 0.0;
            p += nout;
        }
    }
}

// Time-conditioned network: a state block and a time block feed a joint head.
//   state block: d -> state_widths...        (activation on every layer)
//   time block : enc_dim -> time_widths...   (activation on every layer)
//   head       : concat -> head_widths... -> d  (final layer linear)
// The time input is the step index run through the sine positional encoding.
// Empty width lists degenerate gracefully: an empty block passes its input
// through, an empty head is a single linear layer.
struct NetSpec {
    std::size_t input_dim = 2;
    std::size_t enc_dim = 16;
    std::vector<std::size_t> state_widths = {16, 32};
    std::vector<std::size_t> time_widths = {16, 32};
    std::vector<std::size_t> head_widths = {128, 128};
    Activation act = Activation::LeakyRelu;
    bool zero_init_head = true;

    std::size_t state_out() const { return state_widths.empty() ? input_dim : state_widths.back(); }
    std::size_t time_out() const { return time_widths.empty() ? enc_dim : time_widths.back(); }

    MlpLayout state_layout() const {
        MlpLayout m;
        m.widths.push_back(input_dim);
        m.widths.insert(m.widths.end(), state_widths.begin(), state_widths.end());
        m.act = act;
        m.act_on_output = true;
        return m;
    }
    MlpLayout time_layout() const {
        MlpLayout m;
        m.widths.push_back(enc_dim);
        m.widths.insert(m.widths.end(), time_widths.begin(), time_widths.end());
        m.act = act;
        m.act_on_output = true;
        return m;
    }
    MlpLayout head_layout() const {
        MlpLayout m;
        m.widths.push_back(state_out() + time_out());
        m.widths.insert(m.widths.end(), head_widths.begin(), head_widths.end());
        m.widths.push_back(input_dim);
        m.act = act;
        m.act_on_output = false;
        return m;
    }

    std::size_t param_count() const {
        return state_layout().param_count() + time_layout().param_count() +
               head_layout().param_count();
    }
};

struct NetTape {
    MlpTape state, time, head;
    Vec enc;
};

inline Vec init_params(const NetSpec& spec, Rng& rng) {
    Vec params(spec.param_count());
    const MlpLayout sl = spec.state_layout(), tl = spec.time_layout(), hl = spec.head_layout();
    std::size_t off = 0;
    mlp_init(sl, params, off, rng);
    off += sl.param_count();
    mlp_init(tl, params, off, rng);
    off += tl.param_count();
    mlp_init(hl, params, off, rng, spec.zero_init_head);
    return params;
}

inline Vec net_forward(const Vec& params, const NetSpec& spec, double step, const Vec& x,
                       NetTape* tape = nullptr) {
    if (x.size() != spec.input_dim)
        throw std::invalid_argument("net_forward: input has dim " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(spec.input_dim));
    const MlpLayout sl = spec.state_layout(), tl = spec.time_layout(), hl = spec.head_layout();
    const std::size_t s_off = 0;
    const std::size_t t_off = sl.param_count();
    const std::size_t h_off = t_off + tl.param_count();

    const Vec enc = positional_encoding(step, spec.enc_dim);
    Vec hs = mlp_forward(sl, params, s_off, x, tape ? &tape->state : nullptr);
    Vec ht = mlp_forward(tl, params, t_off, enc, tape ? &tape->time : nullptr);
    Vec joint(hs.size() + ht.size());
    std::copy(hs.begin(), hs.end(), joint.begin());
    std::copy(ht.begin(), ht.end(), joint.begin() + hs.size());
    if (tape) tape->enc = enc;
    return mlp_forward(hl, params, h_off, joint, tape ? &tape->head : nullptr);
}

// Backward through the whole net; accumulates into grad_params and returns
// the gradient w.r.t. the state input x.
inline Vec net_backward(const Vec& params, const NetSpec& spec, const NetTape& tape,
                        Vec grad_out, Vec& grad_params) {
    const MlpLayout sl = spec.state_layout(), tl = spec.time_layout(), hl = spec.head_layout();
    const std::size_t s_off = 0;
    const std::size_t t_off = sl.param_count();
    const std::size_t h_off = t_off + tl.param_count();

    Vec joint_grad = mlp_backward(hl, params, h_off, tape.head, std::move(grad_out), grad_params);
    const std::size_t ns = spec.state_out();
    Vec gs(joint_grad.begin(), joint_grad.begin() + ns);
    Vec gt(joint_grad.begin() + ns, joint_grad.end());
    mlp_backward(tl, params, t_off, tape.time, std::move(gt), grad_params);
    return mlp_backward(sl, params, s_off, tape.state, std::move(gs), grad_params);
}

// Mean over the batch of squared residual norms and its exact gradient.
inline double batch_loss_grad(const Vec& params, const NetSpec& spec,
                              const std::vector<std::pair<double, Vec>>& inputs,
                              const std::vector<Vec>& targets, Vec& grad) {
    if (inputs.empty() || inputs.size() != targets.size())
        throw std::invalid_argument("batch_loss_grad: empty batch or size mismatch");
    grad.assign(params.size(), 0.0);
    const double inv_b = 1.0 / double(inputs.size());
    double loss = 0.0;
    NetTape tape;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        const Vec out = net_forward(params, spec, inputs[b].first, inputs[b].second, &tape);
        if (out.size() != targets[b].size())
            throw std::invalid_argument("batch_loss_grad: target dim mismatch");
        Vec dres(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double r = out[i] - targets[b][i];
            loss += r * r * inv_b;
            dres[i] = 2.0 * r * inv_b;
        }
        net_backward(params, spec, tape, std::move(dres), grad);
    }
    return loss;
}

// Gradient of <net(step, x), v> w.r.t. x; exact Jacobian-vector pairing used
// by the Hutchinson divergence estimator.
inline Vec net_input_vjp(const Vec& params, const NetSpec& spec, double step, const Vec& x,
                         const Vec& v) {
    NetTape tape;
    net_forward(params, spec, step, x, &tape);
    Vec scratch(params.size(), 0.0);
    return net_backward(params, spec, tape, v, scratch);
}

}  // namespace dsb
