#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsbridge/bridge.hpp"
#include "dsbridge/datasets.hpp"
#include "dsbridge/io.hpp"

namespace dsb {

// Flat sectioned key = value experiment description. Parsing validates
// everything before any compute starts; unknown keys are rejected.
struct ExperimentConfig {
    // [run]
    std::uint64_t seed = 1;
    std::string out_dir = "run";
    // [schedule]
    std::string schedule_kind = "uniform";  // uniform | symmetric
    std::size_t n_steps = 20;
    double gamma = 0.01;
    double gamma_min = 1e-5;
    double gamma_max = 1e-1;
    // [reference]
    double alpha = 0.0;
    bool alpha_from_prior = false;  // alpha = 1 / prior variance
    // [data]
    DatasetSpec data;
    // [prior]
    std::string prior_kind = "gaussian";  // gaussian | fit_to_data | dataset
    double prior_mean_offset = 0.0;       // gaussian prior mean = offset * 1
    double prior_variance = 1.0;
    double prior_inflation = 1.0;       // fit_to_data
    std::size_t prior_fit_samples = 4096;
    DatasetSpec prior_dataset;          // dataset interpolation
    // [dsb]
    std::string variant = "drift";  // drift | mean | score
    std::size_t n_ipf_iters = 8;
    std::size_t half_bridge_steps = 5000;
    std::size_t batch_size = 128;
    std::size_t cache_size = 2000;
    std::size_t refresh_every = 1000;
    bool warm_start = true;
    bool first_iter_closed_form = true;
    bool skip_last_forward = false;
    // [optim]
    double lr = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double ema_rate = 0.999;
    // [net]
    std::size_t enc_dim = 16;
    std::vector<std::size_t> state_widths = {16, 32};
    std::vector<std::size_t> time_widths = {16, 32};
    std::vector<std::size_t> head_widths = {128, 128};
    std::string activation = "leaky_relu";
    // [eval]
    std::size_t eval_samples = 2000;
    std::size_t eval_projections = 50;
    bool eval_use_ema = true;
    std::vector<double> snapshot_times;
    // [sim]
    double max_norm = 1e6;
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::size_t> parse_width_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(std::stoul(cell));
    }
    return out;
}

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(std::stod(cell));
    }
    return out;
}

inline std::string join_widths(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

inline std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_double(v[i]);
    }
    return s;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: key '" + key + "' wants true/false, got '" + v + "'");
}

}  // namespace cfgdetail

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::string section;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = cfgdetail::trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = section + "." + cfgdetail::trim(line.substr(0, eq));
        const std::string val = cfgdetail::trim(line.substr(eq + 1));
        auto bad = [&](const std::string& why) {
            return std::invalid_argument("config line " + std::to_string(lineno) + " ('" + key +
                                         "'): " + why);
        };
        try {
            if (key == "run.seed") cfg.seed = std::stoull(val);
            else if (key == "run.out_dir") cfg.out_dir = val;
            else if (key == "schedule.kind") cfg.schedule_kind = val;
            else if (key == "schedule.n_steps") cfg.n_steps = std::stoul(val);
            else if (key == "schedule.gamma") cfg.gamma = std::stod(val);
            else if (key == "schedule.gamma_min") cfg.gamma_min = std::stod(val);
            else if (key == "schedule.gamma_max") cfg.gamma_max = std::stod(val);
            else if (key == "reference.alpha") cfg.alpha = std::stod(val);
            else if (key == "reference.alpha_from_prior")
                cfg.alpha_from_prior = cfgdetail::parse_bool(val, key);
            else if (key == "data.name") cfg.data.name = val;
            else if (key == "data.dim") cfg.data.dim = std::stoul(val);
            else if (key == "data.offset") cfg.data.offset = std::stod(val);
            else if (key == "data.variance") cfg.data.variance = std::stod(val);
            else if (key == "data.scale") cfg.data.scale = std::stod(val);
            else if (key == "data.noise") cfg.data.noise = std::stod(val);
            else if (key == "prior.kind") cfg.prior_kind = val;
            else if (key == "prior.mean_offset") cfg.prior_mean_offset = std::stod(val);
            else if (key == "prior.variance") cfg.prior_variance = std::stod(val);
            else if (key == "prior.inflation") cfg.prior_inflation = std::stod(val);
            else if (key == "prior.fit_samples") cfg.prior_fit_samples = std::stoul(val);
            else if (key == "prior.dataset_name") cfg.prior_dataset.name = val;
            else if (key == "prior.dataset_scale") cfg.prior_dataset.scale = std::stod(val);
            else if (key == "prior.dataset_noise") cfg.prior_dataset.noise = std::stod(val);
            else if (key == "dsb.variant") cfg.variant = val;
            else if (key == "dsb.n_ipf_iters") cfg.n_ipf_iters = std::stoul(val);
            else if (key == "dsb.half_bridge_steps") cfg.half_bridge_steps = std::stoul(val);
            else if (key == "dsb.batch_size") cfg.batch_size = std::stoul(val);
            else if (key == "dsb.cache_size") cfg.cache_size = std::stoul(val);
            else if (key == "dsb.refresh_every") cfg.refresh_every = std::stoul(val);
            else if (key == "dsb.warm_start") cfg.warm_start = cfgdetail::parse_bool(val, key);
            else if (key == "dsb.first_iter_closed_form")
                cfg.first_iter_closed_form = cfgdetail::parse_bool(val, key);
            else if (key == "dsb.skip_last_forward")
                cfg.skip_last_forward = cfgdetail::parse_bool(val, key);
            else if (key == "optim.lr") cfg.lr = std::stod(val);
            else if (key == "optim.beta1") cfg.adam_beta1 = std::stod(val);
            else if (key == "optim.beta2") cfg.adam_beta2 = std::stod(val);
            else if (key == "optim.eps") cfg.adam_eps = std::stod(val);
            else if (key == "optim.ema") cfg.ema_rate = std::stod(val);
            else if (key == "net.enc_dim") cfg.enc_dim = std::stoul(val);
            else if (key == "net.state_widths") cfg.state_widths = cfgdetail::parse_width_list(val);
            else if (key == "net.time_widths") cfg.time_widths = cfgdetail::parse_width_list(val);
            else if (key == "net.head_widths") cfg.head_widths = cfgdetail::parse_width_list(val);
            else if (key == "net.activation") cfg.activation = val;
            else if (key == "eval.samples") cfg.eval_samples = std::stoul(val);
            else if (key == "eval.projections") cfg.eval_projections = std::stoul(val);
            else if (key == "eval.use_ema") cfg.eval_use_ema = cfgdetail::parse_bool(val, key);
            else if (key == "eval.snapshot_times")
                cfg.snapshot_times = cfgdetail::parse_double_list(val);
            else if (key == "sim.max_norm") cfg.max_norm = std::stod(val);
            else throw bad("unknown key");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw bad(e.what());
        }
    }
    return cfg;
}

// Canonical form: fixed section and key order, 17-digit floats. Parsing the
// serialization reproduces the config exactly.
inline std::string serialize_config(const ExperimentConfig& c) {
    using cfgdetail::join_doubles;
    using cfgdetail::join_widths;
    std::string s;
    auto kv = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
    s += "[run]\n";
    kv("seed", std::to_string(c.seed));
    kv("out_dir", c.out_dir);
    s += "[schedule]\n";
    kv("kind", c.schedule_kind);
    kv("n_steps", std::to_string(c.n_steps));
    kv("gamma", format_double(c.gamma));
    kv("gamma_min", format_double(c.gamma_min));
    kv("gamma_max", format_double(c.gamma_max));
    s += "[reference]\n";
    kv("alpha", format_double(c.alpha));
    kv("alpha_from_prior", c.alpha_from_prior ? "true" : "false");
    s += "[data]\n";
    kv("name", c.data.name);
    kv("dim", std::to_string(c.data.dim));
    kv("offset", format_double(c.data.offset));
    kv("variance", format_double(c.data.variance));
    kv("scale", format_double(c.data.scale));
    kv("noise", format_double(c.data.noise));
    s += "[prior]\n";
    kv("kind", c.prior_kind);
    kv("mean_offset", format_double(c.prior_mean_offset));
    kv("variance", format_double(c.prior_variance));
    kv("inflation", format_double(c.prior_inflation));
    kv("fit_samples", std::to_string(c.prior_fit_samples));
    kv("dataset_name", c.prior_dataset.name);
    kv("dataset_scale", format_double(c.prior_dataset.scale));
    kv("dataset_noise", format_double(c.prior_dataset.noise));
    s += "[dsb]\n";
    kv("variant", c.variant);
    kv("n_ipf_iters", std::to_string(c.n_ipf_iters));
    kv("half_bridge_steps", std::to_string(c.half_bridge_steps));
    kv("batch_size", std::to_string(c.batch_size));
    kv("cache_size", std::to_string(c.cache_size));
    kv("refresh_every", std::to_string(c.refresh_every));
    kv("warm_start", c.warm_start ? "true" : "false");
    kv("first_iter_closed_form", c.first_iter_closed_form ? "true" : "false");
    kv("skip_last_forward", c.skip_last_forward ? "true" : "false");
    s += "[optim]\n";
    kv("lr", format_double(c.lr));
    kv("beta1", format_double(c.adam_beta1));
    kv("beta2", format_double(c.adam_beta2));
    kv("eps", format_double(c.adam_eps));
    kv("ema", format_double(c.ema_rate));
    s += "[net]\n";
    kv("enc_dim", std::to_string(c.enc_dim));
    kv("state_widths", join_widths(c.state_widths));
    kv("time_widths", join_widths(c.time_widths));
    kv("head_widths", join_widths(c.head_widths));
    kv("activation", c.activation);
    s += "[eval]\n";
    kv("samples", std::to_string(c.eval_samples));
    kv("projections", std::to_string(c.eval_projections));
    kv("use_ema", c.eval_use_ema ? "true" : "false");
    kv("snapshot_times", join_doubles(c.snapshot_times));
    s += "[sim]\n";
    kv("max_norm", format_double(c.max_norm));
    return s;
}

inline std::string config_hash_hex(const ExperimentConfig& c) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  (unsigned long long)fnv1a64(serialize_config(c)));
    return buf;
}

// Everything the training loop needs, resolved from the experiment config.
struct ResolvedExperiment {
    DsbConfig dsb;
    Sampler data;
    Sampler prior;
    PriorSpec prior_spec;  // gaussian parameters when applicable
    bool gaussian_pair = false;
    EvalOracle oracle;     // filled for the analytic gaussian pair setup
};

inline ResolvedExperiment resolve_experiment(const ExperimentConfig& c) {
    ResolvedExperiment r;
    if (c.schedule_kind == "uniform")
        r.dsb.schedule = make_uniform_schedule(c.n_steps, c.gamma);
    else if (c.schedule_kind == "symmetric")
        r.dsb.schedule = make_symmetric_schedule(c.n_steps, c.gamma_min, c.gamma_max);
    else
        throw std::invalid_argument("config: schedule.kind must be uniform or symmetric");

    if (c.variant == "drift") r.dsb.variant = LossVariant::DriftMatching;
    else if (c.variant == "mean") r.dsb.variant = LossVariant::MeanMatching;
    else if (c.variant == "score") r.dsb.variant = LossVariant::ScoreMatching;
    else throw std::invalid_argument("config: dsb.variant must be drift, mean or score");

    const std::size_t d = c.data.dimension();
    DatasetSpec data_spec = c.data;
    r.data = [data_spec](Rng& rng) { return sample_point(data_spec, rng); };

    if (c.prior_kind == "gaussian") {
        r.prior_spec.mean.assign(d, c.prior_mean_offset);
        r.prior_spec.variance = c.prior_variance;
    } else if (c.prior_kind == "fit_to_data") {
        Rng fit_rng(c.seed ^ 0xf17f17ULL);
        auto sample = sample_dataset(data_spec, c.prior_fit_samples, fit_rng);
        r.prior_spec = prior_from_data(sample, c.prior_inflation);
    } else if (c.prior_kind == "dataset") {
        r.prior_spec.is_dataset = true;
        r.prior_spec.dataset = c.prior_dataset;
        if (c.prior_dataset.dimension() != d)
            throw std::invalid_argument("config: prior dataset dimension mismatch");
    } else {
        throw std::invalid_argument("config: prior.kind must be gaussian, fit_to_data or dataset");
    }
    const PriorSpec prior_spec = r.prior_spec;
    r.prior = [prior_spec](Rng& rng) { return prior_spec.sample(rng); };

    r.dsb.ref_alpha = c.alpha;
    if (c.alpha_from_prior) {
        if (prior_spec.is_dataset)
            throw std::invalid_argument("config: alpha_from_prior needs a gaussian prior");
        r.dsb.ref_alpha = prior_spec.matched_alpha();
    }

    r.dsb.n_ipf_iters = c.n_ipf_iters;
    r.dsb.half_bridge_steps = c.half_bridge_steps;
    r.dsb.batch_size = c.batch_size;
    r.dsb.cache_size = c.cache_size;
    r.dsb.refresh_every = c.refresh_every;
    r.dsb.warm_start = c.warm_start;
    r.dsb.first_iter_closed_form = c.first_iter_closed_form;
    r.dsb.skip_last_forward = c.skip_last_forward;
    r.dsb.adam.lr = c.lr;
    r.dsb.adam.beta1 = c.adam_beta1;
    r.dsb.adam.beta2 = c.adam_beta2;
    r.dsb.adam.eps = c.adam_eps;
    r.dsb.ema_rate = c.ema_rate;
    r.dsb.eval_samples = c.eval_samples;
    r.dsb.eval_projections = c.eval_projections;
    r.dsb.use_ema_for_eval = c.eval_use_ema;
    r.dsb.sim.max_norm = c.max_norm;

    r.dsb.net.input_dim = d;
    r.dsb.net.enc_dim = c.enc_dim;
    r.dsb.net.state_widths = c.state_widths;
    r.dsb.net.time_widths = c.time_widths;
    r.dsb.net.head_widths = c.head_widths;
    if (c.activation == "leaky_relu") r.dsb.net.act = Activation::LeakyRelu;
    else if (c.activation == "relu") r.dsb.net.act = Activation::Relu;
    else if (c.activation == "tanh") r.dsb.net.act = Activation::Tanh;
    else throw std::invalid_argument("config: net.activation must be leaky_relu, relu or tanh");

    // analytic ground truth when bridging N(offset, I) and N(-offset, I)
    // under a Brownian reference with unit transition variance (2T = 1)
    if (c.data.name == "gaussian" && c.prior_kind == "gaussian" && r.dsb.ref_alpha == 0.0 &&
        c.data.variance == 1.0 && c.prior_variance == 1.0 &&
        c.prior_mean_offset == -c.data.offset &&
        std::abs(2.0 * r.dsb.schedule.horizon() - 1.0) < 1e-12) {
        r.gaussian_pair = true;
        r.oracle.mean.assign(d, c.data.offset);
        r.oracle.variance.assign(d, 1.0);
        r.oracle.cross_cov01 = (std::sqrt(5.0) - 1.0) / 2.0;
    }

    r.dsb.validate();
    return r;
}

}  // namespace dsb
