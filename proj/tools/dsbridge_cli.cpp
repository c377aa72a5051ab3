// Command-line driver: train, sample, gauss-ipf, sinkhorn, likelihood, eval.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dsbridge/bridge.hpp"
#include "dsbridge/config.hpp"
#include "dsbridge/flow.hpp"
#include "dsbridge/gauss.hpp"
#include "dsbridge/io.hpp"
#include "dsbridge/metrics.hpp"
#include "dsbridge/sinkhorn.hpp"

namespace fs = std::filesystem;
using namespace dsb;

namespace {

fs::path resolve_out(const std::string& out) {
    fs::path p(out);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("DSBRIDGE_OUT_ROOT")) return fs::path(root) / p;
    return p;
}

std::string direction_name(char c) { return c == 'b' ? "backward" : "forward"; }

void write_points_csv(const fs::path& path, const std::string& hash, std::uint64_t seed,
                      const std::vector<Vec>& points, std::size_t dim) {
    std::vector<std::string> cols;
    for (std::size_t i = 1; i <= dim; ++i) cols.push_back("x" + std::to_string(i));
    CsvWriter csv(hash, seed, cols);
    for (const auto& p : points) {
        std::vector<std::string> row;
        for (double v : p) row.push_back(format_double(v));
        csv.row(row);
    }
    csv.write(path);
}

void render_scatter_svg(const fs::path& path, const std::vector<Vec>& points) {
    double lo = -1.0, hi = 1.0;
    for (const auto& p : points)
        for (double v : p) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double span = hi - lo, size = 480.0, pad = 20.0;
    auto sx = [&](double v) { return pad + (v - lo) / span * (size - 2 * pad); };
    auto sy = [&](double v) { return size - pad - (v - lo) / span * (size - 2 * pad); };
    std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='480' height='480'>\n";
    for (const auto& p : points) {
        const double x = sx(p[0]);
        const double y = sy(p.size() > 1 ? p[1] : 0.0);
        svg += "<circle cx='" + std::to_string(x) + "' cy='" + std::to_string(y) +
               "' r='1.5' fill='steelblue' fill-opacity='0.6'/>\n";
    }
    svg += "</svg>\n";
    atomic_write(path, svg);
}

void flush_diagnostics(const fs::path& out_dir, const std::string& hash, std::uint64_t seed,
                       const std::vector<HalfBridgeDiag>& diags,
                       const std::vector<IterEval>& evals) {
    // headline file uses the EMA-parameter metrics; the raw-parameter twin
    // carries the same schema
    for (bool raw : {false, true}) {
        CsvWriter csv(hash, seed,
                      {"ipf_iter", "direction", "grad_steps", "final_loss", "mean_err", "var_err",
                       "cov_err", "sliced_wasserstein", "wall_seconds"});
        for (const auto& d : diags) {
            const IterEval* ev = nullptr;
            for (const auto& e : evals)
                if (e.ipf_iter == d.ipf_iter) ev = &e;
            csv.row({std::to_string(d.ipf_iter), direction_name(d.direction),
                     std::to_string(d.grad_steps), format_double(d.final_loss),
                     ev ? format_double(raw ? ev->raw_mean_err : ev->mean_err) : "",
                     ev ? format_double(raw ? ev->raw_var_err : ev->var_err) : "",
                     ev ? format_double(raw ? ev->raw_cov_err : ev->cov_err) : "",
                     ev ? format_double(raw ? ev->raw_sliced_w : ev->sliced_w) : "",
                     format_double(d.wall_seconds)});
        }
        csv.write(out_dir / (raw ? "diagnostics_raw.csv" : "diagnostics.csv"));
    }
}

struct LoadedRun {
    ExperimentConfig cfg;
    ResolvedExperiment exp;
    RunCheckpoint ck;
    std::string hash;
};

LoadedRun load_run(const std::string& checkpoint_path) {
    LoadedRun lr;
    lr.ck = load_run_checkpoint(checkpoint_path);
    lr.cfg = parse_config(lr.ck.config_text);
    lr.exp = resolve_experiment(lr.cfg);
    lr.hash = config_hash_hex(lr.cfg);
    return lr;
}

// trainer preloaded with the checkpointed model state
DsbTrainer trainer_from(const LoadedRun& lr) {
    DsbTrainer trainer(lr.exp.dsb, lr.exp.data, lr.exp.prior, lr.cfg.seed);
    trainer.run().backward = lr.ck.backward;
    trainer.run().forward = lr.ck.forward;
    trainer.run().diags = lr.ck.diags;
    trainer.run().evals = lr.ck.evals;
    return trainer;
}

int cmd_train(const std::string& config_path, std::int64_t seed_override,
              const std::string& out_override, bool resume, bool render, bool print_config,
              std::size_t dump_trajectories) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : parse_config(read_file(config_path));
    if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (print_config) {
        std::cout << serialize_config(cfg);
        return 0;
    }
    ResolvedExperiment exp = resolve_experiment(cfg);
    const std::string hash = config_hash_hex(cfg);
    const fs::path out_dir = resolve_out(cfg.out_dir);
    fs::create_directories(out_dir);
    const fs::path run_ck_path = out_dir / "run_checkpoint.bin";

    DsbTrainer trainer(exp.dsb, exp.data, exp.prior, cfg.seed);
    std::size_t start_iter = 0;
    bool start_with_forward = false;
    if (resume && fs::exists(run_ck_path)) {
        RunCheckpoint ck = load_run_checkpoint(run_ck_path);
        if (fnv1a64(ck.config_text) != fnv1a64(serialize_config(cfg)))
            throw std::runtime_error("resume: checkpoint was produced by a different config");
        trainer.run().backward = ck.backward;
        trainer.run().forward = ck.forward;
        trainer.run().diags = ck.diags;
        trainer.run().evals = ck.evals;
        start_iter = ck.iter;
        if (ck.last_direction == 'b' &&
            !(ck.iter + 1 == exp.dsb.n_ipf_iters && exp.dsb.skip_last_forward)) {
            start_with_forward = true;
        } else if (ck.last_direction != 0) {
            start_iter = ck.iter + 1;
        }
        std::cerr << "resuming at iteration " << start_iter
                  << (start_with_forward ? " (forward half)" : "") << "\n";
    }

    auto save_state = [&](std::size_t iter, char dir) {
        RunCheckpoint ck;
        ck.config_text = serialize_config(cfg);
        ck.iter = std::uint32_t(iter);
        ck.last_direction = dir;
        ck.spec = exp.dsb.net;
        ck.backward = trainer.run().backward;
        ck.forward = trainer.run().forward;
        ck.diags = trainer.run().diags;
        ck.evals = trainer.run().evals;
        save_run_checkpoint(run_ck_path, ck);
        const std::string tag = "ckpt_iter" + std::to_string(iter) + "_" + dir + ".bin";
        save_net_checkpoint(out_dir / tag, exp.dsb.net,
                            dir == 'b' ? trainer.run().backward : trainer.run().forward);
        flush_diagnostics(out_dir, hash, cfg.seed, trainer.run().diags, trainer.run().evals);
    };

    for (std::size_t iter = start_iter; iter < exp.dsb.n_ipf_iters; ++iter) {
        if (!(iter == start_iter && start_with_forward)) {
            auto diag = trainer.train_backward(iter);
            auto ev = trainer.evaluate(iter, exp.gaussian_pair ? &exp.oracle : nullptr);
            trainer.run().iters_completed = iter + 1;
            std::cerr << "iter " << iter << " backward: loss " << diag.final_loss << ", sw "
                      << ev.sliced_w << "\n";
            save_state(iter, 'b');
            if (iter + 1 == exp.dsb.n_ipf_iters && exp.dsb.skip_last_forward) break;
        }
        auto diag = trainer.train_forward(iter);
        std::cerr << "iter " << iter << " forward: loss " << diag.final_loss << "\n";
        save_state(iter, 'f');
    }

    // terminal artifacts: samples, snapshots, optional rendering
    Rng sample_rng = Rng(cfg.seed).substream(0x5a);
    auto samples = trainer.generate_samples(cfg.eval_samples, sample_rng);
    write_points_csv(out_dir / "samples.csv", hash, cfg.seed, samples, exp.dsb.net.input_dim);
    if (render) render_scatter_svg(out_dir / "samples.svg", samples);
    if (!cfg.snapshot_times.empty()) {
        Rng snap_rng = Rng(cfg.seed).substream(0x5b);
        auto snaps = marginal_snapshots(trainer.backward_map(cfg.eval_use_ema), exp.dsb.schedule,
                                        cfg.snapshot_times, cfg.eval_samples, exp.prior, snap_rng,
                                        exp.dsb.sim);
        for (std::size_t s = 0; s < snaps.size(); ++s) {
            const std::string stem = "snapshot_t" + format_double(cfg.snapshot_times[s]);
            write_points_csv(out_dir / (stem + ".csv"), hash, cfg.seed, snaps[s],
                             exp.dsb.net.input_dim);
            if (render) render_scatter_svg(out_dir / (stem + ".svg"), snaps[s]);
        }
    }
    if (dump_trajectories > 0) {
        Rng dump_rng = Rng(cfg.seed).substream(0x5c);
        std::vector<Vec> x_n(dump_trajectories);
        Rng prior_rng = dump_rng.substream(0);
        for (auto& x : x_n) x = exp.prior(prior_rng);
        Rng path_rng = dump_rng.substream(1);
        auto trajs = em_backward(x_n, trainer.backward_map(cfg.eval_use_ema), exp.dsb.schedule,
                                 path_rng, exp.dsb.sim);
        dump_trajectories_csv(out_dir / "trajectories.csv", hash, cfg.seed, trajs,
                              exp.dsb.schedule);
    }
    std::cout << "run complete: " << out_dir.string() << "\n";
    return 0;
}

int cmd_sample(const std::string& checkpoint, std::size_t n, std::uint64_t seed,
               const std::string& out) {
    LoadedRun lr = load_run(checkpoint);
    DsbTrainer trainer = trainer_from(lr);
    std::vector<Vec> samples;
    if (n > 0) {
        Rng rng = Rng(seed).substream(0x5a);
        samples = trainer.generate_samples(n, rng);
    }
    write_points_csv(resolve_out(out), lr.hash, seed, samples, lr.exp.dsb.net.input_dim);
    return 0;
}

int cmd_gauss_ipf(double alpha, double beta, std::size_t n_iters, const std::string& out) {
    const double gstar = gauss_ipf_fixed_point(alpha, beta);
    CsvWriter csv("gauss-ipf", 0, {"n", "gamma_n", "abs_err", "ratio"});
    double g = 0.0;
    double prev_err = std::abs(g - gstar);
    csv.row({"0", format_double(g), format_double(prev_err), ""});
    for (std::size_t n = 1; n <= n_iters; ++n) {
        g = gauss_ipf_step(g, alpha, beta);
        const double err = std::abs(g - gstar);
        csv.row({std::to_string(n), format_double(g), format_double(err),
                 prev_err > 0.0 ? format_double(err / prev_err) : ""});
        prev_err = err;
    }
    csv.write(resolve_out(out));
    return 0;
}

int cmd_sinkhorn(double a, std::size_t grid_points, double grid_halfwidth, double variance,
                 std::size_t max_iters, double tol, const std::string& out_prefix) {
    auto grid = make_uniform_grid(-grid_halfwidth, grid_halfwidth, grid_points);
    auto c = discretize_gaussian_case(a, grid, variance);
    auto res = run_discrete_ipf(c.h, c.mu0, c.mu1, c.nu0, c.nu1, max_iters, tol);
    if (!res.converged)
        std::cerr << "warning: not converged within " << max_iters << " half-steps\n";

    const fs::path prefix = resolve_out(out_prefix);
    CsvWriter trace("sinkhorn", 0, {"iter", "kl_fwd", "kl_bwd", "tv_step", "tv_marg0", "tv_marg1"});
    for (const auto& st : res.trace)
        trace.row({std::to_string(st.iter), format_double(st.kl_step_fwd),
                   format_double(st.kl_step_bwd), format_double(st.tv_step),
                   format_double(st.tv_marg0), format_double(st.tv_marg1)});
    trace.write(prefix.string() + "_trace.csv");

    CsvWriter coupling("sinkhorn", 0, {"i", "j", "x_i", "y_j", "mass"});
    for (std::size_t i = 0; i < grid_points; ++i)
        for (std::size_t j = 0; j < grid_points; ++j)
            coupling.row({std::to_string(i), std::to_string(j), format_double(grid.points[i]),
                          format_double(grid.points[j]), format_double(res.coupling(i, j))});
    coupling.write(prefix.string() + "_coupling.csv");
    return res.converged ? 0 : 3;
}

int cmd_likelihood(const std::string& checkpoint, const std::string& points_path,
                   const std::string& out, const std::string& direction, std::size_t probes,
                   std::uint64_t seed) {
    LoadedRun lr = load_run(checkpoint);
    if (lr.exp.prior_spec.is_dataset)
        throw std::runtime_error("likelihood: needs a gaussian prior for the terminal density");
    DsbTrainer trainer = trainer_from(lr);

    FlowField field;
    if (lr.exp.dsb.variant == LossVariant::DriftMatching && lr.ck.forward.trained) {
        // drift nets are the drifts: exact input gradients for the estimator
        const Vec& pf = lr.exp.dsb.use_ema_for_eval ? lr.ck.forward.ema.shadow
                                                    : lr.ck.forward.params;
        const Vec& pb = lr.exp.dsb.use_ema_for_eval ? lr.ck.backward.ema.shadow
                                                    : lr.ck.backward.params;
        field = flow_field_from_drift_nets(lr.exp.dsb.net, pf, pb, lr.exp.dsb.schedule);
    } else {
        field = flow_field_from_maps(trainer.forward_map(lr.exp.dsb.use_ema_for_eval),
                                     trainer.backward_map(lr.exp.dsb.use_ema_for_eval),
                                     lr.exp.dsb.schedule);
    }

    const PriorSpec prior = lr.exp.prior_spec;
    auto log_prior = [prior](const Vec& x) { return prior.log_density(x); };
    const FlowDirection dir =
        direction == "forward" ? FlowDirection::FromPrior : FlowDirection::FromData;

    auto points = read_points_csv(points_path);
    CsvWriter csv(lr.hash, seed, {"point_id", "log_lik", "div_stderr", "steps"});
    Rng rng(seed);
    for (std::size_t i = 0; i < points.size(); ++i) {
        Rng point_rng = rng.substream(i);
        auto res = log_likelihood(field, lr.exp.dsb.schedule, points[i], dir, log_prior, probes,
                                  probes ? &point_rng : nullptr);
        csv.row({std::to_string(i), format_double(res.log_lik), format_double(res.div_stderr),
                 std::to_string(res.steps)});
    }
    csv.write(resolve_out(out));
    return 0;
}

int cmd_eval(const std::string& checkpoint, std::size_t n, std::uint64_t seed,
             const std::string& out) {
    LoadedRun lr = load_run(checkpoint);
    DsbTrainer trainer = trainer_from(lr);
    Rng rng = Rng(seed).substream(0xe7);
    std::vector<Vec> terminal;
    auto gen = trainer.generate_samples(n, rng, &terminal);

    Rng data_rng = Rng(seed).substream(0xe8);
    std::vector<Vec> data(n), data2(n);
    for (auto& x : data) x = lr.exp.data(data_rng);
    for (auto& x : data2) x = lr.exp.data(data_rng);

    Rng sw_rng = Rng(seed).substream(0xe9);
    const double sw = sliced_wasserstein(gen, data, lr.exp.dsb.eval_projections, sw_rng);
    // same-distribution baseline: two independent draws from the target
    const double sw_baseline =
        sliced_wasserstein(data2, data, lr.exp.dsb.eval_projections, sw_rng);
    const double ed = energy_distance(gen, data);

    GaussStats gs = empirical_gauss_stats(gen, &terminal);
    GaussStats ds = empirical_gauss_stats(data);
    double mean_err = 0.0, var_err = 0.0;
    for (std::size_t i = 0; i < gs.mean.size(); ++i) {
        mean_err = std::max(mean_err, std::abs(gs.mean[i] - ds.mean[i]));
        var_err = std::max(var_err, std::abs(gs.variance[i] - ds.variance[i]));
    }
    CsvWriter csv(lr.hash, seed,
                  {"n_samples", "sliced_wasserstein", "sw_same_dist_baseline", "energy_distance",
                   "mean_err", "var_err", "cross_cov01"});
    csv.row({std::to_string(n), format_double(sw), format_double(sw_baseline), format_double(ed),
             format_double(mean_err), format_double(var_err), format_double(gs.cross_cov01)});
    csv.write(resolve_out(out));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schrodinger bridge solver between sampled distributions"};
    app.require_subcommand(1);

    std::string config_path, out, checkpoint, points_path, direction = "backward";
    std::string out_prefix = "sinkhorn";
    std::int64_t seed_override = -1;
    std::uint64_t seed = 1;
    std::size_t n = 1000, iters = 100, probes = 0, grid_points = 60;
    double alpha = 0.5, beta = 1.0, a = 0.1, variance = 1.0, tol = 1e-10, halfwidth = 5.5;
    std::size_t max_iters = 10000, dump_trajectories = 0;
    bool resume = false, render = false, print_config = false;

    auto* train = app.add_subcommand("train", "run the bridge training loop");
    train->add_option("--config", config_path, "experiment config file");
    train->add_option("--seed", seed_override, "override [run] seed");
    train->add_option("--out", out, "override [run] out_dir");
    train->add_flag("--resume", resume, "continue from the run checkpoint in out_dir");
    train->add_flag("--render", render, "also write SVG scatter plots");
    train->add_flag("--print-config", print_config, "print the effective config and exit");
    train->add_option("--dump-trajectories", dump_trajectories,
                      "also write this many backward sample paths as CSV");

    auto* sample = app.add_subcommand("sample", "draw samples from a trained bridge");
    sample->add_option("--checkpoint", checkpoint, "run checkpoint file")->required();
    sample->add_option("--n", n, "number of samples");
    sample->add_option("--seed", seed, "sampling seed");
    sample->add_option("--out", out, "output CSV")->required();

    auto* gipf = app.add_subcommand("gauss-ipf", "scalar gaussian IPF recursion trace");
    gipf->add_option("--alpha", alpha, "coupling parameter in (0,1)");
    gipf->add_option("--beta", beta, "marginal parameter (enters as beta^2)");
    gipf->add_option("--iters", iters, "iterations");
    gipf->add_option("--out", out, "output CSV")->required();

    auto* sink = app.add_subcommand("sinkhorn", "discrete IPF oracle on a 1-d grid");
    sink->add_option("--a", a, "marginals are N(-a,1) and N(+a,1)");
    sink->add_option("--grid-points", grid_points, "grid size (>= 20)");
    sink->add_option("--grid-halfwidth", halfwidth, "grid covers [-w, w]");
    sink->add_option("--variance", variance, "reference kernel variance");
    sink->add_option("--max-iters", max_iters, "max half-steps");
    sink->add_option("--tol", tol, "marginal TV tolerance");
    sink->add_option("--out-prefix", out_prefix, "output file prefix");

    auto* lik = app.add_subcommand("likelihood", "probability-flow log-likelihoods");
    lik->add_option("--checkpoint", checkpoint, "run checkpoint file")->required();
    lik->add_option("--points", points_path, "input points CSV")->required();
    lik->add_option("--out", out, "output CSV")->required();
    lik->add_option("--direction", direction, "backward (from data) or forward (from prior)");
    lik->add_option("--probes", probes, "Hutchinson probes (0 = exact divergence)");
    lik->add_option("--seed", seed, "probe seed");

    auto* evalc = app.add_subcommand("eval", "sample-quality metrics for a trained bridge");
    evalc->add_option("--checkpoint", checkpoint, "run checkpoint file")->required();
    evalc->add_option("--n", n, "samples per side");
    evalc->add_option("--seed", seed, "evaluation seed");
    evalc->add_option("--out", out, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train)
            return cmd_train(config_path, seed_override, out, resume, render, print_config,
                             dump_trajectories);
        if (*sample) return cmd_sample(checkpoint, n, seed, out);
        if (*gipf) return cmd_gauss_ipf(alpha, beta, iters, out);
        if (*sink)
            return cmd_sinkhorn(a, grid_points, halfwidth, variance, max_iters, tol, out_prefix);
        if (*lik) return cmd_likelihood(checkpoint, points_path, out, direction, probes, seed);
        if (*evalc) return cmd_eval(checkpoint, n, seed, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
