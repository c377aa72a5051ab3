#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsbridge/bridge.hpp"
#include "dsbridge/net.hpp"

namespace dsb {

// All artifacts are written temp-then-rename so a crash never leaves a
// truncated file behind.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
        out.write(content.data(), std::streamsize(content.size()));
        if (!out) throw std::runtime_error("atomic_write: short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_file: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 17 significant digits: doubles round-trip exactly through the CSVs.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    explicit Reader(const std::string& b) : buf(b) {}

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t((unsigned char)buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t((unsigned char)buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

inline void put_widths(std::string& out, const std::vector<std::size_t>& w) {
    put_u32(out, std::uint32_t(w.size()));
    for (auto x : w) put_u32(out, std::uint32_t(x));
}
inline std::vector<std::size_t> get_widths(Reader& r) {
    std::vector<std::size_t> w(r.u32());
    for (auto& x : w) x = r.u32();
    return w;
}
inline void put_vec(std::string& out, const Vec& v) {
    put_u64(out, v.size());
    for (double d : v) put_f64(out, d);
}
inline Vec get_vec(Reader& r) {
    Vec v(r.u64());
    for (auto& d : v) d = r.f64();
    return v;
}

inline void put_netspec(std::string& out, const NetSpec& spec) {
    put_u32(out, std::uint32_t(spec.input_dim));
    put_u32(out, std::uint32_t(spec.enc_dim));
    put_widths(out, spec.state_widths);
    put_widths(out, spec.time_widths);
    put_widths(out, spec.head_widths);
    put_u32(out, std::uint32_t(spec.act));
    put_u32(out, spec.zero_init_head ? 1 : 0);
}
inline NetSpec get_netspec(Reader& r) {
    NetSpec spec;
    spec.input_dim = r.u32();
    spec.enc_dim = r.u32();
    spec.state_widths = get_widths(r);
    spec.time_widths = get_widths(r);
    spec.head_widths = get_widths(r);
    spec.act = Activation(r.u32());
    spec.zero_init_head = r.u32() != 0;
    return spec;
}

}  // namespace detail

// Network checkpoint: header (format version, architecture, input dim,
// encoding width), then the flat parameter and EMA vectors as 64-bit
// little-endian floats. Optionally carries the optimizer state so training
// resumes exactly.
inline std::string encode_net_checkpoint(const NetSpec& spec, const DirectionState& st) {
    std::string out = "DSBNET01";
    detail::put_u32(out, 1);  // format version
    detail::put_netspec(out, spec);
    detail::put_vec(out, st.params);
    detail::put_vec(out, st.ema.shadow);
    detail::put_f64(out, st.ema.rate);
    detail::put_u32(out, st.trained ? 1 : 0);
    detail::put_u32(out, 1);  // optimizer state present
    detail::put_vec(out, st.adam.m);
    detail::put_vec(out, st.adam.v);
    detail::put_u64(out, st.adam.step);
    detail::put_u32(out, std::uint32_t(st.stack.size()));
    for (const auto& s : st.stack) detail::put_vec(out, s);
    return out;
}

inline DirectionState decode_net_checkpoint(detail::Reader& r, NetSpec* spec_out = nullptr) {
    if (r.bytes(8) != "DSBNET01") throw std::runtime_error("checkpoint: bad magic");
    if (r.u32() != 1) throw std::runtime_error("checkpoint: unsupported version");
    NetSpec spec = detail::get_netspec(r);
    if (spec_out) *spec_out = spec;
    DirectionState st;
    st.params = detail::get_vec(r);
    st.ema.shadow = detail::get_vec(r);
    st.ema.rate = r.f64();
    st.trained = r.u32() != 0;
    if (r.u32()) {
        st.adam.m = detail::get_vec(r);
        st.adam.v = detail::get_vec(r);
        st.adam.step = r.u64();
    }
    st.stack.resize(r.u32());
    for (auto& s : st.stack) s = detail::get_vec(r);
    if (st.params.size() != spec.param_count())
        throw std::runtime_error("checkpoint: parameter count does not match the architecture");
    return st;
}

inline void save_net_checkpoint(const std::filesystem::path& path, const NetSpec& spec,
                                const DirectionState& st) {
    atomic_write(path, encode_net_checkpoint(spec, st));
}

inline DirectionState load_net_checkpoint(const std::filesystem::path& path,
                                          NetSpec* spec_out = nullptr) {
    const std::string buf = read_file(path);
    detail::Reader r(buf);
    return decode_net_checkpoint(r, spec_out);
}

// Full run checkpoint: the experiment config text, progress marker, both
// direction states and the accumulated diagnostics.
struct RunCheckpoint {
    std::string config_text;
    std::uint32_t iter = 0;
    char last_direction = 0;  // 'b' or 'f', last completed half-bridge
    NetSpec spec;
    DirectionState backward;
    DirectionState forward;
    std::vector<HalfBridgeDiag> diags;
    std::vector<IterEval> evals;
};

inline void save_run_checkpoint(const std::filesystem::path& path, const RunCheckpoint& ck) {
    std::string out = "DSBRUN01";
    detail::put_u64(out, ck.config_text.size());
    out += ck.config_text;
    detail::put_u32(out, ck.iter);
    detail::put_u32(out, std::uint32_t(ck.last_direction));
    out += encode_net_checkpoint(ck.spec, ck.backward);
    out += encode_net_checkpoint(ck.spec, ck.forward);
    detail::put_u32(out, std::uint32_t(ck.diags.size()));
    for (const auto& d : ck.diags) {
        detail::put_u64(out, d.ipf_iter);
        detail::put_u32(out, std::uint32_t(d.direction));
        detail::put_u64(out, d.grad_steps);
        detail::put_f64(out, d.first_loss);
        detail::put_f64(out, d.final_loss);
        detail::put_f64(out, d.wall_seconds);
    }
    detail::put_u32(out, std::uint32_t(ck.evals.size()));
    for (const auto& e : ck.evals) {
        detail::put_u64(out, e.ipf_iter);
        detail::put_f64(out, e.mean_err);
        detail::put_f64(out, e.var_err);
        detail::put_f64(out, e.cov_err);
        detail::put_f64(out, e.sliced_w);
        detail::put_f64(out, e.raw_mean_err);
        detail::put_f64(out, e.raw_var_err);
        detail::put_f64(out, e.raw_cov_err);
        detail::put_f64(out, e.raw_sliced_w);
    }
    atomic_write(path, out);
}

inline RunCheckpoint load_run_checkpoint(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    detail::Reader r(buf);
    if (r.bytes(8) != "DSBRUN01") throw std::runtime_error("run checkpoint: bad magic");
    RunCheckpoint ck;
    ck.config_text = r.bytes(r.u64());
    ck.iter = r.u32();
    ck.last_direction = char(r.u32());
    ck.backward = decode_net_checkpoint(r, &ck.spec);
    ck.forward = decode_net_checkpoint(r);
    ck.diags.resize(r.u32());
    for (auto& d : ck.diags) {
        d.ipf_iter = r.u64();
        d.direction = char(r.u32());
        d.grad_steps = r.u64();
        d.first_loss = r.f64();
        d.final_loss = r.f64();
        d.wall_seconds = r.f64();
    }
    ck.evals.resize(r.u32());
    for (auto& e : ck.evals) {
        e.ipf_iter = r.u64();
        e.mean_err = r.f64();
        e.var_err = r.f64();
        e.cov_err = r.f64();
        e.sliced_w = r.f64();
        e.raw_mean_err = r.f64();
        e.raw_var_err = r.f64();
        e.raw_cov_err = r.f64();
        e.raw_sliced_w = r.f64();
    }
    return ck;
}

// CSV with a provenance comment row naming the producing config hash and
// seed, then a header row, then data rows.
class CsvWriter {
public:
    CsvWriter(std::string config_hash_hex, std::uint64_t seed,
              const std::vector<std::string>& columns) {
        body_ = "# config_hash=" + config_hash_hex + " seed=" + std::to_string(seed) + "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) body_ += ",";
            body_ += columns[i];
        }
        body_ += "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) body_ += ",";
            body_ += cells[i];
        }
        body_ += "\n";
    }

    const std::string& content() const { return body_; }
    void write(const std::filesystem::path& path) const { atomic_write(path, body_); }

private:
    std::string body_;
};

// Trajectory dump: one row per visited state, columns (traj_id, k, t_k, x_1..x_d).
inline void dump_trajectories_csv(const std::filesystem::path& path,
                                  const std::string& config_hash_hex, std::uint64_t seed,
                                  const std::vector<Trajectory>& trajs,
                                  const StepSchedule& sched) {
    std::vector<std::string> cols = {"traj_id", "k", "t_k"};
    const std::size_t dim = trajs.empty() ? 0 : trajs[0].states[0].size();
    for (std::size_t i = 1; i <= dim; ++i) cols.push_back("x" + std::to_string(i));
    CsvWriter csv(config_hash_hex, seed, cols);
    for (std::size_t j = 0; j < trajs.size(); ++j)
        for (std::size_t k = 0; k < trajs[j].states.size(); ++k) {
            std::vector<std::string> row = {std::to_string(j), std::to_string(k),
                                            format_double(sched.times[k])};
            for (double v : trajs[j].states[k]) row.push_back(format_double(v));
            csv.row(row);
        }
    csv.write(path);
}

// Points CSV: one row per point, columns x1..xd (plus optional id column).
inline std::vector<Vec> read_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_points_csv: cannot open " + path.string());
    std::vector<Vec> points;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        // skip a header row of non-numeric cells
        bool numeric = line.find_first_not_of("0123456789+-.eE, \t\r") == std::string::npos;
        if (!numeric) continue;
        Vec p;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell.empty()) continue;
            p.push_back(std::stod(cell));
        }
        if (!p.empty()) points.push_back(std::move(p));
    }
    return points;
}

}  // namespace dsb
