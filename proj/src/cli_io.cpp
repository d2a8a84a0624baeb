#include "vpc/cli_io.hpp"

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

namespace vpc {

namespace {

using Slot = std::variant<double RunConfig::*, int RunConfig::*, std::uint64_t RunConfig::*>;

struct KeyEntry {
    ConfigKey key;
    Slot slot;
};

const std::vector<KeyEntry>& entries() {
    static const std::vector<KeyEntry> e = {
        {{"T", true, "final time"}, &RunConfig::T},
        {{"lambda", true, "regularization weight, >= 0"}, &RunConfig::lambda},
        {{"K", true, "radius of the admissible ball in the V-norm"}, &RunConfig::K},
        {{"gamma", false, "Hoelder exponent surrogate in (0,1); default 0.5"}, &RunConfig::gamma},
        {{"eps_kernel", false, "kernel mollification length; default: grid spacing 2L/(n-1)"}, &RunConfig::eps_kernel},
        {{"dt", false, "time step; default 0.01"}, &RunConfig::dt},
        {{"n_particles", false, "approximate marker count; default 20000"}, &RunConfig::n_particles},
        {{"L", false, "field grid covers [-L,L]^3; default 2"}, &RunConfig::L},
        {{"n", false, "field grid nodes per axis; default 16"}, &RunConfig::n},
        {{"picard_tol", false, "Picard stop on sup change; default 1e-10"}, &RunConfig::picard_tol},
        {{"picard_max_iter", false, "Picard iteration cap; default 30"}, &RunConfig::picard_max_iter},
        {{"datum_c", false, "bump amplitude; default 1"}, &RunConfig::datum_c},
        {{"datum_r", false, "bump radius; default 1"}, &RunConfig::datum_r},
        {{"lattice_n", false, "phase lattice nodes per axis; default 7"}, &RunConfig::lattice_n},
        {{"jitter", false, "marker jitter as a fraction of the spacing, [0,1); default 0"}, &RunConfig::jitter},
        {{"opt_max_iter", false, "optimizer iterations; default 50"}, &RunConfig::opt_max_iter},
        {{"opt_step0", false, "first step as a multiple of K/10 in V-norm; default 1"}, &RunConfig::opt_step0},
        {{"opt_armijo", false, "sufficient decrease constant; default 1e-4"}, &RunConfig::opt_armijo},
        {{"opt_backtrack", false, "backtracking factor; default 0.5"}, &RunConfig::opt_backtrack},
        {{"opt_max_backtracks", false, "backtracks per iteration; default 30"}, &RunConfig::opt_max_backtracks},
        {{"opt_tol", false, "stop when the dual gradient norm falls by this factor; default 1e-4"}, &RunConfig::opt_tol},
        {{"unique_threshold", false, "T/lambda bound for the uniqueness regime; default 0.2"},
         &RunConfig::unique_threshold},
        {{"tol_conservation", false, "L^p drift; default 0.01"}, &RunConfig::tol_conservation},
        {{"tol_frechet", false, "final Frechet remainder / ||f'||; default 0.05"}, &RunConfig::tol_frechet},
        {{"tol_duality", false, "tangent/adjoint gap; default 1e-2"}, &RunConfig::tol_duality},
        {{"tol_second", false, "second derivative vs second difference; default 0.05"}, &RunConfig::tol_second},
        {{"tol_tracking", false, "required tracking reduction; default 0.9"}, &RunConfig::tol_tracking},
        {{"tol_frj", false, "convolution representation residual; default 0.1"}, &RunConfig::tol_frj},
        {{"tol_stationarity", false, "final / initial dual gradient norm; default 1e-3"}, &RunConfig::tol_stationarity},
        {{"tol_unique", false, "pairwise control distance / K; default 0.05"}, &RunConfig::tol_unique},
        {{"tol_oracle", false, "collocation oracle sup error; default 0.05"}, &RunConfig::tol_oracle},
        {{"seed", false, "rng seed; default 1"}, &RunConfig::seed},
    };
    return e;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <class T>
bool parse_number(const std::string& v, T& out) {
    const char* first = v.data();
    const char* last = v.data() + v.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

[[noreturn]] void config_error(const std::string& source, int line, const std::string& key, const std::string& msg) {
    std::ostringstream os;
    os << source;
    if (line > 0) os << ':' << line;
    os << ": " << key << ": " << msg;
    throw Error("config error", os.str());
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("io error", "cannot create " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw Error("io error", "cannot write " + path);
    os << std::setprecision(12);
    return os;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& e : entries()) k.push_back(e.key);
        return k;
    }();
    return keys;
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::map<std::string, int> line_of;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        if (auto h = s.find('#'); h != std::string::npos) s.resize(h);
        s = trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) config_error(source, line, trim(s), "expected key=value");
        const std::string key = trim(s.substr(0, eq));
        const std::string val = trim(s.substr(eq + 1));
        const KeyEntry* hit = nullptr;
        for (const auto& e : entries())
            if (e.key.name == key) hit = &e;
        if (!hit) config_error(source, line, key, "unknown key");
        if (!seen.insert(key).second) config_error(source, line, key, "duplicate key");
        line_of[key] = line;
        const bool ok = std::visit(
            [&](auto member) {
                auto& ref = cfg.*member;
                return parse_number(val, ref);
            },
            hit->slot);
        if (!ok) config_error(source, line, key, "cannot parse value '" + val + "'");
    }
    for (const auto& e : entries())
        if (e.key.required && !seen.count(e.key.name)) config_error(source, 0, e.key.name, "missing required key");
    if (!seen.count("eps_kernel")) cfg.eps_kernel = cfg.h();
    try {
        cfg.validate();
    } catch (const Error& e) {
        // name the offending key and its line
        const std::string msg = e.what();
        const auto colon = msg.find(": ");
        const std::string detail = colon == std::string::npos ? msg : msg.substr(colon + 2);
        const std::string key = detail.substr(0, detail.find(' '));
        const int ln = line_of.count(key) ? line_of[key] : 0;
        config_error(source, ln, key, detail);
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config error", path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& e : entries()) {
        os << e.key.name << '=';
        std::visit([&](auto member) { os << cfg.*member; }, e.slot);
        os << '\n';
    }
    return os.str();
}

std::string error_line(const std::exception& e) {
    std::string code = "internal";
    std::string msg = e.what();
    if (const auto* ve = dynamic_cast<const Error*>(&e)) code = ve->code();
    for (auto& c : msg)
        if (c == '"' || c == '\n') c = '\'';
    return "error code=" + code + " message=\"" + msg + "\"";
}

void write_trajectory_csv(std::ostream& os, const ForwardTrajectory& fwd, int time_stride) {
    if (time_stride < 1) throw Error("invalid argument", "time_stride must be >= 1");
    os << "k,t[time],marker,x1[length],x2[length],x3[length],v1[velocity],v2[velocity],v3[velocity],f[density],"
          "w[phase volume]\n";
    const size_t n = fwd.markers();
    for (int k = 0; k < fwd.time.nodes(); ++k) {
        if (k % time_stride != 0 && k != fwd.time.steps) continue;
        for (size_t i = 0; i < n; ++i) {
            const Vec6& z = fwd.at(k, i);
            os << k << ',' << fwd.time.t(k) << ',' << i;
            for (double c : z) os << ',' << c;
            os << ',' << fwd.f[i] << ',' << fwd.w[i] << '\n';
        }
    }
}

void write_diagnostics_csv(std::ostream& os, const ForwardTrajectory& fwd) {
    os << "k,t[time],l1[mass],l2[density*sqrt(volume)],linf[density],support[phase length],field_energy[energy]\n";
    for (size_t k = 0; k < fwd.diag.size(); ++k) {
        const NodeDiagnostics& d = fwd.diag[k];
        os << k << ',' << fwd.time.t(static_cast<int>(k)) << ',' << d.l1 << ',' << d.l2 << ',' << d.linf << ','
           << d.support << ',' << d.field_energy << '\n';
    }
}

void write_trace_csv(std::ostream& os, const OptimizationTrace& tr) {
    os << "iter[-],J[cost],tracking[cost],regularization[cost],grad_dual[cost/V],step[-],v_norm[V],projected[0/1],"
          "backtracks[-]\n";
    for (const auto& r : tr.iters)
        os << r.iter << ',' << r.J << ',' << r.tracking << ',' << r.regularization << ',' << r.grad_dual << ','
           << r.step << ',' << r.norm << ',' << (r.projected ? 1 : 0) << ',' << r.backtracks << '\n';
}

void write_field_csv(std::ostream& os, const ControlField& B) {
    os << std::setprecision(17);
    os << "k,node,t[time],x1[length],x2[length],x3[length],B1[field],B2[field],B3[field]\n";
    for (int k = 0; k < B.time.nodes(); ++k)
        for (int m = 0; m < B.grid.size(); ++m) {
            const Vec3 x = B.grid.node(m);
            const double* b = B.at(k, m);
            os << k << ',' << m << ',' << B.time.t(k) << ',' << x[0] << ',' << x[1] << ',' << x[2] << ',' << b[0]
               << ',' << b[1] << ',' << b[2] << '\n';
        }
}

ControlField read_field_csv(std::istream& is, const RunConfig& cfg) {
    ControlField B = zero_control(cfg);
    std::string line;
    if (!std::getline(is, line) || line.rfind("k,node,", 0) != 0) throw Error("io error", "field csv: bad header");
    size_t rows = 0;
    int ln = 1;
    while (std::getline(is, line)) {
        ++ln;
        if (trim(line).empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(trim(c));
        int k = 0, m = 0;
        double b[3];
        if (cols.size() != 9 || !parse_number(cols[0], k) || !parse_number(cols[1], m) ||
            !parse_number(cols[6], b[0]) || !parse_number(cols[7], b[1]) || !parse_number(cols[8], b[2]))
            throw Error("io error", "field csv line " + std::to_string(ln) + ": malformed row");
        if (k < 0 || k >= B.time.nodes() || m < 0 || m >= B.grid.size())
            throw Error("grid mismatch", "field csv line " + std::to_string(ln) + ": index outside config grids");
        std::copy(b, b + 3, B.at(k, m));
        ++rows;
    }
    if (rows != static_cast<size_t>(B.time.nodes()) * B.grid.size())
        throw Error("grid mismatch", "field csv has " + std::to_string(rows) + " rows, config grids need " +
                                         std::to_string(static_cast<size_t>(B.time.nodes()) * B.grid.size()));
    return B;
}

namespace {
constexpr char kMagic[8] = {'V', 'P', 'C', 'F', 'L', 'D', '0', '1'};
}

void write_field_bin(std::ostream& os, const ControlField& B) {
    os.write(kMagic, 8);
    const std::int32_t steps = B.time.steps, n = B.grid.n;
    os.write(reinterpret_cast<const char*>(&steps), sizeof steps);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&B.time.T), sizeof(double));
    os.write(reinterpret_cast<const char*>(&B.grid.L), sizeof(double));
    os.write(reinterpret_cast<const char*>(B.data.data()), static_cast<std::streamsize>(B.data.size() * sizeof(double)));
}

ControlField read_field_bin(std::istream& is, const RunConfig& cfg) {
    char magic[8];
    std::int32_t steps = 0, n = 0;
    double T = 0, L = 0;
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw Error("io error", "field bin: bad magic");
    is.read(reinterpret_cast<char*>(&steps), sizeof steps);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    is.read(reinterpret_cast<char*>(&T), sizeof T);
    is.read(reinterpret_cast<char*>(&L), sizeof L);
    ControlField B = zero_control(cfg);
    if (steps != B.time.steps || n != B.grid.n || T != B.time.T || L != B.grid.L)
        throw Error("grid mismatch", "field bin does not match config grids");
    is.read(reinterpret_cast<char*>(B.data.data()), static_cast<std::streamsize>(B.data.size() * sizeof(double)));
    if (!is) throw Error("io error", "field bin: truncated");
    return B;
}

void write_slice_csv(std::ostream& os, const ForwardTrajectory& fwd, int k) {
    const SpatialGrid& sg = fwd.B.grid;
    std::vector<double> rho(sg.size(), 0.0);
    const double inv = 1.0 / sg.cell_volume();
    for (size_t i = 0; i < fwd.markers(); ++i) {
        int idx[8];
        double w[8];
        if (!sg.stencil(pos(fwd.at(k, i)), idx, w)) continue;
        for (int a = 0; a < 8; ++a) rho[idx[a]] += w[a] * fwd.w[i] * fwd.f[i] * inv;
    }
    const int c3 = sg.n / 2;
    os << "t[time],x1[length],x2[length],x3[length],rho[mass/length^3],B_abs[field]\n";
    for (int i = 0; i < sg.n; ++i)
        for (int j = 0; j < sg.n; ++j) {
            const int m = sg.index(i, j, c3);
            const double* b = fwd.B.at(k, m);
            os << fwd.time.t(k) << ',' << sg.coord(i) << ',' << sg.coord(j) << ',' << sg.coord(c3) << ',' << rho[m]
               << ',' << std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]) << '\n';
        }
}

namespace {

ControlField load_field(const Command& cmd, const RunConfig& cfg) {
    if (cmd.field_path.empty()) return zero_control(cfg);
    const bool bin = cmd.field_path.size() > 4 && cmd.field_path.substr(cmd.field_path.size() - 4) == ".bin";
    std::ifstream in(cmd.field_path, bin ? std::ios::binary : std::ios::in);
    if (!in) throw Error("io error", "cannot open " + cmd.field_path);
    return bin ? read_field_bin(in, cfg) : read_field_csv(in, cfg);
}

void save_field(const Command& cmd, const ControlField& B, const std::string& stem) {
    if (cmd.format == "bin") {
        auto os = open_out(join_path(cmd.out_dir, stem + ".bin"), true);
        write_field_bin(os, B);
    } else {
        auto os = open_out(join_path(cmd.out_dir, stem + ".csv"));
        write_field_csv(os, B);
    }
}

int run_forward(const Command& cmd, const RunConfig& cfg, std::ostream& log) {
    const ControlField B = load_field(cmd, cfg);
    const ForwardTrajectory fwd = solve_vp(initial_ensemble(cfg), initial_datum(cfg), B, cfg);
    {
        auto os = open_out(join_path(cmd.out_dir, "trajectory.csv"));
        write_trajectory_csv(os, fwd, std::max(1, fwd.time.steps / 10));
    }
    {
        auto os = open_out(join_path(cmd.out_dir, "diagnostics.csv"));
        write_diagnostics_csv(os, fwd);
    }
    const ProbeReport c = conservation_probe(fwd, cfg.tol_conservation);
    log << "forward: " << fwd.markers() << " markers, " << fwd.time.steps << " steps, drift " << c.metric << ", "
        << c.note << '\n';
    return 0;
}

int run_optimize(const Command& cmd, const RunConfig& cfg, std::ostream& log) {
    const ControlField Bstar = cmd.field_path.empty() ? twin_control(cfg) : load_field(cmd, cfg);
    ControlProblem P(cfg, twin_target(cfg, Bstar));
    const TwinReport t = twin_experiment(P, optimizer_options(cfg));
    {
        auto os = open_out(join_path(cmd.out_dir, "trace.csv"));
        write_trace_csv(os, t.trace);
    }
    save_field(cmd, t.trace.B, "field");
    {
        auto os = open_out(join_path(cmd.out_dir, "residual.txt"));
        os << "status=" << t.trace.status << "\nmonotone=" << (t.trace.monotone() ? 1 : 0)
           << "\ntracking_reduction=" << t.tracking_reduction << "\nstationarity=" << t.stationarity
           << "\nconvolution_residual=" << t.residual.convolution
           << "\nconvolution_residual_ibp=" << t.residual.convolution_ibp
           << "\nlaplacian_residual=" << t.residual.laplacian
           << "\nvariational_min_pairing=" << t.variational.min_pairing << "\ndistance_to_target_control="
           << v_norm(t.trace.B - Bstar) << '\n';
    }
    log << "optimize: " << t.trace.status << " after " << t.trace.iters.size() - 1 << " iterations, tracking -"
        << 100.0 * t.tracking_reduction << "%, J " << (t.trace.monotone() ? "monotone" : "NOT monotone") << '\n';
    return t.trace.monotone() ? 0 : 1;
}

int run_gradcheck(const Command& cmd, const RunConfig& cfg, std::ostream& log) {
    const ControlField Bstar = twin_control(cfg);
    ControlProblem P(cfg, twin_target(cfg, Bstar));
    const ControlField B = cmd.field_path.empty() ? 0.5 * Bstar : load_field(cmd, cfg);
    const ControlField H = gaussian_field(cfg, {1, 0.5, 0}, {0.2, 0, 0}, 0.8, 1.0);
    SuiteReport r;
    r.probes.push_back(frechet_probe(P, B, H, {0.2, 0.1, 0.05, 0.025}, cfg.tol_frechet));
    r.probes.push_back(duality_probe(P, B, direction_panel(cfg, 10, cfg.seed, 0.25 * cfg.K), cfg.tol_duality));
    {
        auto os = open_out(join_path(cmd.out_dir, "gradcheck.csv"));
        write_probe_csv(os, r.probes);
    }
    log << suite_summary(r);
    return r.passed() ? 0 : 1;
}

int run_verify(const Command& cmd, const RunConfig& cfg, std::ostream& log) {
    SuiteOptions o;
    o.optimization = cmd.full;
    o.seed = cfg.seed;
    const SuiteReport r = run_all(cfg, o);
    {
        auto os = open_out(join_path(cmd.out_dir, "suite.csv"));
        write_probe_csv(os, r.probes);
    }
    const std::string text = suite_summary(r);
    {
        auto os = open_out(join_path(cmd.out_dir, "suite.txt"));
        os << text;
    }
    log << text;
    return r.passed() ? 0 : 1;
}

int run_export(const Command& cmd, const RunConfig& cfg, std::ostream& log) {
    const ControlField B = load_field(cmd, cfg);
    const ForwardTrajectory fwd = solve_vp(initial_ensemble(cfg), initial_datum(cfg), B, cfg);
    for (int k = 0; k < fwd.time.nodes(); ++k) {
        std::ostringstream name;
        name << "slice_" << std::setw(4) << std::setfill('0') << k << ".csv";
        auto os = open_out(join_path(cmd.out_dir, name.str()));
        write_slice_csv(os, fwd, k);
    }
    log << "export-plot: " << fwd.time.nodes() << " slices in " << cmd.out_dir << '\n';
    return 0;
}

}  // namespace

int run_command(const Command& cmd, std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    try {
        if (cmd.format != "csv" && cmd.format != "bin") throw Error("usage", "--format must be csv or bin");
        if (cmd.config_path.empty()) throw Error("usage", "--config is required");
        cfg = parse_config(cmd.config_path);
        if (cmd.seed) cfg.seed = *cmd.seed;
        ensure_dir(cmd.out_dir);
    } catch (const std::exception& e) {
        err << error_line(e) << '\n';
        return 2;
    }
    try {
        if (cmd.name == "forward") return run_forward(cmd, cfg, log);
        if (cmd.name == "optimize") return run_optimize(cmd, cfg, log);
        if (cmd.name == "gradcheck") return run_gradcheck(cmd, cfg, log);
        if (cmd.name == "verify") return run_verify(cmd, cfg, log);
        if (cmd.name == "export-plot") return run_export(cmd, cfg, log);
        err << error_line(Error("usage", "unknown command " + cmd.name)) << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << error_line(e) << '\n';
        return 3;
    }
}

}  // namespace vpc
