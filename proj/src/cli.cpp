#include "sdde/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdde/errors.hpp"
#include "sdde/model.hpp"
#include "sdde/solver.hpp"
#include "sdde/verify.hpp"

namespace sdde {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---- config access ---------------------------------------------------------

const json& section(const json& root, const char* name) {
    static const json empty = json::object();
    if (!root.contains(name)) return empty;
    const json& s = root.at(name);
    if (!s.is_object()) throw ConfigError(std::string("section '") + name + "' must be an object");
    return s;
}

template <class T>
T get_or(const json& s, const char* key, T fallback, const char* where) {
    if (!s.contains(key) || s.at(key).is_null()) return fallback;
    try {
        return s.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(where) + "." + key + " has the wrong type");
    }
}

template <class T>
T require(const json& s, const char* key, const char* where) {
    if (!s.contains(key)) throw ConfigError(std::string("missing ") + where + "." + key);
    return get_or<T>(s, key, T{}, where);
}

struct Config {
    json root;
    fs::path base_dir; // relative file references resolve against the config file
};

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    Config c;
    try {
        c.root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in '" + path + "': " + e.what());
    }
    if (!c.root.is_object()) throw ConfigError("config root must be a JSON object");
    c.base_dir = fs::path(path).parent_path();
    return c;
}

fs::path resolve(const Config& c, const std::string& file) {
    fs::path p(file);
    if (p.is_relative()) p = c.base_dir / p;
    if (!fs::exists(p)) throw ConfigError("referenced file '" + p.string() + "' does not exist");
    return p;
}

ModelSpec load_model(const Config& c) {
    if (c.root.contains("model") && c.root.at("model").is_string()) {
        if (c.root.at("model").get<std::string>() != "demo") throw ConfigError("model: the only preset is \"demo\"");
        return ModelSpec::demo();
    }
    const json& m = section(c.root, "model");
    if (m.empty()) throw ConfigError("missing model section");
    const json& r = section(m, "range");
    const double lo = get_or(r, "v_lo", -10.0, "model.range"), hi = get_or(r, "v_hi", 10.0, "model.range");
    if (get_or<std::string>(m, "preset", "", "model") == "demo") {
        const ModelSpec demo = ModelSpec::demo();
        return ModelSpec(demo.functions(), demo.params(), lo, hi);
    }
    const bool has_beta = m.contains("beta"), has_gamma = m.contains("gamma");
    if (has_beta == has_gamma) throw ConfigError("model: supply exactly one of beta and gamma");
    const json& p = section(m, "params");
    ModelParams mp;
    mp.x1 = require<double>(p, "x1", "model.params");
    mp.x2 = require<double>(p, "x2", "model.params");
    mp.mu = require<double>(p, "mu", "model.params");
    mp.eps = require<double>(p, "eps", "model.params");
    mp.K = require<double>(p, "K", "model.params");
    mp.b = require<double>(p, "b", "model.params");
    auto opt = [&](bool has, const char* key) {
        return has ? std::optional<std::string>(require<std::string>(m, key, "model")) : std::nullopt;
    };
    return ModelSpec::from_strings(require<std::string>(m, "q", "model"), opt(has_beta, "beta"),
                                   opt(has_gamma, "gamma"), require<std::string>(m, "g", "model"),
                                   get_or<std::string>(m, "d1g", "0", "model"),
                                   get_or<std::string>(m, "d", "0", "model"), mp, lo, hi);
}

ValidationGrid load_grid(const Config& c) {
    const json& v = section(c.root, "validation");
    ValidationGrid g;
    g.nx = get_or(v, "grid_nx", g.nx, "validation");
    g.nv = get_or(v, "grid_nv", g.nv, "validation");
    g.tol_consistency = get_or(v, "tol_consistency", g.tol_consistency, "validation");
    g.fd_step = get_or(v, "fd_step", g.fd_step, "validation");
    return g;
}

// A channel given as an expression in t, sampled on [-h, 0].
struct Channel {
    std::function<double(double)> f, df;
};

Channel expr_channel(const std::string& src, double h) {
    const Expr e = Expr::parse(src, {"t"});
    auto f = [e](double t) { return e.eval({t}); };
    const double step = 1e-5 * std::max(1.0, h);
    auto df = [f, step, h](double t) {
        if (t - step < -h) return (-3.0 * f(t) + 4.0 * f(t + step) - f(t + 2 * step)) / (2 * step);
        if (t + step > 0.0) return (3.0 * f(t) - 4.0 * f(t - step) + f(t - 2 * step)) / (2 * step);
        return (f(t + step) - f(t - step)) / (2 * step);
    };
    return {f, df};
}

History csv_channel(const Config& c, const std::string& file, double h) {
    std::ifstream in(resolve(c, file));
    History out;
    try {
        out = History::read_csv(in);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("prehistory file '" + file + "': " + e.what());
    }
    const double tol = 1e-9 * std::max(1.0, h);
    if (std::fabs(out.a() + h) > tol || std::fabs(out.b()) > tol)
        throw ConfigError("prehistory file '" + file + "' must cover [-h, 0] with h = " + std::to_string(h));
    return out;
}

Prehistory load_prehistory(const Config& c, const ModelSpec& spec, double dt_y) {
    const json& p = section(c.root, "prehistory");
    if (p.empty()) throw ConfigError("missing prehistory section");
    const double h = spec.h();
    const std::size_t nodes = get_or<std::size_t>(p, "nodes", 41, "prehistory");
    if (nodes < 2) throw ConfigError("prehistory.nodes must be at least 2");
    auto channel = [&](const char* expr_key, const char* csv_key) -> std::optional<Channel> {
        if (p.contains(expr_key) == p.contains(csv_key))
            throw ConfigError(std::string("prehistory: give exactly one of ") + expr_key + " and " + csv_key);
        if (p.contains(csv_key)) return std::nullopt;
        return expr_channel(require<std::string>(p, expr_key, "prehistory"), h);
    };
    const auto w = channel("w", "w_csv");
    const auto v = channel("v", "v_csv");
    if (get_or(p, "compatible", false, "prehistory")) {
        if (!w || !v) throw ConfigError("prehistory.compatible needs expression channels");
        return make_compatible(spec, w->f, w->df, v->f, v->df, nodes, dt_y);
    }
    History hw = w ? History::from_function(w->f, w->df, -h, 0.0, nodes)
                   : csv_channel(c, require<std::string>(p, "w_csv", "prehistory"), h);
    History hv = v ? History::from_function(v->f, v->df, -h, 0.0, nodes)
                   : csv_channel(c, require<std::string>(p, "v_csv", "prehistory"), h);
    return Prehistory(std::move(hw), std::move(hv));
}

void check_dt(const ModelSpec& spec, double dt, const char* what) {
    if (!(dt > 0.0) || dt > spec.min_delay())
        throw ConfigError(std::string(what) + " = " + std::to_string(dt) + " must lie in (0, (x2 - x1)/K = " +
                          std::to_string(spec.min_delay()) + "]");
}

SolveSettings load_solve(const Config& c, const ModelSpec& spec) {
    const json& s = section(c.root, "solve");
    SolveSettings st;
    st.dt = get_or(s, "dt", st.dt, "solve");
    st.T = get_or(s, "T", st.T, "solve");
    st.dt_y = get_or(s, "dt_y", st.dt_y, "solve");
    st.blowup_cap = get_or(s, "blowup_cap", st.blowup_cap, "solve");
    st.alpha_cap = get_or(s, "alpha_cap", st.alpha_cap, "solve");
    check_dt(spec, st.dt, "solve.dt");
    if (!(st.T > 0.0)) throw ConfigError("solve.T must be positive");
    if (st.dt_y < 0.0) throw ConfigError("solve.dt_y must be non-negative");
    return st;
}

DerivedBounds apply_override(DerivedBounds b, const json& o) {
    if (!o.is_object()) throw ConfigError("verify.bounds_override must be an object");
    const std::pair<const char*, double*> fields[] = {{"M_q", &b.M_q},       {"M_k", &b.M_k},     {"M_G", &b.M_G},
                                                      {"L_g", &b.L_g},       {"C_beta", &b.C_beta}, {"a_beta", &b.a_beta},
                                                      {"M_beta", &b.M_beta}, {"L_q", &b.L_q},     {"L_beta", &b.L_beta},
                                                      {"L_d", &b.L_d}};
    for (const auto& [key, _] : o.items())
        if (std::none_of(std::begin(fields), std::end(fields), [&](const auto& f) { return key == f.first; }))
            throw ConfigError("verify.bounds_override: unknown field '" + key + "'");
    for (const auto& [key, ptr] : fields) *ptr = get_or(o, key, *ptr, "verify.bounds_override");
    return b;
}

// ---- output ------------------------------------------------------------------

struct Output {
    fs::path dir;
    const json* names;

    fs::path file(const char* key, const char* fallback) const {
        return dir / get_or<std::string>(*names, key, fallback, "output");
    }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write '" + p.string() + "'");
}

ojson bounds_json(const DerivedBounds& b) {
    ojson j;
    j["M_q"] = b.M_q;
    j["M_k"] = b.M_k;
    j["M_G"] = b.M_G;
    j["L_g"] = b.L_g;
    j["C_beta"] = b.C_beta;
    j["a_beta"] = b.a_beta;
    j["M_beta"] = b.M_beta;
    j["L_q"] = b.L_q;
    j["L_beta"] = b.L_beta;
    j["L_d"] = b.L_d;
    return j;
}

ojson items_json(const CheckReport& r) { return ojson::parse(r.to_json()); }

std::string g17(double x) {
    if (std::isnan(x)) return "";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

// ---- commands ----------------------------------------------------------------

struct Context {
    Config cfg;
    Output out;
    std::optional<std::uint64_t> seed;
    std::ostream& os;
    std::ostream& es;
};

// Model validation shared by every command; returns the report and the bounds.
std::pair<CheckReport, DerivedBounds> validate_model(const ModelSpec& spec, const ValidationGrid& grid) {
    CheckReport r = validate(spec, grid);
    DerivedBounds b;
    if (r.all_pass()) {
        try {
            b = derive_bounds(spec, grid);
        } catch (const Error& e) {
            r.add_flag("bounds.derive", false, e.what());
        }
    }
    return {std::move(r), b};
}

void require_valid(const CheckReport& r, std::ostream& es) {
    if (r.all_pass()) return;
    for (const auto& i : r.items())
        if (i.status == CheckStatus::fail) es << "failed: " << i.check_id << " (" << i.context << ")\n";
    throw AssumptionViolation("model validation failed; run the validate command for the full report");
}

int cmd_validate(Context& ctx) {
    const ModelSpec spec = load_model(ctx.cfg);
    auto [report, bounds] = validate_model(spec, load_grid(ctx.cfg));
    report.print_table(ctx.os);
    write_text(ctx.out.file("validate_report", "validate_report.json"), report.to_json() + "\n");
    if (report.all_pass()) write_text(ctx.out.file("bounds", "bounds.json"), bounds_json(bounds).dump(2) + "\n");
    return report.all_pass() ? exit_ok : exit_failure;
}

int cmd_simulate(Context& ctx) {
    const ModelSpec spec = load_model(ctx.cfg);
    const SolveSettings st = load_solve(ctx.cfg, spec);
    const Prehistory pre = load_prehistory(ctx.cfg, spec, st.dt_y);
    auto [vreport, bounds] = validate_model(spec, load_grid(ctx.cfg));
    require_valid(vreport, ctx.es);

    const Trajectory traj = integrate(spec, pre, st);
    {
        std::ofstream f(ctx.out.file("trajectory", "trajectory.csv"), std::ios::binary);
        traj.write_csv(f);
        if (!f) throw Error("cannot write the trajectory file");
    }

    const json& s = section(ctx.cfg.root, "solve");
    const double voc_tol = get_or(s, "voc_tol", 1e-6, "solve");
    const VocResidual voc = voc_residual(traj, spec, st.dt_y);
    CheckReport checks;
    checks.merge(check_apriori_w(traj, spec, bounds));
    checks.merge(check_apriori_v(traj, spec, bounds));
    checks.merge(check_deriv_bound(traj, spec, bounds));
    checks.add_bound("voc_residual.w", voc.r_w, voc_tol, "variation-of-constants defect of w");
    checks.add_bound("voc_residual.v", voc.r_v, voc_tol, "variation-of-constants defect of v");

    const std::size_t o = traj.origin_index();
    auto range = [o](const History& ch) {
        const auto y = ch.values();
        const auto [lo, hi] = std::minmax_element(y.begin() + static_cast<std::ptrdiff_t>(o), y.end());
        return std::pair{*lo, *hi};
    };
    const auto [w_min, w_max] = range(traj.w());
    const auto [v_min, v_max] = range(traj.v());
    ojson sum;
    sum["T_reached"] = traj.t_end();
    sum["steps"] = traj.w().size() - 1 - o;
    sum["w_min"] = w_min;
    sum["w_max"] = w_max;
    sum["v_min"] = v_min;
    sum["v_max"] = v_max;
    sum["compatibility_defect"] = compatibility_defect(spec, pre, st.dt_y);
    sum["voc_residual"] = {{"r_w", voc.r_w}, {"r_v", voc.r_v}};
    sum["bounds"] = bounds_json(bounds);
    sum["checks"] = items_json(checks);
    sum["all_pass"] = checks.all_pass();
    write_text(ctx.out.file("summary", "summary.json"), sum.dump(2) + "\n");
    checks.print_table(ctx.os);
    return checks.all_pass() ? exit_ok : exit_failure;
}

int cmd_picard(Context& ctx) {
    const ModelSpec spec = load_model(ctx.cfg);
    const json& p = section(ctx.cfg.root, "picard");
    PicardSettings ps;
    ps.T0 = get_or(p, "T0", std::min(0.5, spec.min_delay()), "picard");
    ps.tol = get_or(p, "tol", ps.tol, "picard");
    ps.max_iter = get_or(p, "max_iter", ps.max_iter, "picard");
    ps.grid_n = get_or(p, "grid_n", ps.grid_n, "picard");
    ps.dt_y = get_or(section(ctx.cfg.root, "solve"), "dt_y", 0.0, "solve");
    if (p.contains("seed")) ps.seed = get_or<std::uint64_t>(p, "seed", 0, "picard");
    if (ctx.seed) ps.seed = ctx.seed;
    check_dt(spec, ps.T0, "picard.T0");
    const Prehistory pre = load_prehistory(ctx.cfg, spec, ps.dt_y);
    require_valid(validate_model(spec, load_grid(ctx.cfg)).first, ctx.es);

    const PicardResult res = picard_solve(spec, pre, ps);
    {
        std::ofstream f(ctx.out.file("picard_trajectory", "picard_trajectory.csv"), std::ios::binary);
        res.traj.write_csv(f);
        if (!f) throw Error("cannot write the Picard trajectory file");
    }
    std::string log = "iter,sup_diff\n";
    for (std::size_t i = 0; i < res.sup_diffs.size(); ++i) log += std::to_string(i + 1) + "," + g17(res.sup_diffs[i]) + "\n";
    write_text(ctx.out.file("picard_log", "picard_log.csv"), log);
    ctx.os << "converged in " << res.iterations << " iterations, last sup difference "
           << (res.sup_diffs.empty() ? 0.0 : res.sup_diffs.back()) << "\n";
    return exit_ok;
}

int cmd_verify(Context& ctx) {
    const ModelSpec spec = load_model(ctx.cfg);
    const SolveSettings st = load_solve(ctx.cfg, spec);
    const Prehistory pre = load_prehistory(ctx.cfg, spec, st.dt_y);
    auto [report, bounds] = validate_model(spec, load_grid(ctx.cfg));
    const json& v = section(ctx.cfg.root, "verify");
    SuiteSettings s;
    s.seed = ctx.seed.value_or(get_or<std::uint64_t>(v, "seed", s.seed, "verify"));
    s.sobolev_samples = get_or(v, "sobolev_samples", s.sobolev_samples, "verify");
    s.envelope_samples = get_or(v, "envelope_samples", s.envelope_samples, "verify");
    s.tau_pairs = get_or(v, "tau_pairs", s.tau_pairs, "verify");
    s.calG_samples = get_or(v, "calG_samples", s.calG_samples, "verify");
    s.calG_pairs = get_or(v, "calG_pairs", s.calG_pairs, "verify");
    s.rhs_samples = get_or(v, "rhs_samples", s.rhs_samples, "verify");
    s.maturation_samples = get_or(v, "maturation_samples", s.maturation_samples, "verify");
    s.alpha = get_or(v, "alpha", s.alpha, "verify");
    s.delta = get_or(v, "delta", s.delta, "verify");
    s.dt_y = st.dt_y;
    if (v.contains("bounds_override")) bounds = apply_override(bounds, v.at("bounds_override"));
    if (report.all_pass()) {
        const Trajectory traj = integrate(spec, pre, st);
        report.merge(run_suite(spec, bounds, traj, s));
    }
    report.print_table(ctx.os);
    write_text(ctx.out.file("verify_report", "verify_report.json"), report.to_json() + "\n");
    return report.all_pass() ? exit_ok : exit_failure;
}

int cmd_converge(Context& ctx) {
    const ModelSpec spec = load_model(ctx.cfg);
    const json& c = section(ctx.cfg.root, "converge");
    const double T = get_or(c, "T", 1.0, "converge");
    const auto dts = get_or(c, "dts", std::vector<double>{4e-3, 2e-3, 1e-3, 5e-4, 6.25e-5}, "converge");
    if (!(T > 0.0)) throw ConfigError("converge.T must be positive");
    if (dts.size() < 2) throw ConfigError("converge.dts needs at least two entries");
    for (std::size_t i = 0; i < dts.size(); ++i) {
        check_dt(spec, dts[i], "converge.dts entry");
        if (i > 0 && !(dts[i] < dts[i - 1])) throw ConfigError("converge.dts must be strictly descending");
    }
    const double dt_y = get_or(section(ctx.cfg.root, "solve"), "dt_y", 0.0, "solve");
    const Prehistory pre = load_prehistory(ctx.cfg, spec, dt_y);
    require_valid(validate_model(spec, load_grid(ctx.cfg)).first, ctx.es);

    const auto rows = convergence_study(spec, pre, T, dts, dt_y);
    std::string csv = "dt,sup_error,order\n";
    for (const auto& r : rows) csv += g17(r.dt) + "," + g17(r.sup_error) + "," + g17(r.order) + "\n";
    write_text(ctx.out.file("convergence", "convergence.csv"), csv);
    ctx.os << csv;
    if (c.contains("min_order")) {
        const double floor = get_or(c, "min_order", 0.0, "converge");
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (!(rows[i].order >= floor)) {
                ctx.es << "observed order " << rows[i].order << " at dt = " << rows[i].dt << " below " << floor << "\n";
                return exit_failure;
            }
    }
    return exit_ok;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Threshold-delay stem cell model: validation, simulation and verification"};
    app.require_subcommand(1);
    std::string config, out_dir;
    std::optional<std::uint64_t> seed;
    using Command = int (*)(Context&);
    const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
        {"validate", {"check the model assumptions and derive the bound constants", cmd_validate}},
        {"simulate", {"integrate by the method of steps", cmd_simulate}},
        {"picard", {"solve the fixed-point problem on one delay interval", cmd_picard}},
        {"verify", {"run the full check suite", cmd_verify}},
        {"converge", {"observed convergence order study", cmd_converge}},
    };
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc.first);
        sub->add_option("--config", config, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
        sub->add_option("--seed", seed, "random seed for sampled checks and Picard start perturbation");
    }

    std::vector<const char*> argv{"sdde"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        Context ctx{load_config(config), {}, seed, out, err};
        const json& o = section(ctx.cfg.root, "output");
        fs::path dir = out_dir.empty() ? fs::path(get_or<std::string>(o, "dir", ".", "output")) : fs::path(out_dir);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
        ctx.out = Output{dir, &o};
        for (const auto& [name, desc] : commands)
            if (app.got_subcommand(name)) return desc.second(ctx);
        return exit_usage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_usage;
    } catch (const ParseError& e) {
        err << "expression error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << "\n";
        return exit_usage;
    } catch (const BlowUp& e) {
        err << "blow-up at t = " << e.time() << ": " << e.what() << "\n";
        return exit_failure;
    } catch (const RangeExit& e) {
        err << "range exit at t = " << e.time() << " (v = " << e.value() << "): " << e.what() << "\n";
        return exit_failure;
    } catch (const ConvergenceFailure& e) {
        err << "no convergence (last contraction ratio " << e.last_ratio() << "): " << e.what() << "\n";
        return exit_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    }
}

} // namespace sdde
