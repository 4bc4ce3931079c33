#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qate/errors.hpp"
#include "qate/exact_diag.hpp"
#include "qate/gaussian.hpp"
#include "qate/model.hpp"
#include "qate/spectral.hpp"
#include "qate/tfim_blocks.hpp"

namespace qate::experiments {

using nlohmann::json;

enum class Engine { auto_resolve, tfim_blocks, gaussian_fermion, exact_diag };

inline std::string to_string(Engine e) {
    switch (e) {
    case Engine::auto_resolve: return "auto";
    case Engine::tfim_blocks: return "tfim_blocks";
    case Engine::gaussian_fermion: return "gaussian_fermion";
    case Engine::exact_diag: return "exact_diag";
    }
    return "?";
}

inline int ed_cap() {
    if (const char* env = std::getenv("QATE_ED_CAP")) {
        const int cap = std::atoi(env);
        if (cap >= 2) return cap;
    }
    return 12;
}

// ---------------------------------------------------------------------------
// Configuration schema (versioned JSON, unknown keys rejected).
// ---------------------------------------------------------------------------
struct HSpecConfig {
    Family family = Family::tfim_ti;
    double J = 1.0, g = 0.0, h = 0.0;
    std::optional<Boundary> boundary;

    HamiltonianSpec to_spec(int n) const {
        HamiltonianSpec s;
        s.family = family;
        s.n_sites = n;
        s.J = J;
        s.g = g;
        s.h = h;
        s.boundary = boundary.value_or(family == Family::tfim_ti ? Boundary::parity_sector
                                                                 : Boundary::open);
        return s;
    }
};

struct FitSpec {
    std::string quantity; // a CSV column: cod, delta_e_qate, ...
    std::string axis;     // T | N | S_over_N
    double lo = 0.0, hi = 0.0;
};

struct BodConfig {
    double delta = 0.04;
    double omega_max = 4.0;
    int perturbative_order = 0; // 0 = off (blocks engine only)
};

struct FilterConfig {
    double x = 5.0;
    std::optional<double> dt; // default: from the spectral width
};

struct ExperimentConfig {
    int schema_version = 1;
    std::string name;
    Engine engine = Engine::auto_resolve;
    HSpecConfig h_init, h_final;
    std::vector<double> beta_list, t_list;
    std::vector<int> n_list;
    RampSchedule schedule = RampSchedule::linear();
    double tau = 0.1;
    FilterConfig filter;
    std::optional<BodConfig> bod;
    std::vector<FitSpec> fits;
    std::string output_dir = "out";
    bool local_central3 = false; // ED engine: trace distance of 3 central sites
    std::uint64_t hash = 0;

    void validate() const {
        if (schema_version != 1) throw ConfigError("config: unsupported schema_version");
        if (name.empty()) throw ConfigError("config: name must be nonempty");
        if (beta_list.empty()) throw ConfigError("config: beta_list must be nonempty");
        if (t_list.empty()) throw ConfigError("config: T_list must be nonempty");
        if (n_list.empty()) throw ConfigError("config: N_list must be nonempty");
        if (!(tau > 0.0)) throw ConfigError("config: tau must be > 0");
        for (double t : t_list)
            if (!(t > 0.0)) throw ConfigError("config: T_list entries must be > 0");
        for (int n : n_list)
            if (n < 2) throw ConfigError("config: N_list entries must be >= 2");
        for (double b : beta_list)
            if (b < 0.0) throw ConfigError("config: beta_list entries must be >= 0");
        schedule.validate();
        for (const auto& f : fits) {
            if (f.axis != "T" && f.axis != "N" && f.axis != "S_over_N")
                throw ConfigError("config: fit axis must be T, N or S_over_N");
            if (!(f.hi > f.lo)) throw ConfigError("config: fit window must satisfy lo < hi");
        }
        if (bod && !(bod->delta > 0.0)) throw ConfigError("config: bod.delta must be > 0");
        if (bod && !(bod->omega_max > 0.0)) throw ConfigError("config: bod.omega_max must be > 0");
        if (bod && (bod->perturbative_order < 0 || bod->perturbative_order > 2))
            throw ConfigError("config: bod.perturbative_order must be 0, 1 or 2");
    }
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

inline Family parse_family(const std::string& s) {
    if (s == "tfim_ti") return Family::tfim_ti;
    if (s == "z_field_isospectral") return Family::z_field_isospectral;
    if (s == "mixed_field_ising") return Family::mixed_field_ising;
    if (s == "dense_custom") return Family::dense_custom;
    throw ConfigError("config: unknown family '" + s + "'");
}

inline HSpecConfig parse_hspec(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    reject_unknown_keys(j, {"family", "J", "g", "h", "boundary"}, where);
    HSpecConfig s;
    if (!j.contains("family")) throw ConfigError("config: " + where + ".family is required");
    s.family = parse_family(j.at("family").get<std::string>());
    s.J = j.value("J", 1.0);
    s.g = j.value("g", 0.0);
    s.h = j.value("h", 0.0);
    if (j.contains("boundary")) {
        const std::string b = j.at("boundary").get<std::string>();
        if (b == "open") s.boundary = Boundary::open;
        else if (b == "parity_sector") s.boundary = Boundary::parity_sector;
        else throw ConfigError("config: unknown boundary '" + b + "' in " + where);
    }
    return s;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    detail::reject_unknown_keys(
        j,
        {"schema_version", "name", "engine", "h_init", "h_final", "beta_list", "T_list",
         "N_list", "schedule", "tau", "filter", "bod", "fits", "output_dir", "local_central3"},
        "the top level");
    ExperimentConfig cfg;
    cfg.schema_version = j.value("schema_version", 1);
    if (!j.contains("name")) throw ConfigError("config: name is required");
    cfg.name = j.at("name").get<std::string>();
    if (j.contains("engine")) {
        const std::string e = j.at("engine").get<std::string>();
        if (e == "auto") cfg.engine = Engine::auto_resolve;
        else if (e == "tfim_blocks") cfg.engine = Engine::tfim_blocks;
        else if (e == "gaussian_fermion") cfg.engine = Engine::gaussian_fermion;
        else if (e == "exact_diag") cfg.engine = Engine::exact_diag;
        else throw ConfigError("config: unknown engine '" + e + "'");
    }
    if (!j.contains("h_init") || !j.contains("h_final"))
        throw ConfigError("config: h_init and h_final are required");
    cfg.h_init = detail::parse_hspec(j.at("h_init"), "h_init");
    cfg.h_final = detail::parse_hspec(j.at("h_final"), "h_final");
    if (!j.contains("beta_list")) throw ConfigError("config: beta_list is required");
    cfg.beta_list = j.at("beta_list").get<std::vector<double>>();
    if (!j.contains("T_list")) throw ConfigError("config: T_list is required");
    cfg.t_list = j.at("T_list").get<std::vector<double>>();
    if (!j.contains("N_list")) throw ConfigError("config: N_list is required");
    cfg.n_list = j.at("N_list").get<std::vector<int>>();
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        detail::reject_unknown_keys(s, {"kind", "samples"}, "schedule");
        const std::string kind = s.value("kind", "linear");
        if (kind == "linear") cfg.schedule = RampSchedule::linear();
        else if (kind == "smooth") cfg.schedule = RampSchedule::smooth();
        else if (kind == "tabulated") {
            if (!s.contains("samples"))
                throw ConfigError("config: tabulated schedule needs samples");
            std::vector<std::pair<double, double>> pts;
            for (const auto& row : s.at("samples"))
                pts.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
            cfg.schedule = RampSchedule::tabulated(pts);
        } else {
            throw ConfigError("config: unknown schedule kind '" + kind + "'");
        }
    }
    cfg.tau = j.value("tau", 0.1);
    if (j.contains("filter")) {
        const json& f = j.at("filter");
        detail::reject_unknown_keys(f, {"x", "dt"}, "filter");
        cfg.filter.x = f.value("x", 5.0);
        if (f.contains("dt")) cfg.filter.dt = f.at("dt").get<double>();
    }
    if (j.contains("bod")) {
        const json& b = j.at("bod");
        detail::reject_unknown_keys(b, {"delta", "omega_max", "perturbative_order"}, "bod");
        BodConfig bc;
        bc.delta = b.value("delta", 0.04);
        bc.omega_max = b.value("omega_max", 4.0);
        bc.perturbative_order = b.value("perturbative_order", 0);
        cfg.bod = bc;
    }
    if (j.contains("fits")) {
        for (const auto& f : j.at("fits")) {
            detail::reject_unknown_keys(f, {"quantity", "axis", "window"}, "fits[]");
            FitSpec fs;
            fs.quantity = f.at("quantity").get<std::string>();
            fs.axis = f.at("axis").get<std::string>();
            fs.lo = f.at("window").at(0).get<double>();
            fs.hi = f.at("window").at(1).get<double>();
            cfg.fits.push_back(fs);
        }
    }
    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.local_central3 = j.value("local_central3", false);
    cfg.hash = detail::fnv1a(j.dump());
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: parse error in '") + path + "': " + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Sweep execution.
// ---------------------------------------------------------------------------
struct ResultRecord {
    std::string name;
    std::string engine;
    std::uint64_t config_hash = 0;
    int n_sites = 0;
    double total_time = 0.0;
    double beta = 0.0;
    std::string schedule_kind = "linear";
    double tau = 0.1;
    bench::BenchmarkRecord rec;
    std::string error;
    double wall_time_s = 0.0;
    std::optional<bench::BodHistogram> bod;
    std::optional<bench::BodHistogram> bod_pert;
    std::optional<double> trace_dist_c3;
};

inline Engine resolve_engine(const ExperimentConfig& cfg, int n) {
    if (cfg.engine != Engine::auto_resolve) return cfg.engine;
    const bool free_fermion = (cfg.h_init.family == Family::tfim_ti ||
                               cfg.h_init.family == Family::z_field_isospectral) &&
                              (cfg.h_final.family == Family::tfim_ti ||
                               cfg.h_final.family == Family::z_field_isospectral);
    if (n <= ed_cap()) return Engine::exact_diag;
    if (cfg.h_init.family == Family::tfim_ti && cfg.h_final.family == Family::tfim_ti)
        return Engine::tfim_blocks;
    if (free_fermion) return Engine::gaussian_fermion;
    throw ConfigError("engine resolution: N = " + std::to_string(n) +
                      " exceeds the ED cap and the model is not free-fermion solvable");
}

inline std::string schedule_kind_name(const RampSchedule& s) {
    switch (s.kind) {
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::smooth: return "smooth";
    case ScheduleKind::tabulated: return "tabulated";
    }
    return "?";
}

inline ResultRecord run_point(const ExperimentConfig& cfg, int n, double total_time,
                              double beta) {
    ResultRecord out;
    out.name = cfg.name;
    out.config_hash = cfg.hash;
    out.n_sites = n;
    out.total_time = total_time;
    out.beta = beta;
    out.schedule_kind = schedule_kind_name(cfg.schedule);
    out.tau = cfg.tau;
    const auto started = std::chrono::steady_clock::now();
    try {
        const Engine engine = resolve_engine(cfg, n);
        out.engine = to_string(engine);
        QateConfig qc;
        qc.beta = beta;
        qc.total_time = total_time;
        qc.tau = cfg.tau;
        qc.schedule = cfg.schedule;
        qc.h_init = cfg.h_init.to_spec(n);
        qc.h_final = cfg.h_final.to_spec(n);

        switch (engine) {
        case Engine::exact_diag: {
            const auto run = ed::run_qate_dense(qc);
            out.rec = run.record;
            if (cfg.bod) {
                const CMat coeffs = ed::coefficients_in_eigenbasis(run.rho_final, run.eig_final);
                out.bod = bench::bod_exact(coeffs, run.eig_final.energies, cfg.bod->delta,
                                           cfg.bod->omega_max);
            }
            if (cfg.local_central3 && n >= 4) {
                const auto sites = ed::central_sites(n);
                out.trace_dist_c3 = ed::trace_norm_distance(
                    ed::reduced_density(run.rho_final, sites),
                    ed::reduced_density(run.rho_min, sites));
            }
            break;
        }
        case Engine::tfim_blocks: {
            const auto ens = tfim::run_qate_blocks(qc);
            out.rec = tfim::block_benchmarks(ens);
            if (cfg.bod) {
                const double width = tfim::spectral_width(ens);
                const auto filter = cfg.filter.dt
                                        ? bench::filter_design(cfg.bod->delta, *cfg.filter.dt,
                                                               cfg.filter.x)
                                        : bench::filter_for_width(cfg.bod->delta, width,
                                                                  cfg.filter.x);
                out.bod = tfim::bod_filtered_ti(ens, filter, cfg.bod->omega_max);
                if (cfg.bod->perturbative_order > 0)
                    out.bod_pert = tfim::bod_perturbative(ens, cfg.bod->perturbative_order,
                                                          2.0 * cfg.bod->delta,
                                                          cfg.bod->omega_max);
            }
            break;
        }
        case Engine::gaussian_fermion: {
            gaussian::GaussianRunOptions opts;
            if (cfg.bod) {
                opts.want_bod = true;
                opts.bod_delta = cfg.bod->delta;
                opts.bod_omega_max = cfg.bod->omega_max;
                opts.filter_x = cfg.filter.x;
            }
            const auto run = gaussian::run_qate_gaussian(qc, opts);
            out.rec = run.record;
            out.bod = run.bod;
            break;
        }
        case Engine::auto_resolve:
            throw std::logic_error("unresolved engine");
        }
    } catch (const std::exception& e) {
        out.error = e.what();
        out.rec = bench::BenchmarkRecord{};
    }
    out.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

// Executes all (N, T, beta) points. The point list is sorted up front, each
// point runs single-threaded, and the output order is independent of both
// the input list order and the worker count.
inline std::vector<ResultRecord> run_sweep(const ExperimentConfig& cfg, int workers = 1) {
    cfg.validate();
    struct Point {
        int n;
        double t, beta;
        bool operator<(const Point& o) const {
            if (n != o.n) return n < o.n;
            if (t != o.t) return t < o.t;
            return beta < o.beta;
        }
    };
    std::vector<Point> points;
    for (int n : cfg.n_list)
        for (double t : cfg.t_list)
            for (double beta : cfg.beta_list) points.push_back({n, t, beta});
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end(),
                             [](const Point& a, const Point& b) {
                                 return a.n == b.n && a.t == b.t && a.beta == b.beta;
                             }),
                 points.end());

    std::vector<ResultRecord> records(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size()) break;
            records[i] = run_point(cfg, points[i].n, points[i].t, points[i].beta);
        }
    };
    const int nw = std::max(1, workers);
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return records;
}

// ---------------------------------------------------------------------------
// Power-law fitting: least squares on (ln x, ln y).
// ---------------------------------------------------------------------------
struct PowerLawFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double r2 = 0.0;
    int points = 0;
};

inline PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& xy,
                                 double window_lo = -1.0, double window_hi = -1.0) {
    std::vector<std::pair<double, double>> sel;
    for (const auto& [x, y] : xy) {
        if (window_hi > window_lo && (x < window_lo || x > window_hi)) continue;
        if (!(x > 0.0) || !(y > 0.0))
            throw std::domain_error("fit_power_law: x and y must be positive");
        sel.emplace_back(std::log(x), std::log(y));
    }
    if (sel.size() < 3)
        throw std::domain_error("fit_power_law: need at least 3 points in the window");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [lx, ly] : sel) {
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double m = static_cast<double>(sel.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / m;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / m;
    for (const auto& [lx, ly] : sel) {
        const double pred = slope * lx + intercept;
        ss_res += (ly - pred) * (ly - pred);
        ss_tot += (ly - mean_y) * (ly - mean_y);
    }
    PowerLawFit fit;
    fit.exponent = slope;
    fit.prefactor = std::exp(intercept);
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    fit.points = static_cast<int>(sel.size());
    return fit;
}

// Straight-line least squares on (x, y), for the linear-in-N insets.
struct LinearFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

inline LinearFit fit_linear(const std::vector<std::pair<double, double>>& xy) {
    if (xy.size() < 2) throw std::domain_error("fit_linear: need at least 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : xy) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(xy.size());
    LinearFit f;
    f.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / m;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / m;
    for (const auto& [x, y] : xy) {
        const double pred = f.slope * x + f.intercept;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

// ---------------------------------------------------------------------------
// Persistence. The CSV header is a fixed contract.
// ---------------------------------------------------------------------------
inline constexpr const char* kCsvHeader =
    "name,engine,N,T,beta,schedule,tau,energy,e_min,delta_e_qate,delta_e_min,variance,"
    "var_min,delta_var,cod,purity,entropy,error";

namespace detail {
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace detail

inline std::string record_csv_row(const ResultRecord& r) {
    std::ostringstream os;
    using detail::fmt_double;
    os << r.name << ',' << r.engine << ',' << r.n_sites << ',' << fmt_double(r.total_time)
       << ',' << fmt_double(r.beta) << ',' << r.schedule_kind << ',' << fmt_double(r.tau) << ','
       << fmt_double(r.rec.energy) << ',' << fmt_double(r.rec.e_min) << ','
       << fmt_double(r.rec.delta_e_qate) << ',' << fmt_double(r.rec.delta_e_min) << ','
       << fmt_double(r.rec.variance) << ',' << fmt_double(r.rec.var_min) << ','
       << fmt_double(r.rec.delta_var) << ',' << fmt_double(r.rec.cod) << ','
       << fmt_double(r.rec.purity) << ',' << fmt_double(r.rec.entropy) << ',' << r.error;
    return os.str();
}

inline json record_to_json(const ResultRecord& r) {
    json j;
    j["name"] = r.name;
    j["engine"] = r.engine;
    j["config_hash"] = r.config_hash;
    j["N"] = r.n_sites;
    j["T"] = r.total_time;
    j["beta"] = r.beta;
    j["schedule"] = r.schedule_kind;
    j["tau"] = r.tau;
    j["energy"] = r.rec.energy;
    j["e_min"] = r.rec.e_min;
    j["delta_e_qate"] = r.rec.delta_e_qate;
    j["delta_e_min"] = r.rec.delta_e_min;
    j["variance"] = r.rec.variance;
    j["var_min"] = r.rec.var_min;
    j["delta_var"] = r.rec.delta_var;
    j["cod"] = r.rec.cod;
    j["purity"] = r.rec.purity;
    j["log_purity"] = r.rec.log_purity;
    j["entropy"] = r.rec.entropy;
    j["error"] = r.error;
    j["wall_time_s"] = r.wall_time_s;
    if (r.trace_dist_c3) j["trace_dist_c3"] = *r.trace_dist_c3;
    auto hist_to_json = [](const bench::BodHistogram& h) {
        json hj;
        hj["bin_width"] = h.bin_width;
        hj["purity_norm"] = h.purity_norm;
        hj["bin_centers"] = h.bin_centers;
        hj["values"] = h.values;
        return hj;
    };
    if (r.bod) j["bod"] = hist_to_json(*r.bod);
    if (r.bod_pert) j["bod_perturbative"] = hist_to_json(*r.bod_pert);
    return j;
}

inline ResultRecord record_from_json(const json& j) {
    ResultRecord r;
    r.name = j.at("name").get<std::string>();
    r.engine = j.at("engine").get<std::string>();
    r.config_hash = j.value("config_hash", std::uint64_t{0});
    r.n_sites = j.at("N").get<int>();
    r.total_time = j.at("T").get<double>();
    r.beta = j.at("beta").get<double>();
    r.schedule_kind = j.at("schedule").get<std::string>();
    r.tau = j.at("tau").get<double>();
    r.rec.energy = j.at("energy").get<double>();
    r.rec.e_min = j.at("e_min").get<double>();
    r.rec.delta_e_qate = j.at("delta_e_qate").get<double>();
    r.rec.delta_e_min = j.at("delta_e_min").get<double>();
    r.rec.variance = j.at("variance").get<double>();
    r.rec.var_min = j.at("var_min").get<double>();
    r.rec.delta_var = j.at("delta_var").get<double>();
    r.rec.cod = j.at("cod").get<double>();
    r.rec.purity = j.at("purity").get<double>();
    r.rec.log_purity = j.value("log_purity", 0.0);
    r.rec.entropy = j.at("entropy").get<double>();
    r.error = j.value("error", std::string());
    r.wall_time_s = j.value("wall_time_s", 0.0);
    if (j.contains("trace_dist_c3")) r.trace_dist_c3 = j.at("trace_dist_c3").get<double>();
    auto hist_from_json = [](const json& hj) {
        bench::BodHistogram h;
        h.bin_width = hj.at("bin_width").get<double>();
        h.purity_norm = hj.at("purity_norm").get<double>();
        h.bin_centers = hj.at("bin_centers").get<std::vector<double>>();
        h.values = hj.at("values").get<std::vector<double>>();
        return h;
    };
    if (j.contains("bod")) r.bod = hist_from_json(j.at("bod"));
    if (j.contains("bod_perturbative")) r.bod_pert = hist_from_json(j.at("bod_perturbative"));
    return r;
}

inline std::string point_tag(const ResultRecord& r) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "N%d_T%g_beta%g", r.n_sites, r.total_time, r.beta);
    return buf;
}

inline void write_bod_csv(const bench::BodHistogram& h, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
    out << "omega,mass,bin_width,purity_norm\n";
    for (std::size_t i = 0; i < h.values.size(); ++i)
        out << detail::fmt_double(h.bin_centers[i]) << ',' << detail::fmt_double(h.values[i])
            << ',' << detail::fmt_double(h.bin_width) << ','
            << detail::fmt_double(h.purity_norm) << '\n';
}

// Writes results.csv, results.json and per-point BOD CSVs under out_dir.
inline void emit_results(const std::vector<ResultRecord>& records,
                         const std::filesystem::path& out_dir) {
    if (records.empty()) throw std::domain_error("emit_results: no records");
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir / "results.csv");
    if (!csv) throw std::ios_base::failure("cannot write results.csv");
    csv << kCsvHeader << '\n';
    json all = json::array();
    for (const auto& r : records) {
        csv << record_csv_row(r) << '\n';
        json j = record_to_json(r);
        if (r.bod) {
            const std::string fname = "bod_" + r.name + "_" + point_tag(r) + ".csv";
            write_bod_csv(*r.bod, out_dir / fname);
            j["bod_path"] = fname;
        }
        if (r.bod_pert) {
            const std::string fname = "bod_pert_" + r.name + "_" + point_tag(r) + ".csv";
            write_bod_csv(*r.bod_pert, out_dir / fname);
            j["bod_perturbative_path"] = fname;
        }
        all.push_back(std::move(j));
    }
    std::ofstream js(out_dir / "results.json");
    if (!js) throw std::ios_base::failure("cannot write results.json");
    js << all.dump(1) << '\n';
}

inline std::vector<ResultRecord> load_records_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open '" + path.string() + "'");
    json all = json::parse(in);
    std::vector<ResultRecord> records;
    for (const auto& j : all) records.push_back(record_from_json(j));
    return records;
}

inline std::vector<ResultRecord> load_records_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("results csv: empty file");
    if (line != kCsvHeader) throw ConfigError("results csv: unexpected header");
    std::vector<ResultRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        // the error field may be empty (trailing comma)
        while (cells.size() < 18) cells.push_back("");
        ResultRecord r;
        r.name = cells[0];
        r.engine = cells[1];
        r.n_sites = std::stoi(cells[2]);
        r.total_time = std::stod(cells[3]);
        r.beta = std::stod(cells[4]);
        r.schedule_kind = cells[5];
        r.tau = std::stod(cells[6]);
        r.rec.energy = std::stod(cells[7]);
        r.rec.e_min = std::stod(cells[8]);
        r.rec.delta_e_qate = std::stod(cells[9]);
        r.rec.delta_e_min = std::stod(cells[10]);
        r.rec.variance = std::stod(cells[11]);
        r.rec.var_min = std::stod(cells[12]);
        r.rec.delta_var = std::stod(cells[13]);
        r.rec.cod = std::stod(cells[14]);
        r.rec.purity = std::stod(cells[15]);
        r.rec.entropy = std::stod(cells[16]);
        r.error = cells[17];
        records.push_back(std::move(r));
    }
    return records;
}

// Quantity accessor for fits and figure series.
inline double record_quantity(const ResultRecord& r, const std::string& q) {
    if (q == "cod") return r.rec.cod;
    if (q == "energy") return r.rec.energy;
    if (q == "e_min") return r.rec.e_min;
    if (q == "delta_e_qate") return r.rec.delta_e_qate;
    if (q == "delta_e_qate_per_n") return r.rec.delta_e_qate / r.n_sites;
    if (q == "delta_e_min") return r.rec.delta_e_min;
    if (q == "variance") return r.rec.variance;
    if (q == "var_min") return r.rec.var_min;
    if (q == "delta_var") return r.rec.delta_var;
    if (q == "delta_var_rel") return r.rec.delta_var / r.rec.variance;
    if (q == "purity") return r.rec.purity;
    if (q == "entropy") return r.rec.entropy;
    if (q == "trace_dist_c3") {
        if (!r.trace_dist_c3) throw std::domain_error("record has no trace_dist_c3");
        return *r.trace_dist_c3;
    }
    throw std::domain_error("unknown quantity '" + q + "'");
}

struct GroupedFit {
    std::string group;
    PowerLawFit fit;
};

// Fits quantity vs axis over the window, one fit per group of records
// sharing the remaining parameters.
inline std::vector<GroupedFit> fit_records(const std::vector<ResultRecord>& records,
                                           const std::string& quantity, const std::string& axis,
                                           double lo, double hi) {
    std::map<std::string, std::vector<std::pair<double, double>>> groups;
    for (const auto& r : records) {
        if (!r.error.empty()) continue;
        double x = 0.0;
        char key[160];
        if (axis == "T") {
            x = r.total_time;
            std::snprintf(key, sizeof(key), "%s N=%d beta=%g", r.name.c_str(), r.n_sites,
                          r.beta);
        } else if (axis == "N") {
            x = r.n_sites;
            std::snprintf(key, sizeof(key), "%s T=%g beta=%g", r.name.c_str(), r.total_time,
                          r.beta);
        } else if (axis == "S_over_N") {
            x = r.rec.entropy / r.n_sites;
            std::snprintf(key, sizeof(key), "%s N=%d T=%g", r.name.c_str(), r.n_sites,
                          r.total_time);
        } else {
            throw std::domain_error("unknown fit axis '" + axis + "'");
        }
        groups[key].emplace_back(x, record_quantity(r, quantity));
    }
    std::vector<GroupedFit> out;
    for (auto& [key, xy] : groups) {
        std::sort(xy.begin(), xy.end());
        int in_window = 0;
        for (const auto& [x, y] : xy)
            if (x >= lo && x <= hi) ++in_window;
        if (in_window < 3) continue;
        out.push_back({key, fit_power_law(xy, lo, hi)});
    }
    if (out.empty()) throw std::domain_error("fit: no group has 3+ points in the window");
    return out;
}

// ---------------------------------------------------------------------------
// Figure bundles: plain per-series CSV files plus a manifest.
// ---------------------------------------------------------------------------
namespace detail {

inline void write_series(const std::filesystem::path& path,
                         const std::vector<std::pair<double, double>>& xy,
                         const std::string& xname, const std::string& yname) {
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
    out << xname << ',' << yname << '\n';
    for (const auto& [x, y] : xy) out << fmt_double(x) << ',' << fmt_double(y) << '\n';
}

// quantity-vs-T series grouped by N, written as one CSV per N.
inline json series_by_n(const std::vector<ResultRecord>& records, const std::string& quantity,
                        const std::filesystem::path& dir) {
    std::map<int, std::vector<std::pair<double, double>>> series;
    for (const auto& r : records) {
        if (!r.error.empty()) continue;
        series[r.n_sites].emplace_back(r.total_time, record_quantity(r, quantity));
    }
    json files = json::array();
    for (auto& [n, xy] : series) {
        std::sort(xy.begin(), xy.end());
        const std::string fname = quantity + "_vs_T_N" + std::to_string(n) + ".csv";
        write_series(dir / fname, xy, "T", quantity);
        files.push_back(fname);
    }
    return files;
}

inline json series_vs_n(const std::vector<ResultRecord>& records, const std::string& quantity,
                        double at_t, const std::filesystem::path& dir,
                        const std::string& fname) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& r : records) {
        if (!r.error.empty()) continue;
        if (std::abs(r.total_time - at_t) < 1e-9 * std::max(1.0, at_t))
            xy.emplace_back(r.n_sites, record_quantity(r, quantity));
    }
    std::sort(xy.begin(), xy.end());
    write_series(dir / fname, xy, "N", quantity);
    return fname;
}

inline json bod_series(const std::vector<ResultRecord>& records,
                       const std::filesystem::path& dir, bool perturbative = false) {
    json files = json::array();
    for (const auto& r : records) {
        const auto& h = perturbative ? r.bod_pert : r.bod;
        if (!h) continue;
        const std::string fname = std::string(perturbative ? "bod_pert_" : "bod_") +
                                  point_tag(r) + ".csv";
        write_bod_csv(*h, dir / fname);
        files.push_back(fname);
    }
    return files;
}

} // namespace detail

// Grouping of persisted records into the per-figure plot-data series. The
// paper does not list its exact T grids, so bundles note the log-spaced
// substitution in their manifest.
inline void emit_figure_data(const std::vector<ResultRecord>& records,
                             const std::string& figure_id,
                             const std::filesystem::path& out_root) {
    if (records.empty()) throw std::domain_error("emit_figure_data: no records");
    const std::filesystem::path dir = out_root / figure_id;
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["figure"] = figure_id;
    manifest["notes"] =
        "T grids are log-spaced stand-ins for the source plots' unspecified grids";
    double t_max = 0.0;
    int n_max = 0;
    for (const auto& r : records) {
        t_max = std::max(t_max, r.total_time);
        n_max = std::max(n_max, r.n_sites);
    }

    if (figure_id == "fig2a" || figure_id == "fig3a" || figure_id == "fig4a" ||
        figure_id == "fig7a" || figure_id == "fig8a" || figure_id == "fig10a") {
        manifest["series"] = detail::series_by_n(records, "cod", dir);
        double t_inset = 0.0; // prefer T = 100 when present
        for (const auto& r : records)
            if (std::abs(r.total_time - 100.0) < 1e-9) t_inset = 100.0;
        if (t_inset == 0.0) t_inset = t_max;
        if (figure_id == "fig4a" || figure_id == "fig10a")
            manifest["inset"] = detail::series_vs_n(records, "delta_e_min", t_inset, dir,
                                                    "inset_delta_e_min_vs_N.csv");
        else
            manifest["inset"] =
                detail::series_vs_n(records, "cod", t_inset, dir, "inset_cod_vs_N.csv");
        manifest["inset_T"] = t_inset;
    } else if (figure_id == "fig2b" || figure_id == "fig3b" || figure_id == "fig4b" ||
               figure_id == "fig7b" || figure_id == "fig8b" || figure_id == "fig10b") {
        manifest["series"] = detail::series_by_n(records, "delta_e_qate_per_n", dir);
        if (figure_id == "fig4b") {
            manifest["inset"] = detail::series_by_n(records, "delta_var_rel", dir);
        } else {
            double t_inset = t_max;
            manifest["inset"] = detail::series_vs_n(records, "delta_e_min", t_inset, dir,
                                                    "inset_delta_e_min_vs_N.csv");
            manifest["inset_T"] = t_inset;
        }
    } else if (figure_id == "fig2c" || figure_id == "fig3c" || figure_id == "fig4c" ||
               figure_id == "fig10c") {
        std::vector<ResultRecord> biggest;
        for (const auto& r : records)
            if (r.n_sites == n_max && r.bod) biggest.push_back(r);
        manifest["series"] = detail::bod_series(biggest, dir);
        manifest["N"] = n_max;
    } else if (figure_id == "fig5") {
        std::map<int, std::vector<std::pair<double, double>>> series;
        for (const auto& r : records)
            if (r.error.empty() && r.trace_dist_c3)
                series[r.n_sites].emplace_back(r.total_time, *r.trace_dist_c3);
        json files = json::array();
        for (auto& [n, xy] : series) {
            std::sort(xy.begin(), xy.end());
            const std::string fname = "trace_dist_vs_T_N" + std::to_string(n) + ".csv";
            detail::write_series(dir / fname, xy, "T", "trace_dist_c3");
            files.push_back(fname);
        }
        manifest["series"] = files;
    } else if (figure_id == "fig6") {
        std::vector<ResultRecord> biggest;
        for (const auto& r : records)
            if (r.n_sites == n_max && r.bod) biggest.push_back(r);
        manifest["filtered"] = detail::bod_series(biggest, dir, false);
        manifest["perturbative"] = detail::bod_series(biggest, dir, true);
        manifest["N"] = n_max;
    } else if (figure_id == "fig9") {
        // quantities vs S/N grouped by T at fixed N
        json files = json::array();
        for (const std::string q : {"cod", "delta_e_qate_per_n"}) {
            std::map<double, std::vector<std::pair<double, double>>> series;
            for (const auto& r : records)
                if (r.error.empty())
                    series[r.total_time].emplace_back(r.rec.entropy / r.n_sites,
                                                      record_quantity(r, q));
            for (auto& [t, xy] : series) {
                std::sort(xy.begin(), xy.end());
                char fname[128];
                std::snprintf(fname, sizeof(fname), "%s_vs_SoverN_T%g.csv", q.c_str(), t);
                detail::write_series(dir / fname, xy, "S_over_N", q);
                files.push_back(std::string(fname));
            }
        }
        manifest["series"] = files;
    } else {
        throw std::domain_error("unknown figure id '" + figure_id + "'");
    }
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw std::ios_base::failure("cannot write manifest.json");
    mf << manifest.dump(1) << '\n';
}

} // namespace qate::experiments
