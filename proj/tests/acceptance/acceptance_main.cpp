// Acceptance suite: one integration check per headline criterion, each
// printing a single PASS/FAIL line with the measured values. Exit status is
// the number of failed criteria.
//
//   qate_acceptance [--only K] [--list]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qate/exact_diag.hpp"
#include "qate/experiments.hpp"
#include "qate/gaussian.hpp"
#include "qate/spectral.hpp"
#include "qate/tfim_blocks.hpp"

using namespace qate;
namespace qe = qate::experiments;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Check {
    Outcome& out;
    void operator()(bool ok, const std::string& what) {
        if (!ok) {
            out.pass = false;
            out.detail += (out.detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

QateConfig tfim_cfg(int n, double g0, double g1, double beta, double total_time,
                    RampSchedule sched = RampSchedule::linear()) {
    QateConfig cfg;
    cfg.h_init = tfim_spec(n, g0);
    cfg.h_final = tfim_spec(n, g1);
    cfg.beta = beta;
    cfg.total_time = total_time;
    cfg.tau = 0.1;
    cfg.schedule = std::move(sched);
    return cfg;
}

QateConfig mixed_cfg(int n, double h0, double g0, double h1, double g1, double beta,
                     double total_time) {
    QateConfig cfg;
    cfg.h_init = mixed_field_spec(n, 1.0, h0, g0);
    cfg.h_final = mixed_field_spec(n, 1.0, h1, g1);
    cfg.beta = beta;
    cfg.total_time = total_time;
    cfg.tau = 0.1;
    return cfg;
}

QateConfig iso_cfg(int n, double g, double beta, double total_time) {
    QateConfig cfg;
    cfg.h_init = z_field_spec(n, g);
    cfg.h_final = tfim_spec(n, g);
    cfg.beta = beta;
    cfg.total_time = total_time;
    cfg.tau = 0.1;
    return cfg;
}

std::vector<double> log_grid(double lo, double hi, int points) {
    std::vector<double> out(points);
    for (int i = 0; i < points; ++i)
        out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
    return out;
}

double fit_exponent(const std::vector<std::pair<double, double>>& xy) {
    return qe::fit_power_law(xy).exponent;
}

// ---------------------------------------------------------------------------
// 1. Cross-engine oracle equivalence: blocks vs dense ED.
// ---------------------------------------------------------------------------
Outcome crit01() {
    Outcome out;
    Check check{out};
    double worst_bench = 0.0, worst_spec = 0.0;
    for (int n : {4, 6, 8}) {
        const auto cfg = tfim_cfg(n, 1.1, 1.5, 1.0, 10.0);
        const auto rb = tfim::block_benchmarks(tfim::run_qate_blocks(cfg));
        const auto dense = ed::run_qate_dense(cfg);
        for (double d :
             {std::abs(rb.energy - dense.record.energy), std::abs(rb.cod - dense.record.cod),
              std::abs(rb.purity - dense.record.purity),
              std::abs(rb.entropy - dense.record.entropy)})
            worst_bench = std::max(worst_bench, d);

        // spectrum of the spin Hamiltonian vs the free-fermion reconstruction
        std::vector<double> rec{0.0};
        auto extend = [&](std::initializer_list<double> levels) {
            std::vector<double> next;
            for (double e : rec)
                for (double l : levels) next.push_back(e + l);
            rec = std::move(next);
        };
        for (int k = 1; k <= n / 2 - 1; ++k) {
            const double eps = tfim::eigenmode(1.5, k, n);
            extend({-eps, 0.0, 0.0, eps});
        }
        extend({2.5, -2.5});
        extend({0.5, -0.5});
        std::sort(rec.begin(), rec.end());
        const auto eig = ed::diagonalize(ed::build_hamiltonian(tfim_spec(n, 1.5)));
        for (int i = 0; i < eig.energies.size(); ++i)
            worst_spec = std::max(worst_spec, std::abs(eig.energies[i] - rec[i]));
    }
    check(worst_bench < 1e-8, fmt("benchmark deviation %.2e >= 1e-8", worst_bench));
    check(worst_spec < 1e-10, fmt("spectrum deviation %.2e >= 1e-10", worst_spec));
    if (out.pass)
        out.detail = fmt("benchmarks within %.1e, spectra within %.1e", worst_bench, worst_spec);
    return out;
}

// ---------------------------------------------------------------------------
// 2. Gaussian-engine oracle equivalence at N = 6.
// ---------------------------------------------------------------------------
Outcome crit02() {
    Outcome out;
    Check check{out};
    const auto cfg = iso_cfg(6, 1.5, 1.0, 10.0);
    const auto run = gaussian::run_qate_gaussian(cfg);
    const auto dense = ed::run_qate_dense(cfg);
    const auto target = gaussian::thermal_gaussian(gaussian::bdg_from_spec(tfim_spec(6, 1.5)), 1.0);
    const double ov = gaussian::overlap(run.state, target);
    const auto gibbs_f = ed::gibbs(ed::build_hamiltonian(tfim_spec(6, 1.5)), 1.0);
    const double ov_dense = (dense.rho_final.rho * gibbs_f.rho).trace().real();
    const double worst = std::max({std::abs(run.record.energy - dense.record.energy),
                                   std::abs(run.record.variance - dense.record.variance),
                                   std::abs(run.record.purity - dense.record.purity),
                                   std::abs(run.record.cod - dense.record.cod),
                                   std::abs(ov - ov_dense)});
    check(worst < 1e-7, fmt("worst deviation %.2e >= 1e-7", worst));
    if (out.pass) out.detail = fmt("energy/variance/purity/COD/overlap within %.1e", worst);
    return out;
}

// ---------------------------------------------------------------------------
// 3. TFIM scaling: COD and dE ~ T^-2 at N = 1000, COD ~ N at T = 100.
// ---------------------------------------------------------------------------
Outcome crit03() {
    Outcome out;
    Check check{out};
    std::vector<std::pair<double, double>> cod_t, de_t;
    for (double t : log_grid(50.0, 500.0, 6)) {
        const auto r = tfim::block_benchmarks(tfim::run_qate_blocks(tfim_cfg(1000, 1.1, 1.5, 1.0, t)));
        cod_t.emplace_back(t, r.cod);
        de_t.emplace_back(t, r.delta_e_qate / 1000.0);
    }
    const double cod_exp = fit_exponent(cod_t);
    const double de_exp = fit_exponent(de_t);
    std::vector<std::pair<double, double>> cod_n;
    for (int n : {100, 160, 250, 400, 630, 1000}) {
        const auto r = tfim::block_benchmarks(tfim::run_qate_blocks(tfim_cfg(n, 1.1, 1.5, 1.0, 100.0)));
        cod_n.emplace_back(n, r.cod);
    }
    const double n_exp = fit_exponent(cod_n);
    check(std::abs(cod_exp + 2.0) <= 0.3, fmt("COD T-exponent %.3f outside -2.0+-0.3", cod_exp));
    check(std::abs(de_exp + 2.0) <= 0.3, fmt("dE/N T-exponent %.3f outside -2.0+-0.3", de_exp));
    check(std::abs(n_exp - 1.0) <= 0.2, fmt("COD N-exponent %.3f outside 1.0+-0.2", n_exp));
    out.detail = fmt("COD ~ T^%.3f, dE/N ~ T^%.3f, COD ~ N^%.3f", cod_exp, de_exp, n_exp);
    return out;
}

// Shared N = 1000, T = 100 ensemble for criteria 4 and 5.
const tfim::TfimEnsemble& big_ensemble() {
    static const tfim::TfimEnsemble e = tfim::run_qate_blocks(tfim_cfg(1000, 1.1, 1.5, 1.0, 100.0));
    return e;
}

// ---------------------------------------------------------------------------
// 4. BOD step at |E_i - E_j| = 2 for g_final = 1.5.
// ---------------------------------------------------------------------------
Outcome crit04() {
    Outcome out;
    Check check{out};
    const auto& ens = big_ensemble();
    const double delta = 0.04;
    const auto filter = bench::filter_for_width(delta, tfim::spectral_width(ens));
    const auto hist = tfim::bod_filtered_ti(ens, filter, 3.2);
    double below = 0.0, above = 0.0;
    int nb = 0, na = 0;
    for (std::size_t i = 0; i < hist.values.size(); ++i) {
        const double w = hist.bin_centers[i];
        if (w >= 0.5 && w <= 1.8) {
            below += hist.values[i];
            ++nb;
        } else if (w >= 2.2 && w <= 3.0) {
            above += hist.values[i];
            ++na;
        }
    }
    below /= nb;
    above /= na;
    check(above >= 100.0 * std::abs(below),
          fmt("mass ratio %.1f < 100", above / std::max(std::abs(below), 1e-300)));
    out.detail = fmt("mean mass below step %.3e, above %.3e (ratio %.0f)", below, above,
                     above / std::max(std::abs(below), 1e-300));
    return out;
}

// ---------------------------------------------------------------------------
// 5. Perturbative BOD matches the filtered BOD above the step.
// ---------------------------------------------------------------------------
Outcome crit05() {
    Outcome out;
    Check check{out};
    const auto& ens = big_ensemble();
    const double delta = 0.04;
    const auto filter = bench::filter_for_width(delta, tfim::spectral_width(ens));
    const auto filtered = tfim::bod_filtered_ti(ens, filter, 3.2);
    // perturbative prediction evaluated through the same Gaussian window
    const auto pert = tfim::bod_perturbative_filtered(ens, 2, delta, 3.2);
    double worst = 0.0;
    int bins = 0;
    for (std::size_t i = 0; i < filtered.values.size() && i < pert.values.size(); ++i) {
        const double w = filtered.bin_centers[i];
        if (w < 2.2 || w > 3.0) continue;
        ++bins;
        const double rel = std::abs(pert.values[i] - filtered.values[i]) / filtered.values[i];
        worst = std::max(worst, rel);
    }
    check(bins >= 8, fmt("only %d bins in the comparison window", bins));
    check(worst <= 0.10, fmt("worst per-bin deviation %.1f%% > 10%%", 100.0 * worst));
    out.detail = fmt("%d bins in [2.2, 3.0], worst deviation %.2f%%", bins, 100.0 * worst);
    return out;
}

// ---------------------------------------------------------------------------
// 6. Kibble-Zurek crossing: T^-1/2 at short times, steeper than T^-1.5 later.
// ---------------------------------------------------------------------------
Outcome crit06() {
    Outcome out;
    Check check{out};
    std::vector<std::pair<double, double>> stated, plateau, long_t;
    for (double t : log_grid(10.0, 100.0, 7)) {
        const auto r = tfim::block_benchmarks(tfim::run_qate_blocks(tfim_cfg(1000, 0.8, 1.2, 1.0, t)));
        stated.emplace_back(t, r.cod);
    }
    // diagnostic: at N = 1000 the T^-1/2 plateau empirically begins near
    // T ~ 100 (the stated window still carries the decaying quench
    // transient); the plateau fit documents that the regime itself exists
    for (double t : log_grid(100.0, 1000.0, 6)) {
        const auto r = tfim::block_benchmarks(tfim::run_qate_blocks(tfim_cfg(1000, 0.8, 1.2, 1.0, t)));
        plateau.emplace_back(t, r.cod);
    }
    for (double t : log_grid(1000.0, 10000.0, 5)) {
        const auto r = tfim::block_benchmarks(tfim::run_qate_blocks(tfim_cfg(64, 0.8, 1.2, 1.0, t)));
        long_t.emplace_back(t, r.cod);
    }
    const double e_stated = fit_exponent(stated);
    const double e_plateau = fit_exponent(plateau);
    const double e_long = fit_exponent(long_t);
    check(std::abs(e_stated + 0.5) <= 0.15,
          fmt("COD exponent %.3f over the stated T in [10, 100] outside -0.5+-0.15 "
              "(the plateau fit over [100, 1000] gives %.3f)",
              e_stated, e_plateau));
    check(e_long <= -1.5, fmt("long-time exponent %.3f > -1.5", e_long));
    out.detail += fmt("%sCOD ~ T^%.3f in the stated [10,100], T^%.3f in [100,1000], "
                      "T^%.3f at N=64 long times",
                      out.detail.empty() ? "" : "; ", e_stated, e_plateau, e_long);
    return out;
}

// ---------------------------------------------------------------------------
// 7. Smooth ramp: fitted COD exponent <= -6 over T in [30, 100].
// ---------------------------------------------------------------------------
Outcome crit07() {
    Outcome out;
    Check check{out};
    std::vector<std::pair<double, double>> cod_t;
    for (double t : log_grid(30.0, 100.0, 6)) {
        const auto r = tfim::block_benchmarks(
            tfim::run_qate_blocks(tfim_cfg(1000, 1.1, 1.5, 1.0, t, RampSchedule::smooth())));
        cod_t.emplace_back(t, r.cod);
    }
    const double e = fit_exponent(cod_t);
    check(e <= -6.0, fmt("smooth-ramp exponent %.3f > -6", e));
    out.detail = fmt("COD ~ T^%.3f with the smooth schedule", e);
    return out;
}

// ---------------------------------------------------------------------------
// 8. Non-integrable mixed-field runs (ED).
// ---------------------------------------------------------------------------
Outcome crit08() {
    Outcome out;
    Check check{out};
    const auto t_grid = log_grid(10.0, 100.0, 5);
    std::vector<double> exps;
    std::vector<double> cod_at_tmax;
    std::vector<std::pair<double, double>> dmin_n;
    for (int n : {6, 8, 10}) {
        std::vector<std::pair<double, double>> cod_t;
        double dmin = 0.0;
        for (double t : t_grid) {
            const auto run = ed::run_qate_dense(mixed_cfg(n, 0.0, 1.05, 0.5, 1.05, 1.0, t));
            cod_t.emplace_back(t, run.record.cod);
            dmin = run.record.delta_e_min;
        }
        exps.push_back(fit_exponent(cod_t));
        cod_at_tmax.push_back(cod_t.back().second);
        dmin_n.emplace_back(n, dmin);
    }
    for (std::size_t i = 0; i < exps.size(); ++i)
        check(std::abs(exps[i] + 2.0) <= 0.4,
              fmt("COD exponent %.3f at N=%d outside -2+-0.4", exps[i], 6 + 2 * static_cast<int>(i)));
    const double spread = *std::max_element(cod_at_tmax.begin(), cod_at_tmax.end()) /
                          *std::min_element(cod_at_tmax.begin(), cod_at_tmax.end());
    check(spread < 2.0, fmt("COD spread across N is %.2fx >= 2x", spread));
    const auto lin = qe::fit_linear(dmin_n);
    check(lin.r2 > 0.95, fmt("delta_e_min linear fit r2 = %.3f <= 0.95", lin.r2));
    out.detail = fmt("COD ~ T^{%.2f, %.2f, %.2f}, spread %.2fx, dE_min fit r2 = %.3f", exps[0],
                     exps[1], exps[2], spread, lin.r2);
    return out;
}

// ---------------------------------------------------------------------------
// 9. Degenerate initial state decays more slowly at large T.
// ---------------------------------------------------------------------------
Outcome crit09() {
    Outcome out;
    Check check{out};
    // the degenerate start's flattening shows up beyond T ~ 100 at N = 8;
    // fit the large-T window [80, 320] for both starts
    const auto t_grid = log_grid(80.0, 320.0, 5);
    std::vector<std::pair<double, double>> nondeg, deg;
    for (double t : t_grid) {
        nondeg.emplace_back(
            t, ed::run_qate_dense(mixed_cfg(8, 0.0, 1.05, 0.5, 1.05, 1.0, t)).record.cod);
        deg.emplace_back(
            t, ed::run_qate_dense(mixed_cfg(8, 0.5, 0.0, 0.5, 1.05, 1.0, t)).record.cod);
    }
    const double e_nondeg = fit_exponent(nondeg);
    const double e_deg = fit_exponent(deg);
    check(e_deg >= e_nondeg + 0.3,
          fmt("degenerate exponent %.3f not shallower than %.3f by 0.3", e_deg, e_nondeg));
    out.detail = fmt("large-T COD exponents: nondegenerate %.3f, degenerate %.3f", e_nondeg, e_deg);
    return out;
}

// ---------------------------------------------------------------------------
// 10. Isospectral identities and long-time fits at N = 128.
// ---------------------------------------------------------------------------
Outcome crit10() {
    Outcome out;
    Check check{out};
    for (int n : {6, 64}) {
        const auto run = gaussian::run_qate_gaussian(iso_cfg(n, 1.5, 1.0, 10.0));
        check(std::abs(run.record.delta_e_min) < 1e-10,
              fmt("delta_e_min %.2e at N=%d >= 1e-10", run.record.delta_e_min, n));
    }
    {
        const auto cfg = iso_cfg(6, 1.5, 1.0, 10.0);
        const auto dense = ed::run_qate_dense(cfg);
        const auto gibbs_f = ed::gibbs(ed::build_hamiltonian(tfim_spec(6, 1.5)), 1.0);
        const double d_kl = bench::relative_entropy(dense.rho_final.rho, gibbs_f.rho);
        const double rhs =
            bench::relative_entropy_isospectral_identity(1.0, dense.record.delta_e_qate);
        check(std::abs(d_kl - rhs) < 1e-8,
              fmt("relative entropy identity off by %.2e", std::abs(d_kl - rhs)));
    }
    std::vector<std::pair<double, double>> cod_t, de_t;
    for (double t : log_grid(250.0, 1000.0, 5)) {
        const auto run = gaussian::run_qate_gaussian(iso_cfg(128, 1.5, 1.0, t));
        cod_t.emplace_back(t, run.record.cod);
        de_t.emplace_back(t, run.record.delta_e_qate);
    }
    const double cod_exp = fit_exponent(cod_t);
    const double de_exp = fit_exponent(de_t);
    check(cod_exp >= -3.4 && cod_exp <= -2.2,
          fmt("COD exponent %.3f outside [-3.4, -2.2]", cod_exp));
    check(de_exp >= -2.3 && de_exp <= -1.1, fmt("dE exponent %.3f outside [-2.3, -1.1]", de_exp));
    out.detail = fmt("dE_min = 0 ok, D(rho||rho_G) = beta dE ok, COD ~ T^%.3f, dE ~ T^%.3f",
                     cod_exp, de_exp);
    return out;
}

// ---------------------------------------------------------------------------
// 11. Local observables: central-3-site trace distance decays then flattens.
// ---------------------------------------------------------------------------
Outcome crit11() {
    Outcome out;
    Check check{out};
    std::vector<std::pair<double, double>> early, late;
    for (double t : log_grid(5.0, 50.0, 8)) {
        const auto run = ed::run_qate_dense(mixed_cfg(10, 0.0, 1.05, 0.5, 1.05, 1.0, t));
        const auto sites = ed::central_sites(10);
        const double dist = ed::trace_norm_distance(ed::reduced_density(run.rho_final, sites),
                                                    ed::reduced_density(run.rho_min, sites));
        if (t <= 20.0) early.emplace_back(t, dist);
        if (t >= 25.0) late.emplace_back(t, dist);
    }
    const double e_early = fit_exponent(early);
    const double e_late = fit_exponent(late);
    check(std::abs(e_early + 1.0) <= 0.3, fmt("early exponent %.3f outside -1+-0.3", e_early));
    check(e_late > -0.5, fmt("final-window exponent %.3f <= -0.5 (no flattening)", e_late));
    out.detail = fmt("distance ~ T^%.3f early, ~ T^%.3f in the final window", e_early, e_late);
    return out;
}

// ---------------------------------------------------------------------------
// 12. Conservation of entropy, purity, state eigenvalues across all engines.
// ---------------------------------------------------------------------------
Outcome crit12() {
    Outcome out;
    Check check{out};
    { // dense ED
        const auto cfg = mixed_cfg(8, 0.0, 1.05, 0.5, 1.05, 1.0, 20.0);
        const auto rho0 = ed::gibbs(ed::build_hamiltonian(cfg.h_init), cfg.beta);
        const auto rho1 = ed::qate_evolve(rho0, cfg);
        const auto e0 = linalg::eig_herm(rho0.rho);
        const auto e1 = linalg::eig_herm(rho1.rho);
        const double spec_dev = (e0.values - e1.values).cwiseAbs().maxCoeff();
        const double ent_dev = std::abs(bench::von_neumann_entropy_from_eigs(e0.values) -
                                        bench::von_neumann_entropy_from_eigs(e1.values));
        const double pur_dev = std::abs(rho0.rho.squaredNorm() - rho1.rho.squaredNorm());
        check(spec_dev < 1e-10, fmt("ED eigenvalue drift %.2e", spec_dev));
        check(ent_dev < 1e-10, fmt("ED entropy drift %.2e", ent_dev));
        check(pur_dev < 1e-10, fmt("ED purity drift %.2e", pur_dev));
    }
    { // gaussian
        const auto cfg = iso_cfg(64, 1.5, 1.0, 20.0);
        const auto h = gaussian::bdg_from_spec(cfg.h_init);
        const auto s0 = gaussian::thermal_gaussian(h, cfg.beta);
        const auto run = gaussian::run_qate_gaussian(cfg);
        const auto k0 = linalg::eig_herm(s0.kappa);
        const auto k1 = linalg::eig_herm(run.state.kappa);
        const double spec_dev = (k0.values - k1.values).cwiseAbs().maxCoeff();
        const double ent_dev = std::abs(gaussian::entropy(s0) - gaussian::entropy(run.state));
        const double pur_dev =
            std::abs(gaussian::log_purity(s0) - gaussian::log_purity(run.state));
        check(spec_dev < 1e-8, fmt("gaussian kappa spectrum drift %.2e", spec_dev));
        check(ent_dev < 1e-8, fmt("gaussian entropy drift %.2e", ent_dev));
        check(pur_dev < 1e-8, fmt("gaussian log-purity drift %.2e", pur_dev));
    }
    { // blocks
        const auto init = tfim::thermal_ensemble(1.0, 1.1, 1000);
        const auto ens = tfim::run_qate_blocks(tfim_cfg(1000, 1.1, 1.5, 1.0, 100.0));
        double worst = std::abs(init.log_purity - ens.log_purity);
        for (std::size_t i = 0; i < ens.blocks.size(); ++i) {
            Eigen::SelfAdjointEigenSolver<tfim::Mat4> a(init.blocks[i].rho);
            Eigen::SelfAdjointEigenSolver<tfim::Mat4> b(ens.blocks[i].rho);
            worst = std::max(worst,
                             (a.eigenvalues() - b.eigenvalues()).cwiseAbs().maxCoeff());
            worst = std::max(worst, std::abs(ens.blocks[i].rho.trace().real() - 1.0));
        }
        check(worst < 1e-10, fmt("block conservation drift %.2e", worst));
        if (out.pass) out.detail = fmt("worst block drift %.1e; ED and BdG conserved", worst);
    }
    return out;
}

// ---------------------------------------------------------------------------
// 13. Gaussian density-of-states identities.
// ---------------------------------------------------------------------------
Outcome crit13() {
    Outcome out;
    Check check{out};
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.1, 4.0);
    for (int trial = 0; trial < 20; ++trial) {
        const double beta = u(rng), si = u(rng), sf = u(rng);
        const auto r = bench::gaussian_dos_suite(beta, si, sf, 16);
        check(r.delta_e_min == 0.0, "delta_e_min not identically zero");
        check(r.var_min == sf * sf, "var_min != sigma_f^2");
    }
    if (out.pass) out.detail = "20 random (beta, sigma_i, sigma_f) triples exact";
    return out;
}

// ---------------------------------------------------------------------------
// 14. Per-block closed-form identities on a T = 100, N = 100 run.
// ---------------------------------------------------------------------------
Outcome crit14() {
    Outcome out;
    Check check{out};
    const auto ens = tfim::run_qate_blocks(tfim_cfg(100, 1.1, 1.5, 1.0, 100.0));
    double worst_purity = 0.0, worst_rel = 0.0, worst_abs = 0.0;
    int resolvable = 0;
    for (const auto& s : ens.summary) {
        const double a = s.pop_lo_adiabatic, b = s.pop_lo, d = s.outer_weight;
        worst_purity = std::max(worst_purity,
                                std::abs(a * a + (d - a) * (d - a) - b * b -
                                         (d - b) * (d - b) - 2.0 * std::norm(s.coh)));
        const auto closed = tfim::a6_identities(s);
        const double de = 2.0 * s.eps_final * (a - b);
        const double dvar = s.eps_final * s.eps_final *
                            ((d - 2 * a) * (d - 2 * a) - (d - 2 * b) * (d - 2 * b));
        if (de > 1e-8) {
            // gap resolvable above the Trotter-loop roundoff floor
            ++resolvable;
            worst_rel = std::max(worst_rel, std::abs(closed.delta_e - de) / de);
            worst_rel = std::max(worst_rel, std::abs(closed.delta_var - dvar) / std::abs(dvar));
        } else {
            worst_abs = std::max(worst_abs, std::abs(closed.delta_e - de));
            worst_abs = std::max(worst_abs, std::abs(closed.delta_var - dvar));
        }
    }
    check(worst_purity < 1e-12, fmt("purity identity residual %.2e >= 1e-12", worst_purity));
    check(worst_rel < 1e-3, fmt("closed-form relative error %.2e >= 1e-3", worst_rel));
    check(worst_abs < 1e-10, fmt("closed-form absolute error %.2e on unresolvable blocks", worst_abs));
    check(resolvable >= 15, fmt("only %d blocks resolvable above the fp floor", resolvable));
    out.detail = fmt("purity identity %.1e; %d/%zu blocks resolvable, worst rel %.2e",
                     worst_purity, resolvable, ens.summary.size(), worst_rel);
    return out;
}

// ---------------------------------------------------------------------------
// 15. Filter correctness against exact binning at N = 8 (dense spectrum).
// ---------------------------------------------------------------------------
Outcome crit15() {
    Outcome out;
    Check check{out};
    // A dense random N = 8 state gives the flattest coherence profile the
    // comparison can hope for (physical QATE states concentrate their
    // off-diagonal weight on a handful of pairs and are far spikier).
    const auto h = ed::build_hamiltonian(mixed_field_spec(8, 1.0, 0.5, 1.05));
    const auto eig = ed::diagonalize(h);
    const int dim = 256;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dn;
    CMat a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = cdouble(dn(rng), dn(rng));
    CMat rho = a * a.adjoint();
    rho /= rho.trace().real();
    const CMat coeffs = ed::coefficients_in_eigenbasis({8, rho}, eig);
    const auto& energies = eig.energies;
    const double delta = 0.5;
    const double width = energies[dim - 1] - energies[0];
    const auto filter = bench::filter_for_width(delta, width, 5.0);

    double purity = 0.0, diag = 0.0;
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) purity += std::norm(coeffs(i, j));
        diag += std::norm(coeffs(i, i));
    }
    std::vector<cdouble> samples(static_cast<std::size_t>(2 * filter.r + 1));
    for (long long m = 0; m <= filter.r; ++m) {
        const double t = filter.t_m(m);
        double re = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                re += std::norm(coeffs(i, j)) * std::cos((energies[i] - energies[j]) * t);
        samples[static_cast<std::size_t>(filter.r + m)] = re;
        samples[static_cast<std::size_t>(filter.r - m)] = re;
    }
    const int nbins = bench::bod_bin_index(width, delta) + 1;
    const auto filtered = bench::bod_filtered(samples, filter, nbins, purity, diag / purity);
    const auto exact = bench::bod_exact(coeffs, energies, delta);

    // diagnostics: the same filter output against the ideal Gaussian-window
    // sum (pure filter correctness), and the top-hat comparison split into
    // bulk and sparse-edge bins
    double worst = 0.0, worst_bulk = 0.0, worst_ideal = 0.0;
    int compared = 0;
    const double inv = 1.0 / (std::numbers::sqrt2 * delta);
    for (std::size_t i = 0; i < exact.values.size() && i < filtered.values.size(); ++i) {
        if (exact.values[i] <= 1e-6) continue;
        ++compared;
        const double rel =
            std::abs(filtered.values[i] - exact.values[i]) / exact.values[i];
        worst = std::max(worst, rel);
        if (exact.bin_centers[i] <= 16.0) worst_bulk = std::max(worst_bulk, rel);
        const double lo = i == 0 ? 0.0 : exact.bin_centers[i] - delta;
        const double hi = exact.bin_centers[i] + delta;
        double ideal = 0.0;
        for (int p = 0; p < dim; ++p)
            for (int q = 0; q < dim; ++q) {
                if (p == q) continue;
                const double d0 = energies[p] - energies[q];
                ideal += std::norm(coeffs(p, q)) * 0.5 *
                         ((std::erf((hi - d0) * inv) - std::erf((lo - d0) * inv)) +
                          (std::erf((hi + d0) * inv) - std::erf((lo + d0) * inv)));
            }
        ideal /= purity;
        if (i == 0) ideal += diag / purity;
        worst_ideal = std::max(worst_ideal, std::abs(filtered.values[i] - ideal) /
                                                std::max(ideal, 1e-300));
    }
    check(compared >= 20, fmt("only %d bins with mass > 1e-6", compared));
    check(worst <= 0.05, fmt("worst per-bin deviation vs top-hat binning %.1f%% > 5%% "
                             "(bins near the sparse spectral edge; bulk bins agree to "
                             "%.2f%%, and the ideal-Gaussian-window oracle to %.4f%%)",
                             100.0 * worst, 100.0 * worst_bulk, 100.0 * worst_ideal));
    out.detail += fmt("%s%d bins; vs top-hat: worst %.2f%% (bulk %.2f%%); vs ideal window: %.4f%%",
                      out.detail.empty() ? "" : "; ", compared, 100.0 * worst,
                      100.0 * worst_bulk, 100.0 * worst_ideal);
    return out;
}

// ---------------------------------------------------------------------------
// 16. rho_min optimality over random permutation pairings.
// ---------------------------------------------------------------------------
Outcome crit16() {
    Outcome out;
    Check check{out};
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int set = 0; set < 100; ++set) {
        RVec w(64), e(64);
        for (int i = 0; i < 64; ++i) {
            w[i] = u(rng) + 1e-6;
            e[i] = 6.0 * u(rng) - 3.0;
        }
        w /= w.sum();
        std::sort(w.begin(), w.end(), std::greater<double>());
        std::sort(e.begin(), e.end());
        const auto r = bench::rho_min_spectrum(w, e);
        std::vector<int> perm(64);
        std::iota(perm.begin(), perm.end(), 0);
        for (int trial = 0; trial < 20; ++trial) {
            std::shuffle(perm.begin(), perm.end(), rng);
            double energy = 0.0;
            for (int i = 0; i < 64; ++i) energy += w[i] * e[perm[i]];
            check(r.e_min <= energy + 1e-12, "sorted pairing beaten by a permutation");
        }
    }
    if (out.pass) out.detail = "E_min optimal over 100 sets x 20 permutations (dim 64)";
    return out;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria = {
    {1, "cross-engine blocks vs ED", crit01},
    {2, "gaussian engine vs ED", crit02},
    {3, "TFIM T^-2 and N scaling", crit03},
    {4, "BOD step at omega = 2", crit04},
    {5, "perturbative vs filtered BOD", crit05},
    {6, "Kibble-Zurek crossing", crit06},
    {7, "smooth-ramp scaling", crit07},
    {8, "mixed-field ED scaling", crit08},
    {9, "degenerate-start contrast", crit09},
    {10, "isospectral identities and fits", crit10},
    {11, "local-observable convergence", crit11},
    {12, "conservation suite", crit12},
    {13, "gaussian-DOS identities", crit13},
    {14, "per-block closed forms", crit14},
    {15, "filter vs exact binning", crit15},
    {16, "rho_min optimality", crit16},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--list") == 0) {
            for (const auto& c : kCriteria) std::printf("%2d %s\n", c.id, c.name);
            return 0;
        }
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    }
    int failures = 0;
    for (const auto& c : kCriteria) {
        if (only != 0 && c.id != only) continue;
        const auto started = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        std::printf("[%s] %02d %s: %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    return failures;
}
