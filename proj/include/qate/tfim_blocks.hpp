#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "qate/errors.hpp"
#include "qate/linalg.hpp"
#include "qate/model.hpp"
#include "qate/schedule.hpp"
#include "qate/spectral.hpp"

namespace qate::tfim {

using Mat4 = Eigen::Matrix4cd;
using Mat2 = Eigen::Matrix2cd;

// eps_k = 2 sqrt(1 + g^2 + 2g cos(2 pi k/N))
inline double eigenmode(double g, int k, int n_sites) {
    if (n_sites % 2 != 0) throw ConfigError("eigenmode: N must be even");
    if (k < -n_sites / 2 || k > n_sites / 2 - 1)
        throw ConfigError("eigenmode: k outside {-N/2, ..., N/2-1}");
    return tfim_mode_energy(g, k, n_sites);
}

struct BogoliubovCoeffs {
    double s = 0.0;
    double t = 0.0;
};

// The (s_k, t_k) of the 2x2 Bogoliubov rotation. Requires a paired dynamic
// mode (k != 0, -N/2) with eps_k > 0.
inline BogoliubovCoeffs bogoliubov_coeffs(double g, int k, int n_sites) {
    if (k == 0 || k == -n_sites / 2)
        throw ConfigError("bogoliubov_coeffs: mode k = 0 / -N/2 is static");
    const double eps = eigenmode(g, k, n_sites);
    if (eps < 1e-12)
        throw SingularityError("bogoliubov_coeffs: eps_k = 0 (critical unpaired mode)");
    const double theta = 2.0 * std::numbers::pi * k / n_sites;
    const double denom2 = eps * (0.5 * eps + g + std::cos(theta));
    if (denom2 <= 0.0)
        throw SingularityError("bogoliubov_coeffs: degenerate rotation");
    const double denom = std::sqrt(denom2);
    return {std::sin(theta) / denom, (0.5 * eps + g + std::cos(theta)) / denom};
}

// 4x4 basis-change T_k between the Fourier and Bogoliubov bases, in the
// ordering (|0>, f+_{-k}|0>, f+_k|0>, f+_k f+_{-k}|0>). Block diagonal with
// the middle identity; rho^fourier = T rho^bogoliubov T^adj.
inline Mat4 block_transform_from_coeffs(double s, double t) {
    Mat4 m = Mat4::Identity();
    m(0, 0) = s;
    m(0, 3) = cdouble(0.0, -t);
    m(3, 0) = cdouble(0.0, -t);
    m(3, 3) = s;
    return m;
}

inline Mat4 block_transform(double g, int k, int n_sites) {
    const auto bc = bogoliubov_coeffs(g, k, n_sites);
    return block_transform_from_coeffs(bc.s, bc.t);
}

inline double block_partition(double beta, double eps) {
    const double half = std::exp(-0.5 * beta * eps) + std::exp(0.5 * beta * eps);
    return half * half;
}

// Thermal populations of the block, diag(e^{x}, 1, 1, e^{-x})/Z with
// x = beta*eps, evaluated in overflow-safe form.
inline Eigen::Vector4d block_populations(double beta, double eps) {
    const double x = beta * eps;
    const double q = std::exp(-x); // <= 1
    const double denom = (1.0 + q) * (1.0 + q);
    Eigen::Vector4d p;
    p << 1.0 / denom, q / denom, q / denom, q * q / denom;
    return p;
}

// Gibbs block at coupling g in the Fourier basis:
// T_k diag(e^{beta eps}, 1, 1, e^{-beta eps}) / Z_k T_k^adj.
inline Mat4 thermal_block(double beta, double g, int k, int n_sites) {
    const double eps = eigenmode(g, k, n_sites);
    const Eigen::Vector4cd diag = block_populations(beta, eps).cast<cdouble>();
    const Mat4 t = block_transform(g, k, n_sites);
    return t * diag.asDiagonal() * t.adjoint();
}

// Propagator for one Trotter slice at coupling g: U = T e^{-iD tau} T^adj
// with D = diag(-eps, 0, 0, eps).
inline Mat4 block_propagator(double g, double tau, int k, int n_sites) {
    const double eps = eigenmode(g, k, n_sites);
    Eigen::Vector4cd phases;
    phases << std::exp(cdouble(0.0, eps * tau)), 1.0, 1.0, std::exp(cdouble(0.0, -eps * tau));
    const Mat4 t = block_transform(g, k, n_sites);
    return t * phases.asDiagonal() * t.adjoint();
}

struct BlockState {
    int k = 0;
    Mat4 rho = Mat4::Zero();
};

inline BlockState quench_step(const BlockState& block, double g_prime, double tau, int n_sites) {
    const Mat4 u = block_propagator(g_prime, tau, block.k, n_sites);
    return {block.k, u * block.rho * u.adjoint()};
}

// Per-block data extracted in the final Bogoliubov basis. `pop_lo_adiabatic`
// is the weight the lowest final level would carry in the perfectly
// adiabatic limit (the initial thermal weight, transported), `pop_lo` the
// actual QATE weight, `coh` the single surviving coherence.
struct BlockSummary {
    int k = 0;
    double eps_init = 0.0;
    double eps_final = 0.0;
    double z_init = 0.0;
    double pop_lo_adiabatic = 0.0; // a
    double pop_lo = 0.0;           // b
    double outer_weight = 0.0;     // d = 1 - 2/Z
    cdouble coh = 0.0;             // c_k
    double purity = 0.0;           // Tr rho_k^2 (full 4x4)
    double diag_sq = 0.0;          // purity - 2|c|^2
    double entropy = 0.0;
};

struct TfimEnsemble {
    int n_sites = 0;
    double beta = 0.0;
    double g_init = 0.0;
    double g_final = 0.0;
    std::vector<BlockState> blocks; // k = 1 .. N/2-1
    bool final_basis = false;
    std::vector<BlockSummary> summary; // filled once final_basis

    // static modes: occupation probability of n = 1, frozen under QATE
    double occ_k0 = 0.0;   // energy term -(1+g)(2n-1)
    double occ_half = 0.0; // energy term -(g-1)(2n-1)
    double log_purity = 0.0;
};

inline TfimEnsemble thermal_ensemble(double beta, double g, int n_sites) {
    if (n_sites % 2 != 0 || n_sites < 4)
        throw ConfigError("thermal_ensemble: N must be even and >= 4");
    TfimEnsemble e;
    e.n_sites = n_sites;
    e.beta = beta;
    e.g_init = e.g_final = g;
    e.blocks.reserve(n_sites / 2 - 1);
    for (int k = 1; k <= n_sites / 2 - 1; ++k)
        e.blocks.push_back({k, thermal_block(beta, g, k, n_sites)});
    e.occ_k0 = 1.0 / (1.0 + std::exp(-2.0 * beta * (1.0 + g)));
    e.occ_half = 1.0 / (1.0 + std::exp(-2.0 * beta * (g - 1.0)));
    double lp = 0.0;
    for (const auto& block : e.blocks) lp += std::log(block.rho.squaredNorm());
    for (double p : {e.occ_k0, e.occ_half}) lp += std::log(p * p + (1.0 - p) * (1.0 - p));
    e.log_purity = lp;
    return e;
}

namespace detail {

inline double two_level_entropy(double p) {
    double s = 0.0;
    if (p > 0.0) s -= p * std::log(p);
    if (p < 1.0) s -= (1.0 - p) * std::log(1.0 - p);
    return s;
}

// Rotate every block into the g_final Bogoliubov basis, check the protected
// structure and fill the summaries.
inline void finalize(TfimEnsemble& e) {
    const int n = e.n_sites;
    e.summary.clear();
    e.summary.reserve(e.blocks.size());
    double log_purity = 0.0;
    for (auto& block : e.blocks) {
        const Mat4 t = block_transform(e.g_final, block.k, n);
        block.rho = (t.adjoint() * block.rho * t).eval();
        const Mat4& r = block.rho;
        const double eps_i = eigenmode(e.g_init, block.k, n);
        const Eigen::Vector4d pops = block_populations(e.beta, eps_i);
        // structure: middle block diagonal at 1/Z, single outer coherence
        const double off = std::abs(r(0, 1)) + std::abs(r(0, 2)) + std::abs(r(1, 2)) +
                           std::abs(r(1, 3)) + std::abs(r(2, 3));
        if (off > 1e-9)
            throw std::runtime_error("tfim block lost its protected off-diagonal structure");
        if (std::abs(r(1, 1) - pops[1]) > 1e-9 || std::abs(r(2, 2) - pops[1]) > 1e-9)
            throw std::runtime_error("tfim block inner populations drifted");
        BlockSummary s;
        s.k = block.k;
        s.eps_init = eps_i;
        s.eps_final = eigenmode(e.g_final, block.k, n);
        s.z_init = block_partition(e.beta, eps_i);
        s.pop_lo_adiabatic = pops[0];
        s.pop_lo = r(0, 0).real();
        s.outer_weight = pops[0] + pops[3];
        s.coh = r(0, 3);
        s.purity = r.squaredNorm();
        s.diag_sq = s.purity - 2.0 * std::norm(s.coh);
        s.entropy = 0.0;
        for (int i = 0; i < 4; ++i)
            if (pops[i] > 0.0) s.entropy -= pops[i] * std::log(pops[i]);
        log_purity += std::log(s.purity);
        e.summary.push_back(s);
    }
    for (double p : {e.occ_k0, e.occ_half})
        log_purity += std::log(p * p + (1.0 - p) * (1.0 - p));
    e.log_purity = log_purity;
    e.final_basis = true;
}

} // namespace detail

// Trotterized QATE over all momentum blocks. Static modes are untouched by
// construction; the returned ensemble is rotated into the g_final basis.
inline TfimEnsemble run_qate_blocks(const QateConfig& cfg) {
    cfg.validate();
    if (cfg.h_init.family != Family::tfim_ti || cfg.h_final.family != Family::tfim_ti)
        throw ConfigError("run_qate_blocks: both endpoints must be tfim_ti");
    const int n = cfg.h_init.n_sites;
    TfimEnsemble e = thermal_ensemble(cfg.beta, cfg.h_init.g, n);
    e.g_final = cfg.h_final.g;
    const auto grid = trotter_grid(cfg.total_time, cfg.tau);
    for (double s : grid.s) {
        const double g = interpolated_coupling(cfg.h_init.g, cfg.h_final.g, cfg.schedule, s);
        for (auto& block : e.blocks) {
            const Mat4 u = block_propagator(g, grid.dt, block.k, n);
            block.rho = (u * block.rho * u.adjoint()).eval();
        }
    }
    detail::finalize(e);
    return e;
}

// Static-mode aggregates at the final coupling.
struct StaticContrib {
    double energy = 0.0;
    double variance = 0.0;
    double entropy = 0.0;
};

inline StaticContrib static_contrib(const TfimEnsemble& e) {
    StaticContrib out;
    const double c0 = 1.0 + e.g_final;
    const double ch = e.g_final - 1.0;
    out.energy = -c0 * (2.0 * e.occ_k0 - 1.0) - ch * (2.0 * e.occ_half - 1.0);
    out.variance = 4.0 * c0 * c0 * e.occ_k0 * (1.0 - e.occ_k0) +
                   4.0 * ch * ch * e.occ_half * (1.0 - e.occ_half);
    out.entropy = detail::two_level_entropy(e.occ_k0) + detail::two_level_entropy(e.occ_half);
    return out;
}

// Mode multiset of the final Hamiltonian (for entropy-matched Gibbs refs):
// each dynamic pair contributes eps_k twice, plus the two static splittings.
inline RVec final_mode_energies(const TfimEnsemble& e) {
    RVec modes(e.n_sites);
    int idx = 0;
    for (int k = 1; k <= e.n_sites / 2 - 1; ++k) {
        const double eps = eigenmode(e.g_final, k, e.n_sites);
        modes[idx++] = eps;
        modes[idx++] = eps;
    }
    modes[idx++] = 2.0 * (1.0 + e.g_final);
    modes[idx++] = 2.0 * std::abs(e.g_final - 1.0);
    return modes;
}

inline bench::BenchmarkRecord block_benchmarks(const TfimEnsemble& e) {
    if (!e.final_basis)
        throw ConfigError("block_benchmarks: ensemble must be in the final eigenbasis");
    bench::BenchmarkRecord r;
    const StaticContrib st = static_contrib(e);
    double e_min = st.energy, delta_e = 0.0, var = st.variance, var_min = st.variance;
    double cod = 0.0, entropy = st.entropy, delta_var = 0.0;
    for (const auto& s : e.summary) {
        const double eps = s.eps_final;
        const double a = s.pop_lo_adiabatic, b = s.pop_lo, d = s.outer_weight;
        e_min += eps * (d - 2.0 * a);
        delta_e += 2.0 * eps * (a - b);
        var += (d - (d - 2.0 * b) * (d - 2.0 * b)) * eps * eps;
        var_min += (d - (d - 2.0 * a) * (d - 2.0 * a)) * eps * eps;
        delta_var += eps * eps * ((d - 2.0 * a) * (d - 2.0 * a) - (d - 2.0 * b) * (d - 2.0 * b));
        cod += eps * eps * 8.0 * std::norm(s.coh) / s.purity;
        entropy += s.entropy;
    }
    r.e_min = e_min;
    r.delta_e_qate = delta_e;
    r.energy = e_min + delta_e;
    r.variance = var;
    r.var_min = var_min;
    r.delta_var = delta_var;
    r.cod = cod;
    r.log_purity = e.log_purity;
    r.purity = std::exp(e.log_purity);
    r.entropy = entropy;
    const RVec modes = final_mode_energies(e);
    const double beta_g = bench::beta_for_entropy_modes(modes, entropy);
    r.delta_e_min = r.e_min - bench::mode_gibbs_energy(modes, beta_g);
    return r;
}

// Closed-form per-block energy and variance gaps implied by purity
// conservation, exact in |c_k|^2:
//   |c|^2 = (a - b)(a + b - d)
//   dE (E_min + E_QATE) = -4 |c|^2 eps^2   =>  dE = 4 eps^2 |c|^2 / (-E_min + sqrt(E_min^2 - 4 eps^2 |c|^2))
//   dVar = E_min^2 - E_QATE^2 = 4 eps^2 |c|^2
struct A6Result {
    double delta_e = 0.0;
    double delta_var = 0.0;
};

inline A6Result a6_identities(double pop_lo_adiabatic, double outer_weight, double coh_sq,
                              double eps_final) {
    if (coh_sq == 0.0) return {0.0, 0.0};
    const double e_min = eps_final * (outer_weight - 2.0 * pop_lo_adiabatic);
    const double x = 4.0 * eps_final * eps_final * coh_sq;
    const double disc = e_min * e_min - x;
    if (!(e_min < 0.0) || disc < -1e-12 * e_min * e_min)
        throw SingularityError("a6_identities: vanishing denominator (E_min ~ 0)");
    return {x / (-e_min + std::sqrt(std::max(disc, 0.0))), x};
}

inline A6Result a6_identities(const BlockSummary& s) {
    return a6_identities(s.pop_lo_adiabatic, s.outer_weight, std::norm(s.coh), s.eps_final);
}

// Purity-normalized diagonal weight of the full state (all coherences are
// per-block outer ones, so this is a simple product ratio).
inline double diag_mass(const TfimEnsemble& e) {
    double acc = 0.0;
    for (const auto& s : e.summary) acc += std::log(s.diag_sq) - std::log(s.purity);
    return std::exp(acc);
}

// Spectral width of the final Hamiltonian: per block the level span is
// 2 eps_k, plus the static splittings.
inline double spectral_width(const TfimEnsemble& e) {
    double w = 2.0 * (1.0 + e.g_final) + 2.0 * std::abs(e.g_final - 1.0);
    for (const auto& s : e.summary) w += 2.0 * s.eps_final;
    return w;
}

// Filtered BOD: the correlation G(t) = Tr(e^{-iHt} rho e^{iHt} rho) factors
// over blocks as prod_k [S_k + 2|c_k|^2 cos(2 eps_k t)] (times static
// constants); accumulated in log form and normalized per block so the
// product never under- or overflows.
inline bench::BodHistogram bod_filtered_ti(const TfimEnsemble& e, const bench::FilterSpec& filter,
                                           double omega_max) {
    if (!e.final_basis)
        throw ConfigError("bod_filtered_ti: ensemble must be in the final eigenbasis");
    const int nbins = static_cast<int>(std::floor(omega_max / (2.0 * filter.delta))) + 1;
    const long long r = filter.r;
    std::vector<cdouble> samples(static_cast<std::size_t>(2 * r + 1));
    for (long long m = 0; m <= r; ++m) {
        const double t = filter.t_m(m);
        double log_g = 0.0;
        for (const auto& s : e.summary) {
            const double u =
                2.0 * std::norm(s.coh) * (std::cos(2.0 * s.eps_final * t) - 1.0) / s.purity;
            log_g += std::log1p(u);
        }
        const double g = std::exp(log_g);
        samples[static_cast<std::size_t>(r + m)] = g;
        samples[static_cast<std::size_t>(r - m)] = g;
    }
    return bench::bod_filtered(samples, filter, nbins, 1.0, diag_mass(e));
}

namespace detail {

struct CohSource {
    double omega = 0.0; // energy difference
    double mass = 0.0;  // purity-normalized weight
};

// Coherence lines of the ensemble through second order: within-block ones
// at 2 eps_k, pairwise combinations at 2(eps_k + eps_l) and 2|eps_k - eps_l|.
inline std::vector<CohSource> perturbative_sources(const TfimEnsemble& e, int order) {
    if (!e.final_basis)
        throw ConfigError("bod_perturbative: ensemble must be in the final eigenbasis");
    if (order != 1 && order != 2) throw ConfigError("bod_perturbative: order must be 1 or 2");
    double log_all_diag = 0.0, log_all_pur = 0.0;
    for (const auto& s : e.summary) {
        log_all_diag += std::log(s.diag_sq);
        log_all_pur += std::log(s.purity);
    }
    std::vector<CohSource> src;
    const std::size_t nb = e.summary.size();
    src.reserve(order == 1 ? nb : nb * nb);
    for (const auto& s : e.summary) {
        const double m1 =
            2.0 * std::norm(s.coh) * std::exp(log_all_diag - std::log(s.diag_sq) - log_all_pur);
        src.push_back({2.0 * s.eps_final, m1});
    }
    if (order == 2) {
        for (std::size_t i = 0; i < nb; ++i) {
            for (std::size_t j = i + 1; j < nb; ++j) {
                const auto& si = e.summary[i];
                const auto& sj = e.summary[j];
                const double w = 2.0 * std::norm(si.coh) * std::norm(sj.coh) *
                                 std::exp(log_all_diag - std::log(si.diag_sq) -
                                          std::log(sj.diag_sq) - log_all_pur);
                src.push_back({2.0 * (si.eps_final + sj.eps_final), w});
                src.push_back({2.0 * std::abs(si.eps_final - sj.eps_final), w});
            }
        }
    }
    return src;
}

} // namespace detail

// Analytic low-order BOD as a top-hat histogram of the coherence lines.
inline bench::BodHistogram bod_perturbative(const TfimEnsemble& e, int order, double bin_width,
                                            double omega_max = -1.0) {
    const auto sources = detail::perturbative_sources(e, order);
    const double delta = 0.5 * bin_width;
    double max_omega = omega_max;
    if (max_omega <= 0.0)
        for (const auto& s : sources) max_omega = std::max(max_omega, s.omega);
    const int nbins = bench::bod_bin_index(max_omega, delta) + 1;
    bench::BodHistogram h;
    h.bin_width = bin_width;
    h.purity_norm = std::exp(e.log_purity);
    h.bin_centers.resize(nbins);
    for (int n = 0; n < nbins; ++n) h.bin_centers[n] = bin_width * n;
    h.values.assign(nbins, 0.0);
    for (const auto& s : sources) {
        const int bin = bench::bod_bin_index(s.omega, delta);
        if (bin < nbins) h.values[bin] += s.mass;
    }
    return h;
}

// The same lines smeared with the Gaussian window of the filtered variant:
// the perturbative prediction of what bod_filtered_ti measures, directly
// comparable bin by bin.
inline bench::BodHistogram bod_perturbative_filtered(const TfimEnsemble& e, int order,
                                                     double delta, double omega_max) {
    const auto sources = detail::perturbative_sources(e, order);
    const int nbins = static_cast<int>(std::floor(omega_max / (2.0 * delta))) + 1;
    bench::BodHistogram h;
    h.bin_width = 2.0 * delta;
    h.purity_norm = std::exp(e.log_purity);
    h.bin_centers.resize(nbins);
    for (int n = 0; n < nbins; ++n) h.bin_centers[n] = 2.0 * delta * n;
    h.values.assign(nbins, 0.0);
    const double inv = 1.0 / (std::numbers::sqrt2 * delta);
    auto gauss_cdf_between = [&](double lo, double hi, double center) {
        return 0.5 * (std::erf((hi - center) * inv) - std::erf((lo - center) * inv));
    };
    for (const auto& s : sources) {
        for (int n = 0; n < nbins; ++n) {
            const double lo = (n == 0) ? 0.0 : (2.0 * n - 1.0) * delta;
            const double hi = (2.0 * n + 1.0) * delta;
            if (s.omega + 8.0 * delta < lo || s.omega - 8.0 * delta > hi) continue;
            h.values[n] += s.mass * (gauss_cdf_between(lo, hi, s.omega) +
                                     gauss_cdf_between(lo, hi, -s.omega));
        }
    }
    return h;
}

// Upper-bound estimate for |c_k|^2 after a ramp of duration T:
// max_s |d_s eps_k|^4 / (eps_k^6 T^2), O(1) constant set to 1. An order of
// magnitude, not an equality.
inline double adiabatic_bound(double g_init, double g_final, const RampSchedule& schedule, int k,
                              int n_sites, double total_time) {
    if (k == 0 || k == -n_sites / 2)
        throw ConfigError("adiabatic_bound: static modes do not evolve");
    const double theta = 2.0 * std::numbers::pi * k / n_sites;
    double worst = 0.0;
    const int grid = 2000;
    for (int i = 0; i <= grid; ++i) {
        const double s = static_cast<double>(i) / grid;
        const double g = interpolated_coupling(g_init, g_final, schedule, s);
        const double eps = tfim_mode_energy(g, k, n_sites);
        if (eps < 1e-9)
            throw SingularityError("adiabatic_bound: path crosses eps_k = 0");
        const double deps_dg = 4.0 * (g + std::cos(theta)) / eps;
        const double deps_ds = deps_dg * gamma_derivative(schedule, s) * (g_final - g_init);
        const double v = std::pow(std::abs(deps_ds), 4) / std::pow(eps, 6);
        worst = std::max(worst, v);
    }
    return worst / (total_time * total_time);
}

} // namespace qate::tfim
