#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "qate/errors.hpp"
#include "qate/linalg.hpp"
#include "qate/model.hpp"
#include "qate/schedule.hpp"
#include "qate/spectral.hpp"

namespace qate::gaussian {

// Single-particle Bogoliubov-de Gennes form of a quadratic fermion operator
// O = 1/2 Psi^adj bdg Psi (+ const), Psi = (a_1..a_N, a+_1..a+_N). bdg is
// Hermitian with particle-hole block structure [[A, B], [-conj(B), -A^T]].
struct QuadraticHamiltonian {
    int n_sites = 0;
    CMat bdg;
};

inline void check_bdg(const QuadraticHamiltonian& h) {
    const int n2 = 2 * h.n_sites;
    if (h.bdg.rows() != n2 || h.bdg.cols() != n2)
        throw ConfigError("QuadraticHamiltonian: matrix must be 2N x 2N");
    if (!linalg::is_hermitian(h.bdg, 1e-12))
        throw ConfigError("QuadraticHamiltonian: matrix must be Hermitian");
}

// Positive half of the BdG spectrum: the mode splittings eps_m.
inline RVec mode_energies(const QuadraticHamiltonian& h) {
    const auto eig = linalg::eig_herm(h.bdg);
    RVec out(h.n_sites);
    for (int i = 0; i < h.n_sites; ++i) out[i] = eig.values[h.n_sites + i];
    return out;
}

inline QuadraticHamiltonian bdg_from_spec(const HamiltonianSpec& spec) {
    spec.validate();
    const int n = spec.n_sites;
    RMat a = RMat::Zero(n, n);
    RMat b = RMat::Zero(n, n);
    switch (spec.family) {
    case Family::tfim_ti: {
        // JW image of the parity-boundary chain: uniform periodic hopping
        // and pairing, on-site -2g
        for (int i = 0; i < n; ++i) {
            const int j = (i + 1) % n;
            a(i, j) += -spec.J;
            a(j, i) += -spec.J;
            b(i, j) += -spec.J;
            b(j, i) += spec.J;
            a(i, i) = -2.0 * spec.g;
        }
        break;
    }
    case Family::z_field_isospectral: {
        for (int k = 1; k <= n; ++k) a(k - 1, k - 1) = tfim_mode_energy(spec.g, k, n);
        break;
    }
    default:
        throw ConfigError("bdg_from_spec: family has no quadratic-fermion form");
    }
    CMat bdg(2 * n, 2 * n);
    bdg << a.cast<cdouble>(), b.cast<cdouble>(), -b.cast<cdouble>(), -a.cast<cdouble>();
    return {n, bdg};
}

// Gaussian state rho = e^{-K}/Tr e^{-K} with K = 1/2 Psi^adj kappa Psi.
struct GaussianThermalState {
    int n_sites = 0;
    CMat kappa;
    double log_z = 0.0; // ln Tr e^{-K}, invariant under unitary evolution
};

inline GaussianThermalState thermal_gaussian(const QuadraticHamiltonian& h, double beta) {
    check_bdg(h);
    if (beta < 0.0) throw std::domain_error("thermal_gaussian: beta must be >= 0");
    if (beta > 50.0)
        throw ConfigError("thermal_gaussian: beta capped at 50 (e^kappa conditioning)");
    GaussianThermalState s;
    s.n_sites = h.n_sites;
    s.kappa = beta * h.bdg;
    const auto eig = linalg::eig_herm(s.kappa);
    double lz = 0.0;
    for (int i = h.n_sites; i < 2 * h.n_sites; ++i) {
        const double y = 0.5 * std::abs(eig.values[i]);
        lz += y + std::log1p(std::exp(-2.0 * y));
    }
    s.log_z = lz;
    return s;
}

inline GaussianThermalState evolve_step(const GaussianThermalState& state,
                                        const QuadraticHamiltonian& h_inst, double tau) {
    if (state.n_sites != h_inst.n_sites) throw ConfigError("evolve_step: dimension mismatch");
    const auto eig = linalg::eig_herm(h_inst.bdg);
    const int n2 = 2 * state.n_sites;
    CVec phases(n2);
    for (int i = 0; i < n2; ++i) phases[i] = std::exp(cdouble(0.0, -eig.values[i] * tau));
    const CMat r = eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
    GaussianThermalState out;
    out.n_sites = state.n_sites;
    out.kappa = r * state.kappa * r.adjoint();
    linalg::hermitize(out.kappa);
    out.log_z = state.log_z;
    return out;
}

// <Psi Psi^adj> = (I + e^{-kappa})^{-1}, the basic Wick input.
inline CMat big_g(const GaussianThermalState& state) {
    const auto eig = linalg::eig_herm(state.kappa);
    const int n2 = 2 * state.n_sites;
    CVec d(n2);
    for (int i = 0; i < n2; ++i) d[i] = 1.0 / (1.0 + std::exp(-eig.values[i]));
    return eig.vectors * d.asDiagonal() * eig.vectors.adjoint();
}

inline double energy(const GaussianThermalState& state, const QuadraticHamiltonian& h) {
    if (state.n_sites != h.n_sites) throw ConfigError("energy: dimension mismatch");
    return -0.5 * (h.bdg * big_g(state)).trace().real();
}

inline double variance(const GaussianThermalState& state, const QuadraticHamiltonian& h) {
    if (state.n_sites != h.n_sites) throw ConfigError("variance: dimension mismatch");
    const CMat g = big_g(state);
    const int n2 = 2 * state.n_sites;
    const CMat hg = h.bdg * g;
    return 0.5 * (hg * h.bdg * (CMat::Identity(n2, n2) - g)).trace().real();
}

inline double log_purity(const GaussianThermalState& state) {
    const auto eig = linalg::eig_herm(state.kappa);
    double acc = 0.0;
    for (int i = state.n_sites; i < 2 * state.n_sites; ++i) {
        const double lam = std::abs(eig.values[i]);
        const double f = 1.0 / (1.0 + std::exp(lam));
        acc += std::log1p(-2.0 * f * (1.0 - f));
    }
    return acc;
}

inline double purity(const GaussianThermalState& state) { return std::exp(log_purity(state)); }

inline double entropy(const GaussianThermalState& state) {
    const auto eig = linalg::eig_herm(state.kappa);
    double acc = 0.0;
    for (int i = state.n_sites; i < 2 * state.n_sites; ++i) {
        const double lam = std::abs(eig.values[i]);
        const double q = std::exp(-lam);
        // -f ln f - (1-f) ln(1-f), f = 1/(1+e^lam), stable for large lam
        acc += std::log1p(q) + lam * q / (1.0 + q);
    }
    return acc;
}

// ln Tr(rho_a rho_b) via the Hermitian product form
// M = e^{-kb/2} e^{-ka} e^{-kb/2}; Tr(e^{-Ka} e^{-Kb}) = sqrt(det(I + M)).
inline double log_overlap(const GaussianThermalState& a, const GaussianThermalState& b) {
    if (a.n_sites != b.n_sites) throw ConfigError("overlap: dimension mismatch");
    const auto ea = linalg::eig_herm(a.kappa);
    const auto eb = linalg::eig_herm(b.kappa);
    if (ea.values.cwiseAbs().maxCoeff() + eb.values.cwiseAbs().maxCoeff() > 600.0)
        throw ConfigError("overlap: e^kappa too ill-conditioned (beta*eps too large)");
    const int n2 = 2 * a.n_sites;
    CVec da(n2), db(n2);
    for (int i = 0; i < n2; ++i) {
        da[i] = std::exp(-ea.values[i]);
        db[i] = std::exp(-0.5 * eb.values[i]);
    }
    const CMat ea_m = ea.vectors * da.asDiagonal() * ea.vectors.adjoint();
    const CMat eb_h = eb.vectors * db.asDiagonal() * eb.vectors.adjoint();
    CMat m = eb_h * ea_m * eb_h;
    linalg::hermitize(m);
    const auto em = linalg::eig_herm(m);
    double acc = 0.0;
    for (int i = 0; i < n2; ++i) acc += std::log1p(std::max(em.values[i], -0.999999999999));
    return 0.5 * acc - a.log_z - b.log_z;
}

inline double overlap(const GaussianThermalState& a, const GaussianThermalState& b) {
    return std::exp(log_overlap(a, b));
}

// COD = -Tr([H, rho]^2)/Tr(rho^2) = -d^2/dt^2 ln G(t) |_{t=0} for the
// normalized correlation G(t) = Tr(e^{-iHt} rho e^{iHt} rho)/Tr(rho^2).
// With A = e^{-kappa} in the eigenbasis of H (so ln G = (1/2) ln det(I +
// A(t) A) - const, A(t) = e^{-iDt} A e^{iDt}):
//   -(ln G)''(0) = (1/2) Tr[Q [D,[D,A]] A] - (1/2) Tr[(Q [D,A] A)^2],
// Q = (I + A^2)^{-1}. The commutators are elementwise (d_m - d_n) factors.
inline double cod_gaussian(const GaussianThermalState& state, const QuadraticHamiltonian& h,
                           bool* conditioning_warning = nullptr) {
    if (state.n_sites != h.n_sites) throw ConfigError("cod_gaussian: dimension mismatch");
    const int n2 = 2 * state.n_sites;
    const auto eh = linalg::eig_herm(h.bdg);
    CMat kp = eh.vectors.adjoint() * state.kappa * eh.vectors;
    linalg::hermitize(kp);
    const auto ek = linalg::eig_herm(kp);
    if (conditioning_warning)
        *conditioning_warning = ek.values.cwiseAbs().maxCoeff() > 300.0;
    CVec expm(n2), qdiag(n2);
    for (int i = 0; i < n2; ++i) {
        expm[i] = std::exp(-ek.values[i]);
        qdiag[i] = 1.0 / (1.0 + std::exp(-2.0 * ek.values[i]));
    }
    const CMat a = ek.vectors * expm.asDiagonal() * ek.vectors.adjoint();
    const CMat q = ek.vectors * qdiag.asDiagonal() * ek.vectors.adjoint();
    CMat c1(n2, n2), c2(n2, n2);
    for (int m = 0; m < n2; ++m)
        for (int n = 0; n < n2; ++n) {
            const double dd = eh.values[m] - eh.values[n];
            c1(m, n) = dd * a(m, n);
            c2(m, n) = dd * dd * a(m, n);
        }
    const CMat qc1a = q * c1 * a;
    const double term1 = 0.5 * (q * c2 * a).trace().real();
    const double term2 = 0.5 * (qc1a * qc1a).trace().real();
    return term1 - term2;
}

// ---------------------------------------------------------------------------
// Full QATE run.
// ---------------------------------------------------------------------------
struct GaussianRunOptions {
    bool want_bod = false;
    double bod_delta = 0.04;
    double bod_omega_max = 4.0;
    double filter_x = 5.0;
    int dephasing_samples = 48; // for the diagonal-mass estimate
};

struct GaussianRunResult {
    GaussianThermalState state;
    bench::BenchmarkRecord record;
    std::optional<bench::BodHistogram> bod;
    bool conditioning_warning = false;
    bool mode_paired_reference = false; // e_min from per-mode pairing (large N, non-isospectral)
};

namespace detail {

// All 2^N many-body energies from the mode splittings (each mode adds
// +/- eps/2). Only for small N.
inline RVec reconstruct_spectrum(const RVec& modes) {
    const int n = static_cast<int>(modes.size());
    if (n > 16) throw ResourceError("reconstruct_spectrum: N too large");
    const std::size_t dim = std::size_t{1} << n;
    RVec out(static_cast<Eigen::Index>(dim));
    for (std::size_t b = 0; b < dim; ++b) {
        double e = 0.0;
        for (int m = 0; m < n; ++m) e += (b >> m) & 1 ? 0.5 * modes[m] : -0.5 * modes[m];
        out[static_cast<Eigen::Index>(b)] = e;
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

inline GaussianRunResult run_qate_gaussian(const QateConfig& cfg,
                                           const GaussianRunOptions& opts = {}) {
    cfg.validate();
    const QuadraticHamiltonian h_init = bdg_from_spec(cfg.h_init);
    const QuadraticHamiltonian h_final = bdg_from_spec(cfg.h_final);
    const int n = cfg.h_init.n_sites;
    const int n2 = 2 * n;

    GaussianRunResult out;
    GaussianThermalState state = thermal_gaussian(h_init, cfg.beta);

    // accumulate the full Trotter unitary in the doubled space
    const RMat hi = h_init.bdg.real();
    const RMat hf = h_final.bdg.real();
    const bool real_path = h_init.bdg.imag().cwiseAbs().maxCoeff() < 1e-14 &&
                           h_final.bdg.imag().cwiseAbs().maxCoeff() < 1e-14;
    const auto grid = trotter_grid(cfg.total_time, cfg.tau);
    if (real_path) {
        RMat u_re = RMat::Identity(n2, n2), u_im = RMat::Zero(n2, n2);
        RMat h_step(n2, n2);
        for (double s : grid.s) {
            const double g = gamma_eval(cfg.schedule, s);
            h_step.noalias() = (1.0 - g) * hi + g * hf;
            const auto eig = linalg::eig_sym(h_step);
            linalg::phase_sandwich_left(eig.vectors, eig.values, grid.dt, u_re, u_im);
        }
        state.kappa = linalg::conjugate_by(u_re, u_im, state.kappa);
    } else {
        for (double s : grid.s) {
            const double g = gamma_eval(cfg.schedule, s);
            const QuadraticHamiltonian h_step{n, (1.0 - g) * h_init.bdg + g * h_final.bdg};
            state = evolve_step(state, h_step, grid.dt);
        }
    }
    linalg::hermitize(state.kappa);

    bench::BenchmarkRecord& r = out.record;
    r.energy = energy(state, h_final);
    r.variance = variance(state, h_final);
    r.cod = cod_gaussian(state, h_final, &out.conditioning_warning);
    r.log_purity = log_purity(state);
    r.purity = std::exp(r.log_purity);
    r.entropy = entropy(state);

    const RVec modes_i = mode_energies(h_init);
    const RVec modes_f = mode_energies(h_final);
    const bool isospectral = (modes_i - modes_f).cwiseAbs().maxCoeff() < 1e-9;
    if (n <= 14) {
        const RVec spec_i = detail::reconstruct_spectrum(modes_i);
        const RVec spec_f = detail::reconstruct_spectrum(modes_f);
        const auto gp = bench::gibbs_from_spectrum(spec_i, cfg.beta);
        const auto rmin = bench::rho_min_spectrum(gp.populations, spec_f);
        r.e_min = rmin.e_min;
        double e2 = 0.0;
        for (int i = 0; i < spec_f.size(); ++i)
            e2 += rmin.populations[i] * spec_f[i] * spec_f[i];
        r.var_min = e2 - r.e_min * r.e_min;
    } else if (isospectral) {
        r.e_min = bench::mode_gibbs_energy(modes_f, cfg.beta);
        r.var_min = bench::mode_gibbs_variance(modes_f, cfg.beta);
    } else {
        // per-mode sorted pairing; the block-preserving optimum, not the
        // global one (unreachable to compute at this size)
        out.mode_paired_reference = true;
        double e_min = 0.0, var2 = 0.0;
        for (int m = 0; m < n; ++m) {
            const double p_hi = 1.0 / (1.0 + std::exp(cfg.beta * modes_i[m]));
            const double mean = 0.5 * modes_f[m] * (2.0 * p_hi - 1.0);
            e_min += mean;
            var2 += 0.25 * modes_f[m] * modes_f[m] - mean * mean;
        }
        r.e_min = e_min;
        r.var_min = var2;
    }
    r.delta_e_qate = r.energy - r.e_min;
    r.delta_var = r.variance - r.var_min;
    const double beta_g = bench::beta_for_entropy_modes(modes_f, r.entropy);
    r.delta_e_min = r.e_min - bench::mode_gibbs_energy(modes_f, beta_g);

    if (opts.want_bod) {
        // Correlation samples in the h_final eigenbasis: kappa' = V^adj k V,
        // A = e^{-kappa'}; G(t)/purity = sqrt(det(I + P A P^adj A)/det(I + A^2))
        const auto ef = linalg::eig_herm(h_final.bdg);
        CMat kp = ef.vectors.adjoint() * state.kappa * ef.vectors;
        linalg::hermitize(kp);
        const auto ekp = linalg::eig_herm(kp);
        CVec expm_half(n2), expm_full(n2);
        for (int i = 0; i < n2; ++i) {
            expm_half[i] = std::exp(-0.5 * ekp.values[i]);
            expm_full[i] = std::exp(-ekp.values[i]);
        }
        const CMat a_half = ekp.vectors * expm_half.asDiagonal() * ekp.vectors.adjoint();
        const CMat a_full = ekp.vectors * expm_full.asDiagonal() * ekp.vectors.adjoint();

        auto log_det_ratio = [&](const CVec& phases) {
            // returns ln det(I + A^{1/2} P A P^adj A^{1/2}) via LLT
            CMat pa = phases.asDiagonal() * a_full * phases.conjugate().asDiagonal();
            CMat m = a_half * pa * a_half;
            linalg::hermitize(m);
            m += CMat::Identity(n2, n2);
            Eigen::LLT<CMat> llt(m);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("bod correlation: LLT failed");
            double acc = 0.0;
            for (int i = 0; i < n2; ++i) acc += std::log(std::abs(llt.matrixL()(i, i)));
            return 2.0 * acc;
        };
        const double log_den = log_det_ratio(CVec::Ones(n2));

        double width = 0.0;
        for (int i = 0; i < n; ++i) width += modes_f[i];
        const auto filter = bench::filter_for_width(opts.bod_delta, width, opts.filter_x);
        const long long rr = filter.r;
        std::vector<cdouble> samples(static_cast<std::size_t>(2 * rr + 1));
        CVec phases(n2);
        for (long long m = 0; m <= rr; ++m) {
            const double t = filter.t_m(m);
            for (int i = 0; i < n2; ++i) phases[i] = std::exp(cdouble(0.0, -ef.values[i] * t));
            const double g = std::exp(0.5 * (log_det_ratio(phases) - log_den));
            samples[static_cast<std::size_t>(rr + m)] = g;
            samples[static_cast<std::size_t>(rr - m)] = g;
        }
        // diagonal-mass estimate: dephasing average over random mode phases
        std::mt19937_64 rng(12345);
        std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
        double dmass = 0.0;
        for (int trial = 0; trial < opts.dephasing_samples; ++trial) {
            for (int i = 0; i < n; ++i) {
                const double phi = u(rng);
                phases[i] = std::exp(cdouble(0.0, phi));       // -eps partner
                phases[n2 - 1 - i] = std::exp(cdouble(0.0, -phi)); // +eps partner
            }
            dmass += std::exp(0.5 * (log_det_ratio(phases) - log_den));
        }
        dmass /= opts.dephasing_samples;
        const int nbins =
            static_cast<int>(std::floor(opts.bod_omega_max / (2.0 * filter.delta))) + 1;
        out.bod = bench::bod_filtered(samples, filter, nbins, 1.0, dmass);
    }

    out.state = std::move(state);
    return out;
}

} // namespace qate::gaussian
