#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numbers>
#include <vector>

#include "qate/errors.hpp"
#include "qate/linalg.hpp"
#include "qate/model.hpp"
#include "qate/spectral.hpp"

namespace qate::ed {

struct DenseOperator {
    int n_sites = 0;
    CMat mat;
};

struct DenseState {
    int n_sites = 0;
    CMat rho;
};

struct EigenDecomposition {
    RVec energies; // ascending
    CMat vectors;  // orthonormal columns
};

inline EigenDecomposition diagonalize(const DenseOperator& op) {
    if (op.mat.imag().cwiseAbs().maxCoeff() < 1e-14) {
        auto e = linalg::eig_sym(op.mat.real());
        return {e.values, e.vectors.cast<cdouble>()};
    }
    auto e = linalg::eig_herm(op.mat);
    return {e.values, e.vectors};
}

// ---------------------------------------------------------------------------
// Pauli strings. A string is coeff * Z(z_mask) * X(x_mask); matrix elements
// are <b ^ x | S | b> = coeff * (-1)^popcount(z & (b ^ x)).
// Site i (1-based) lives on bit i-1; bit value 0 means sz = +1.
// ---------------------------------------------------------------------------
struct PauliString {
    std::uint32_t x_mask = 0;
    std::uint32_t z_mask = 0;
    double coeff = 1.0;

    static PauliString identity() { return {}; }

    PauliString& mul_left_z(int site_1based) {
        z_mask ^= 1u << (site_1based - 1);
        return *this;
    }
    PauliString& mul_left_x(int site_1based) {
        const std::uint32_t bit = 1u << (site_1based - 1);
        if (z_mask & bit) coeff = -coeff; // X_i Z_i = -Z_i X_i
        x_mask ^= bit;
        return *this;
    }
};

inline void add_string(RMat& h, const PauliString& s, double scale) {
    const int dim = static_cast<int>(h.rows());
    for (int b = 0; b < dim; ++b) {
        const int bp = b ^ static_cast<int>(s.x_mask);
        const int sign = std::popcount(static_cast<std::uint32_t>(bp) & s.z_mask) % 2 ? -1 : 1;
        h(bp, b) += scale * s.coeff * sign;
    }
}

inline double z_sign(int b, int site_1based) {
    return (b >> (site_1based - 1)) & 1 ? -1.0 : 1.0;
}

// The parity-boundary term +P sx_N sx_1, built as the literal product of
// its N + 2 Pauli factors.
inline PauliString parity_boundary_string(int n) {
    PauliString s = PauliString::identity();
    s.mul_left_x(1);
    s.mul_left_x(n);
    for (int i = n; i >= 1; --i) s.mul_left_z(i);
    return s;
}

inline DenseOperator build_hamiltonian(const HamiltonianSpec& spec, int hard_cap = 14) {
    spec.validate();
    const int n = spec.n_sites;
    if (n > hard_cap)
        throw ResourceError("build_hamiltonian: N = " + std::to_string(n) +
                            " exceeds the dense cap " + std::to_string(hard_cap));
    const int dim = 1 << n;
    RMat h = RMat::Zero(dim, dim);
    switch (spec.family) {
    case Family::mixed_field_ising: {
        for (int b = 0; b < dim; ++b) {
            double diag = 0.0;
            for (int i = 1; i < n; ++i) diag += spec.J * z_sign(b, i) * z_sign(b, i + 1);
            for (int i = 1; i <= n; ++i) diag += spec.h * z_sign(b, i);
            h(b, b) += diag;
        }
        for (int i = 1; i <= n; ++i) {
            PauliString sx = PauliString::identity();
            sx.mul_left_x(i);
            add_string(h, sx, spec.g);
        }
        break;
    }
    case Family::tfim_ti: {
        for (int b = 0; b < dim; ++b) {
            double diag = 0.0;
            for (int i = 1; i <= n; ++i) diag += z_sign(b, i);
            h(b, b) += -spec.g * diag;
        }
        for (int i = 1; i < n; ++i) {
            PauliString sxx = PauliString::identity();
            sxx.mul_left_x(i);
            sxx.mul_left_x(i + 1);
            add_string(h, sxx, -spec.J);
        }
        add_string(h, parity_boundary_string(n), spec.J); // -Jbc sx_N sx_1 with Jbc = -P
        break;
    }
    case Family::z_field_isospectral: {
        for (int b = 0; b < dim; ++b) {
            double diag = 0.0;
            for (int k = 1; k <= n; ++k)
                diag += 0.5 * tfim_mode_energy(spec.g, k, n) * z_sign(b, k);
            h(b, b) = diag;
        }
        break;
    }
    case Family::dense_custom:
        throw ConfigError("build_hamiltonian: dense_custom requires an explicit matrix");
    }
    return {n, h.cast<cdouble>()};
}

inline DenseState gibbs(const DenseOperator& hamiltonian, double beta) {
    if (beta < 0.0) throw std::domain_error("gibbs: beta must be >= 0");
    const auto eig = diagonalize(hamiltonian);
    const double e0 = eig.energies.minCoeff();
    RVec w = (-(beta) * (eig.energies.array() - e0)).exp();
    w /= w.sum();
    DenseState s;
    s.n_sites = hamiltonian.n_sites;
    s.rho = eig.vectors * w.cast<cdouble>().asDiagonal() * eig.vectors.adjoint();
    return s;
}

// ---------------------------------------------------------------------------
// Reflection (site-reversal) sectors. Exact block structure used to speed up
// the Trotter loop when both endpoints and the state are reflection
// symmetric (uniform open chains, parity-boundary TFIM).
// ---------------------------------------------------------------------------
struct ReflectionBasis {
    int n = 0, dim = 0;
    std::vector<int> rev;
    std::vector<int> pair_rep; // b < rev(b)
    std::vector<int> fixed;    // b == rev(b)

    explicit ReflectionBasis(int n_sites) : n(n_sites), dim(1 << n_sites) {
        rev.resize(dim);
        for (int b = 0; b < dim; ++b) {
            int r = 0;
            for (int i = 0; i < n; ++i)
                if (b & (1 << i)) r |= 1 << (n - 1 - i);
            rev[b] = r;
            if (b < r) pair_rep.push_back(b);
            else if (b == r) fixed.push_back(b);
        }
    }

    int dim_sym() const { return static_cast<int>(pair_rep.size() + fixed.size()); }
    int dim_asym() const { return static_cast<int>(pair_rep.size()); }

    bool is_symmetric(const RMat& h, double tol = 1e-12) const {
        for (int b = 0; b < dim; ++b)
            for (int c = 0; c < dim; ++c)
                if (std::abs(h(b, c) - h(rev[b], rev[c])) > tol) return false;
        return true;
    }
    bool is_symmetric(const CMat& m, double tol = 1e-12) const {
        for (int b = 0; b < dim; ++b)
            for (int c = 0; c < dim; ++c)
                if (std::abs(m(b, c) - m(rev[b], rev[c])) > tol) return false;
        return true;
    }

    template <typename Mat>
    Mat project(const Mat& m, int sigma) const {
        const double inv2 = 0.5;
        const int np = static_cast<int>(pair_rep.size());
        const int nf = sigma > 0 ? static_cast<int>(fixed.size()) : 0;
        Mat out(np + nf, np + nf);
        const double sg = sigma > 0 ? 1.0 : -1.0;
        for (int p = 0; p < np + nf; ++p) {
            const bool pf = p >= np;
            const int bp = pf ? fixed[p - np] : pair_rep[p];
            const int rp = pf ? bp : rev[bp];
            const double cp = pf ? 1.0 : std::numbers::sqrt2 / 2.0;
            for (int q = 0; q < np + nf; ++q) {
                const bool qf = q >= np;
                const int bq = qf ? fixed[q - np] : pair_rep[q];
                const int rq = qf ? bq : rev[bq];
                const double cq = qf ? 1.0 : std::numbers::sqrt2 / 2.0;
                if (!pf && !qf)
                    out(p, q) = (m(bp, bq) + sg * m(bp, rq) + sg * m(rp, bq) + m(rp, rq)) * inv2;
                else if (pf && qf)
                    out(p, q) = m(bp, bq);
                else
                    out(p, q) = cp * cq * (pf ? (m(bp, bq) + sg * m(bp, rq))
                                              : (m(bp, bq) + sg * m(rp, bq)));
            }
        }
        return out;
    }

    // rho_full = Q_s rho_s Q_s^T + Q_a rho_a Q_a^T
    CMat embed(const CMat& rho_s, const CMat& rho_a) const {
        CMat out = CMat::Zero(dim, dim);
        const int np = static_cast<int>(pair_rep.size());
        auto scatter = [&](const CMat& block, int sigma) {
            const int nf = sigma > 0 ? static_cast<int>(fixed.size()) : 0;
            const double sg = sigma > 0 ? 1.0 : -1.0;
            for (int p = 0; p < np + nf; ++p) {
                const bool pf = p >= np;
                const int bp = pf ? fixed[p - np] : pair_rep[p];
                const int rp = pf ? bp : rev[bp];
                const double cp = pf ? 1.0 : std::numbers::sqrt2 / 2.0;
                for (int q = 0; q < static_cast<int>(block.cols()); ++q) {
                    const bool qf = q >= np;
                    const int bq = qf ? fixed[q - np] : pair_rep[q];
                    const int rq = qf ? bq : rev[bq];
                    const double cq = qf ? 1.0 : std::numbers::sqrt2 / 2.0;
                    const cdouble v = block(p, q);
                    out(bp, bq) += cp * cq * v;
                    if (!qf) out(bp, rq) += cp * cq * sg * v;
                    if (!pf) out(rp, bq) += cp * cq * sg * v;
                    if (!pf && !qf) out(rp, rq) += cp * cq * v;
                }
            }
        };
        scatter(rho_s, +1);
        scatter(rho_a, -1);
        return out;
    }
};

namespace detail {

// Accumulate the full Trotter unitary for one (sub)problem and conjugate.
inline CMat evolve_real_block(const CMat& rho, const RMat& h_init, const RMat& h_final,
                              const RampSchedule& schedule, double total_time, double tau) {
    const auto grid = trotter_grid(total_time, tau);
    const int dim = static_cast<int>(rho.rows());
    RMat u_re = RMat::Identity(dim, dim);
    RMat u_im = RMat::Zero(dim, dim);
    RMat h_step(dim, dim);
    for (double s : grid.s) {
        const double g = gamma_eval(schedule, s);
        h_step.noalias() = (1.0 - g) * h_init + g * h_final;
        const auto eig = linalg::eig_sym(h_step);
        linalg::phase_sandwich_left(eig.vectors, eig.values, grid.dt, u_re, u_im);
    }
    return linalg::conjugate_by(u_re, u_im, rho);
}

} // namespace detail

struct EvolveOptions {
    bool allow_sectors = true;
};

// Trotterized QATE by exact per-step propagators exp(-i H(s_j) tau).
inline DenseState qate_evolve(const DenseState& rho, const DenseOperator& h_init,
                              const DenseOperator& h_final, const RampSchedule& schedule,
                              double total_time, double tau,
                              const EvolveOptions& opts = {}) {
    if (rho.n_sites != h_init.n_sites || rho.n_sites != h_final.n_sites)
        throw ConfigError("qate_evolve: dimension mismatch");
    const bool real_h = h_init.mat.imag().cwiseAbs().maxCoeff() < 1e-14 &&
                        h_final.mat.imag().cwiseAbs().maxCoeff() < 1e-14;
    if (!real_h) {
        // generic complex path
        const auto grid = trotter_grid(total_time, tau);
        const int dim = static_cast<int>(rho.rho.rows());
        CMat u = CMat::Identity(dim, dim);
        for (double s : grid.s) {
            const double g = gamma_eval(schedule, s);
            const CMat h_step = (1.0 - g) * h_init.mat + g * h_final.mat;
            const auto eig = linalg::eig_herm(h_step);
            CVec phases(dim);
            for (int i = 0; i < dim; ++i)
                phases[i] = std::exp(cdouble(0.0, -eig.values[i] * grid.dt));
            u = (eig.vectors * phases.asDiagonal() * eig.vectors.adjoint()) * u;
        }
        return {rho.n_sites, u * rho.rho * u.adjoint()};
    }

    const RMat hi = h_init.mat.real();
    const RMat hf = h_final.mat.real();
    if (opts.allow_sectors) {
        ReflectionBasis basis(rho.n_sites);
        if (basis.is_symmetric(hi) && basis.is_symmetric(hf) && basis.is_symmetric(rho.rho)) {
            const CMat rho_s = basis.project(rho.rho, +1);
            const CMat rho_a = basis.project(rho.rho, -1);
            const CMat out_s = detail::evolve_real_block(rho_s, basis.project(hi, +1),
                                                         basis.project(hf, +1), schedule,
                                                         total_time, tau);
            const CMat out_a = detail::evolve_real_block(rho_a, basis.project(hi, -1),
                                                         basis.project(hf, -1), schedule,
                                                         total_time, tau);
            return {rho.n_sites, basis.embed(out_s, out_a)};
        }
    }
    return {rho.n_sites, detail::evolve_real_block(rho.rho, hi, hf, schedule, total_time, tau)};
}

inline DenseState qate_evolve(const DenseState& rho, const QateConfig& cfg,
                              const EvolveOptions& opts = {}) {
    cfg.validate();
    return qate_evolve(rho, build_hamiltonian(cfg.h_init), build_hamiltonian(cfg.h_final),
                       cfg.schedule, cfg.total_time, cfg.tau, opts);
}

inline CMat coefficients_in_eigenbasis(const DenseState& rho, const EigenDecomposition& eig) {
    if (rho.rho.rows() != eig.vectors.rows())
        throw ConfigError("coefficients_in_eigenbasis: dimension mismatch");
    return eig.vectors.adjoint() * rho.rho * eig.vectors;
}

// Partial trace over the complement of `sites` (1-based site labels).
inline DenseState reduced_density(const DenseState& state, const std::vector<int>& sites) {
    const int n = state.n_sites;
    for (int s : sites)
        if (s < 1 || s > n) throw ConfigError("reduced_density: site index out of range");
    if (sites.empty()) {
        DenseState out;
        out.n_sites = 0;
        out.rho = CMat::Constant(1, 1, cdouble(1.0, 0.0));
        return out;
    }
    std::vector<int> keep;
    for (int s : sites) keep.push_back(s - 1);
    std::sort(keep.begin(), keep.end());
    if (static_cast<int>(keep.size()) == n) return state;

    std::vector<int> traced;
    for (int b = 0; b < n; ++b)
        if (!std::binary_search(keep.begin(), keep.end(), b)) traced.push_back(b);

    const int ka = static_cast<int>(keep.size());
    const int kt = static_cast<int>(traced.size());
    const int da = 1 << ka, dt = 1 << kt;
    auto scatter = [](int value, const std::vector<int>& bits) {
        int out = 0;
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (value & (1 << i)) out |= 1 << bits[i];
        return out;
    };
    DenseState out;
    out.n_sites = ka;
    out.rho = CMat::Zero(da, da);
    for (int t = 0; t < dt; ++t) {
        const int tfull = scatter(t, traced);
        for (int i = 0; i < da; ++i) {
            const int ifull = scatter(i, keep) | tfull;
            for (int j = 0; j < da; ++j)
                out.rho(i, j) += state.rho(ifull, scatter(j, keep) | tfull);
        }
    }
    return out;
}

inline double trace_norm_distance(const DenseState& a, const DenseState& b) {
    if (a.rho.rows() != b.rho.rows())
        throw ConfigError("trace_norm_distance: dimension mismatch");
    const auto eig = linalg::eig_herm(a.rho - b.rho);
    return eig.values.cwiseAbs().sum();
}

// The three central sites of a chain (1-based labels).
inline std::vector<int> central_sites(int n, int count = 3) {
    const int start = (n - count) / 2 + 1;
    return {start, start + 1, start + 2};
}

// ---------------------------------------------------------------------------
// Full QATE run with the scalar benchmark bundle attached.
// ---------------------------------------------------------------------------
struct DenseRunResult {
    DenseState rho_final;
    DenseState rho_min;
    EigenDecomposition eig_final;
    bench::BenchmarkRecord record;
};

inline DenseRunResult run_qate_dense(const QateConfig& cfg, const EvolveOptions& opts = {}) {
    cfg.validate();
    const DenseOperator hi = build_hamiltonian(cfg.h_init);
    const DenseOperator hf = build_hamiltonian(cfg.h_final);
    const DenseState rho0 = gibbs(hi, cfg.beta);
    DenseRunResult out;
    out.rho_final = qate_evolve(rho0, hi, hf, cfg.schedule, cfg.total_time, cfg.tau, opts);
    out.eig_final = diagonalize(hf);

    const auto eig_init = diagonalize(hi);
    const double e0 = eig_init.energies.minCoeff();
    RVec w = (-(cfg.beta) * (eig_init.energies.array() - e0)).exp();
    w /= w.sum(); // ascending initial energies -> descending weights
    const auto rmin = bench::rho_min_spectrum(w, out.eig_final.energies);
    out.rho_min.n_sites = cfg.h_final.n_sites;
    out.rho_min.rho = out.eig_final.vectors * rmin.populations.cast<cdouble>().asDiagonal() *
                      out.eig_final.vectors.adjoint();

    bench::BenchmarkRecord& r = out.record;
    const CMat& rho = out.rho_final.rho;
    const CMat& h = hf.mat;
    const CMat h_rho = h * rho;
    r.energy = h_rho.trace().real();
    r.e_min = rmin.e_min;
    r.delta_e_qate = r.energy - r.e_min;
    const CMat rho_h = rho * h;
    r.cod = (h_rho - rho_h).squaredNorm() / rho.squaredNorm();
    double tr_h2_rho = 0.0;
    for (int i = 0; i < h.rows(); ++i)
        tr_h2_rho += (h.row(i) * h_rho.col(i)).value().real();
    r.variance = tr_h2_rho - r.energy * r.energy;
    double var_min_e2 = 0.0;
    for (int i = 0; i < rmin.populations.size(); ++i)
        var_min_e2 += rmin.populations[i] * out.eig_final.energies[i] * out.eig_final.energies[i];
    r.var_min = var_min_e2 - r.e_min * r.e_min;
    r.delta_var = r.variance - r.var_min;
    r.purity = rho.squaredNorm();
    r.log_purity = std::log(r.purity);
    r.entropy = bench::von_neumann_entropy_from_eigs(w);
    const double beta_g = bench::beta_for_entropy(out.eig_final.energies, r.entropy);
    r.delta_e_min = r.e_min - bench::gibbs_from_spectrum(out.eig_final.energies, beta_g).energy;
    return out;
}

} // namespace qate::ed
