#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qate/errors.hpp"
#include "qate/linalg.hpp"

namespace qate::bench {

// ---------------------------------------------------------------------------
// Scalar benchmark bundle shared by all engines.
// ---------------------------------------------------------------------------
struct BenchmarkRecord {
    double energy = 0.0;       // Tr(rho H_final)
    double e_min = 0.0;        // energy of the spectrum-preserving diagonal optimum
    double delta_e_qate = 0.0; // energy - e_min
    double delta_e_min = 0.0;  // e_min - E_G at matched entropy
    double variance = 0.0;     // Var(rho, H_final)
    double var_min = 0.0;      // Var(rho_min, H_final)
    double delta_var = 0.0;    // variance - var_min
    double cod = 0.0;          // -Tr([H,rho]^2)/Tr(rho^2)
    double purity = 0.0;       // Tr(rho^2); underflows to 0 at large N, see log_purity
    double log_purity = 0.0;   // ln Tr(rho^2)
    double entropy = 0.0;      // von Neumann entropy of rho
};

// ---------------------------------------------------------------------------
// Binned off-diagonality histogram.
// ---------------------------------------------------------------------------
struct BodHistogram {
    std::vector<double> bin_centers; // omega >= 0, spacing = bin_width
    double bin_width = 0.0;          // = 2*delta
    std::vector<double> values;      // purity-normalized masses
    double purity_norm = 1.0;        // the Tr(rho^2) used for normalization

    double total_mass() const {
        double t = 0.0;
        for (double v : values) t += v;
        return t;
    }
};

inline int bod_bin_index(double omega, double delta) {
    // bin n is centered at 2*delta*n and covers [2n*delta - delta, 2n*delta + delta)
    return static_cast<int>(std::floor((omega + delta) / (2.0 * delta)));
}

// Exact top-hat binning of |c_ij|^2 over |E_i - E_j|. Diagonal elements land
// in the omega = 0 bin, which keeps the total mass exactly 1.
inline BodHistogram bod_exact(const CMat& coeffs, const RVec& energies, double delta,
                              double omega_max = -1.0) {
    if (!(delta > 0.0)) throw std::domain_error("bod_exact: delta must be > 0");
    const int d = static_cast<int>(energies.size());
    if (coeffs.rows() != d || coeffs.cols() != d)
        throw ConfigError("bod_exact: coefficient/energy dimension mismatch");
    double max_diff = 0.0;
    if (omega_max <= 0.0) {
        max_diff = energies[d - 1] - energies[0];
    } else {
        max_diff = omega_max;
    }
    const int nbins = bod_bin_index(max_diff, delta) + 1;
    BodHistogram h;
    h.bin_width = 2.0 * delta;
    h.bin_centers.resize(nbins);
    for (int n = 0; n < nbins; ++n) h.bin_centers[n] = 2.0 * delta * n;
    h.values.assign(nbins, 0.0);
    double purity = 0.0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const double w = std::norm(coeffs(i, j));
            purity += w;
            const int bin = bod_bin_index(std::abs(energies[i] - energies[j]), delta);
            if (bin < nbins) h.values[bin] += w;
        }
    }
    if (!(purity > 0.0)) throw std::domain_error("bod_exact: zero-purity input");
    for (double& v : h.values) v /= purity;
    h.purity_norm = purity;
    return h;
}

// ---------------------------------------------------------------------------
// Time-signal spectral filter (truncated binomial approximation to a
// Gaussian window of standard deviation delta).
// ---------------------------------------------------------------------------
struct FilterSpec {
    double delta = 0.0; // target window std
    double x = 5.0;     // error parameter; bound 2 exp(-x^2/2)
    double dt = 0.0;    // time sampling step
    double n_cal = 0.0; // 2/dt
    long long m_f = 0;  // binomial order (even)
    long long r = 0;    // sample index range m = -r..r
    double error_bound = 0.0;
    double domain = 0.0; // valid for |omega| <= domain = n_cal*pi/2

    std::vector<double> c; // c[m + r], sums to 1
    double t_m(long long m) const { return 2.0 * static_cast<double>(m) / n_cal; }

    // The frequency response sum_m c_m exp(-i X t_m) is real by symmetry.
    double kernel(double omega) const {
        double acc = 0.0;
        for (long long m = -r; m <= r; ++m)
            acc += c[static_cast<std::size_t>(m + r)] * std::cos(omega * t_m(m));
        return acc;
    }
};

inline FilterSpec filter_design(double delta, double dt, double x = 5.0) {
    if (!(delta > 0.0) || !(dt > 0.0) || !(x > 0.0))
        throw std::domain_error("filter_design: delta, dt, x must be > 0");
    FilterSpec f;
    f.delta = delta;
    f.x = x;
    f.dt = dt;
    f.n_cal = 2.0 / dt;
    const double r_raw = x * f.n_cal / delta;
    long long m = static_cast<long long>(std::llround((r_raw / x) * (r_raw / x)));
    if (m % 2 != 0) ++m;
    if (m < 2) m = 2;
    f.m_f = m;
    f.r = static_cast<long long>(std::llround(x * std::sqrt(static_cast<double>(m))));
    if (f.r > m / 2) f.r = m / 2;
    f.error_bound = 2.0 * std::exp(-0.5 * x * x);
    f.domain = f.n_cal * std::numbers::pi / 2.0;
    // c_m = 2^-M binom(M, M/2 - m) via log-gamma
    f.c.resize(static_cast<std::size_t>(2 * f.r + 1));
    const double lg_m = std::lgamma(static_cast<double>(m) + 1.0);
    const double ln2 = std::numbers::ln2;
    for (long long i = -f.r; i <= f.r; ++i) {
        const double k = static_cast<double>(m / 2 - i);
        const double lc = lg_m - std::lgamma(k + 1.0) - std::lgamma(static_cast<double>(m) - k + 1.0) -
                          static_cast<double>(m) * ln2;
        f.c[static_cast<std::size_t>(i + f.r)] = std::exp(lc);
    }
    return f;
}

// Pick dt so the filter's validity domain covers the full spectral width of
// the problem with some margin, then design the filter.
inline FilterSpec filter_for_width(double delta, double spectral_width, double x = 5.0,
                                   double margin = 1.2) {
    const double needed = std::max(margin * spectral_width, 8.0 * delta);
    const double n_cal = 2.0 * needed / std::numbers::pi;
    const double dt = 2.0 / n_cal;
    return filter_design(delta, dt, x);
}

namespace detail {
// 8-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
} // namespace detail

// Gaussian-filtered off-diagonality histogram from time samples
// G(t_m) = Tr(e^{-iHt} rho e^{iHt} rho), m = -R..R.
//
// The DC (diagonal) part of the signal is removed before filtering and its
// mass is assigned to the omega = 0 bin directly: a Gaussian window of std
// delta would otherwise leak ~30% of the (dominant) diagonal spike into the
// neighboring bins and drown their content. `diag_mass` is that purity-
// normalized diagonal weight; engines can compute it exactly or estimate it
// by dephasing.
inline BodHistogram bod_filtered(const std::vector<cdouble>& g_samples, const FilterSpec& filter,
                                 int nbins, double purity, double diag_mass) {
    if (static_cast<long long>(g_samples.size()) != 2 * filter.r + 1)
        throw ConfigError("bod_filtered: sample count does not match the filter grid");
    if (nbins < 1) throw std::domain_error("bod_filtered: need at least one bin");
    const double delta = filter.delta;
    const double omega_top = (2.0 * (nbins - 1) + 1.0) * delta;
    if (omega_top > filter.domain)
        throw std::domain_error("bod_filtered: omega grid exceeds the filter validity domain");
    if (!(purity > 0.0)) throw std::domain_error("bod_filtered: purity must be > 0");

    const long long r = filter.r;
    std::vector<cdouble> gt(g_samples);
    for (auto& v : gt) v = v / purity - diag_mass;

    double max_im = 0.0, max_abs = 0.0;
    auto f_eval = [&](double omega) {
        cdouble acc = 0.0;
        for (long long m = -r; m <= r; ++m) {
            const double t = filter.t_m(m);
            const cdouble phase(std::cos(omega * t), std::sin(omega * t));
            acc += filter.c[static_cast<std::size_t>(m + r)] * phase * gt[static_cast<std::size_t>(m + r)];
        }
        max_im = std::max(max_im, std::abs(acc.imag()));
        max_abs = std::max(max_abs, std::abs(acc));
        return acc.real();
    };

    const double kde_norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * delta);
    BodHistogram h;
    h.bin_width = 2.0 * delta;
    h.purity_norm = purity;
    h.bin_centers.resize(nbins);
    h.values.assign(nbins, 0.0);
    for (int n = 0; n < nbins; ++n) {
        h.bin_centers[n] = 2.0 * delta * n;
        const double lo = (n == 0) ? 0.0 : (2.0 * n - 1.0) * delta;
        const double hi = (2.0 * n + 1.0) * delta;
        double integral = 0.0;
        for (int q = 0; q < 8; ++q) {
            const double w = 0.5 * (hi - lo) * detail::kGlWeights[q];
            const double omega = 0.5 * (hi + lo) + 0.5 * (hi - lo) * detail::kGlNodes[q];
            integral += w * f_eval(omega);
        }
        h.values[n] = 2.0 * kde_norm * integral; // fold +/- omega
    }
    h.values[0] += diag_mass;
    if (max_im > 1e-6 * std::max(max_abs, 1e-300) + 1e-12)
        throw std::runtime_error("bod_filtered: imaginary residue exceeds tolerance");
    return h;
}

// ---------------------------------------------------------------------------
// Dense-state benchmark primitives.
// ---------------------------------------------------------------------------
inline double purity_of(const CMat& rho) { return rho.squaredNorm(); }

inline double cod(const CMat& rho, const CMat& h) {
    const double pur = purity_of(rho);
    if (!(pur > 0.0)) throw std::domain_error("cod: zero-purity state");
    const CMat comm = h * rho - rho * h;
    return comm.squaredNorm() / pur; // -Tr([H,rho]^2) = ||[H,rho]||_F^2
}

inline double cod_from_coeffs(const CMat& coeffs, const RVec& energies) {
    double num = 0.0, den = 0.0;
    const int d = static_cast<int>(energies.size());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const double w = std::norm(coeffs(i, j));
            den += w;
            const double de = energies[i] - energies[j];
            num += w * de * de;
        }
    return num / den;
}

inline double von_neumann_entropy_from_eigs(const RVec& populations) {
    double s = 0.0;
    for (int i = 0; i < populations.size(); ++i) {
        const double p = populations[i];
        if (p > 0.0) s -= p * std::log(p);
    }
    return s;
}

inline double von_neumann_entropy(const CMat& rho) {
    const auto eig = linalg::eig_herm(rho);
    return von_neumann_entropy_from_eigs(eig.values);
}

// D(rho || sigma) = Tr rho ln rho - Tr rho ln sigma. sigma must be full rank.
inline double relative_entropy(const CMat& rho, const CMat& sigma) {
    const auto es = linalg::eig_herm(sigma);
    if (es.values.minCoeff() <= 1e-14 * std::max(1.0, es.values.maxCoeff()))
        throw std::domain_error("relative_entropy: sigma is (numerically) rank deficient");
    const auto er = linalg::eig_herm(rho);
    double tr_rho_ln_rho = 0.0;
    for (int i = 0; i < er.values.size(); ++i) {
        const double p = er.values[i];
        if (p > 0.0) tr_rho_ln_rho += p * std::log(p);
    }
    RVec lnsig = es.values.array().log();
    const CMat ln_sigma = es.vectors * lnsig.asDiagonal() * es.vectors.adjoint();
    const double tr_rho_ln_sigma = (rho * ln_sigma).trace().real();
    return tr_rho_ln_rho - tr_rho_ln_sigma;
}

// Under isospectral endpoints, D(rho_QATE || rho_G) reduces to beta * dE.
inline double relative_entropy_isospectral_identity(double beta, double delta_e) {
    return beta * delta_e;
}

// ---------------------------------------------------------------------------
// rho_min: largest weights paired with the lowest final energies.
// ---------------------------------------------------------------------------
struct RhoMinResult {
    RVec populations; // aligned with the ascending final energies
    double e_min = 0.0;
};

inline RhoMinResult rho_min_spectrum(const RVec& weights_desc, const RVec& energies_asc) {
    if (weights_desc.size() != energies_asc.size())
        throw ConfigError("rho_min_spectrum: weight/energy length mismatch");
    RhoMinResult out;
    out.populations = weights_desc;
    out.e_min = weights_desc.dot(energies_asc);
    return out;
}

// ---------------------------------------------------------------------------
// Gibbs thermodynamics from a fixed spectrum, plus beta root finding.
// ---------------------------------------------------------------------------
struct GibbsPoint {
    double energy = 0.0;
    double entropy = 0.0;
    RVec populations;
};

inline GibbsPoint gibbs_from_spectrum(const RVec& energies, double beta) {
    const double e0 = energies.minCoeff();
    RVec w = (-(beta) * (energies.array() - e0)).exp();
    const double z = w.sum();
    w /= z;
    GibbsPoint p;
    p.populations = w;
    p.energy = w.dot(energies);
    p.entropy = von_neumann_entropy_from_eigs(w);
    return p;
}

namespace detail {
template <typename F>
inline double bisect_beta(F value, double target, bool decreasing, double lo = 1e-6,
                          double hi = 1e3, const char* what = "quantity") {
    double f_lo = value(lo), f_hi = value(hi);
    const double vmin = decreasing ? f_hi : f_lo;
    const double vmax = decreasing ? f_lo : f_hi;
    if (target < vmin - 1e-12 || target > vmax + 1e-12)
        throw std::domain_error(std::string("beta root finding: target ") + what +
                                " outside attainable range [" + std::to_string(vmin) + ", " +
                                std::to_string(vmax) + "]");
    for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = value(mid);
        const bool go_right = decreasing ? (f > target) : (f < target);
        if (go_right) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}
} // namespace detail

// Both S(beta) and E(beta) are strictly decreasing in beta, so bisection is
// guaranteed to converge.
inline double beta_for_entropy(const RVec& energies, double s_target) {
    return detail::bisect_beta(
        [&](double b) { return gibbs_from_spectrum(energies, b).entropy; }, s_target, true,
        1e-6, 1e3, "entropy");
}

inline double beta_for_energy(const RVec& energies, double e_target) {
    return detail::bisect_beta(
        [&](double b) { return gibbs_from_spectrum(energies, b).energy; }, e_target, true,
        1e-6, 1e3, "energy");
}

// ---------------------------------------------------------------------------
// Free-fermion mode-sum thermodynamics (each mode contributes +/- eps/2).
// ---------------------------------------------------------------------------
inline double mode_gibbs_energy(const RVec& mode_energies, double beta) {
    double e = 0.0;
    for (int i = 0; i < mode_energies.size(); ++i)
        e -= 0.5 * mode_energies[i] * std::tanh(0.5 * beta * mode_energies[i]);
    return e;
}

inline double mode_gibbs_entropy(const RVec& mode_energies, double beta) {
    double s = 0.0;
    for (int i = 0; i < mode_energies.size(); ++i) {
        // two-level entropy at splitting eps: ln(2cosh(y)) - y tanh(y),
        // y = beta*eps/2, with ln(2cosh y) = y + log1p(e^{-2y})
        const double y = std::abs(0.5 * beta * mode_energies[i]);
        s += std::log1p(std::exp(-2.0 * y)) + y * (1.0 - std::tanh(y));
    }
    return s;
}

inline double mode_gibbs_variance(const RVec& mode_energies, double beta) {
    double v = 0.0;
    for (int i = 0; i < mode_energies.size(); ++i) {
        const double e = 0.5 * mode_energies[i];
        const double t = std::tanh(beta * e);
        v += e * e * (1.0 - t * t);
    }
    return v;
}

inline double beta_for_entropy_modes(const RVec& mode_energies, double s_target) {
    return detail::bisect_beta(
        [&](double b) { return mode_gibbs_entropy(mode_energies, b); }, s_target, true, 1e-9,
        1e4, "entropy");
}

// ---------------------------------------------------------------------------
// Gaussian density-of-states closed forms.
// ---------------------------------------------------------------------------
struct GaussianDosResult {
    double e_g_init = 0.0;
    double entropy = 0.0;
    double beta_final = 0.0;
    double e_min = 0.0;
    double delta_e_min = 0.0;
    double var_min = 0.0;
};

inline GaussianDosResult gaussian_dos_suite(double beta, double sigma_init, double sigma_final,
                                            int n_sites) {
    if (!(sigma_init > 0.0) || !(sigma_final > 0.0))
        throw std::domain_error("gaussian_dos_suite: sigmas must be > 0");
    GaussianDosResult r;
    r.e_g_init = -beta * sigma_init * sigma_init;
    r.entropy = n_sites * std::numbers::ln2 - 0.5 * beta * beta * sigma_init * sigma_init;
    r.beta_final = beta * sigma_init / sigma_final;
    r.e_min = -beta * sigma_init * sigma_final;
    r.delta_e_min = 0.0;
    r.var_min = sigma_final * sigma_final;
    return r;
}

} // namespace qate::bench
