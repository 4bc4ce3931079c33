#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "qate/errors.hpp"
#include "qate/schedule.hpp"

namespace qate {

// Mode energies of the translationally invariant TFIM chain (J = 1),
// eps_k = 2 sqrt(1 + g^2 + 2 g cos(2 pi k / N)). Also the on-site fields of
// the isospectral z-field model.
inline double tfim_mode_energy(double g, int k, int n_sites) {
    if (n_sites % 2 != 0) throw ConfigError("tfim_mode_energy: N must be even");
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / n_sites;
    const double u = 1.0 + g * g + 2.0 * g * std::cos(theta);
    return 2.0 * std::sqrt(std::max(u, 0.0));
}

enum class Family { tfim_ti, z_field_isospectral, mixed_field_ising, dense_custom };
enum class Boundary { open, parity_sector };

inline std::string to_string(Family f) {
    switch (f) {
    case Family::tfim_ti: return "tfim_ti";
    case Family::z_field_isospectral: return "z_field_isospectral";
    case Family::mixed_field_ising: return "mixed_field_ising";
    case Family::dense_custom: return "dense_custom";
    }
    return "?";
}

// One endpoint Hamiltonian of the interpolation path.
//   tfim_ti:             -J sum sx sx - g sum sz - Jbc sx_N sx_1, Jbc = -P
//   z_field_isospectral: sum_k eps_k(g)/2 * sz_k  (same spectrum as tfim_ti)
//   mixed_field_ising:   sum J sz sz + sum (h sz + g sx), open chain
struct HamiltonianSpec {
    Family family = Family::tfim_ti;
    int n_sites = 0;
    double J = 1.0;
    double g = 0.0;
    double h = 0.0;
    Boundary boundary = Boundary::parity_sector;

    void validate() const {
        if (n_sites < 2) throw ConfigError("HamiltonianSpec: need at least 2 sites");
        if (family == Family::tfim_ti) {
            if (n_sites % 2 != 0)
                throw ConfigError("tfim_ti requires an even number of sites");
            if (boundary != Boundary::parity_sector)
                throw ConfigError("tfim_ti requires the parity_sector boundary (Jbc = -P)");
        }
        if (family == Family::z_field_isospectral && n_sites % 2 != 0)
            throw ConfigError("z_field_isospectral requires even N (mode set of the TI chain)");
        if (family == Family::mixed_field_ising && boundary != Boundary::open)
            throw ConfigError("mixed_field_ising uses the open boundary");
    }
};

inline HamiltonianSpec tfim_spec(int n, double g) {
    return {Family::tfim_ti, n, 1.0, g, 0.0, Boundary::parity_sector};
}
inline HamiltonianSpec z_field_spec(int n, double g) {
    return {Family::z_field_isospectral, n, 1.0, g, 0.0, Boundary::open};
}
inline HamiltonianSpec mixed_field_spec(int n, double J, double h, double g) {
    return {Family::mixed_field_ising, n, J, g, h, Boundary::open};
}

// Full protocol description: endpoints, inverse temperature, ramp and the
// Trotter time grid parameters.
struct QateConfig {
    double beta = 1.0;
    double total_time = 1.0;
    double tau = 0.1;
    HamiltonianSpec h_init;
    HamiltonianSpec h_final;
    RampSchedule schedule = RampSchedule::linear();

    int m_steps() const { return trotter_steps(total_time, tau); }

    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("QateConfig: tau must be > 0");
        if (!(total_time > 0.0)) throw ConfigError("QateConfig: T must be > 0");
        if (beta < 0.0) throw ConfigError("QateConfig: beta must be >= 0");
        h_init.validate();
        h_final.validate();
        if (h_init.n_sites != h_final.n_sites)
            throw ConfigError("QateConfig: endpoint site counts differ");
        schedule.validate();
    }
};

} // namespace qate
