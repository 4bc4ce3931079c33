#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "qate/errors.hpp"

namespace qate {

enum class ScheduleKind { linear, smooth, tabulated };

// Adiabatic ramp gamma(s) on s in [0,1] with gamma(0)=0, gamma(1)=1,
// nondecreasing. The smooth kind has its first three derivatives vanishing
// at both endpoints.
struct RampSchedule {
    ScheduleKind kind = ScheduleKind::linear;
    std::vector<std::pair<double, double>> samples; // tabulated only, (s, gamma)

    static RampSchedule linear() { return {ScheduleKind::linear, {}}; }
    static RampSchedule smooth() { return {ScheduleKind::smooth, {}}; }
    static RampSchedule tabulated(std::vector<std::pair<double, double>> pts) {
        RampSchedule r{ScheduleKind::tabulated, std::move(pts)};
        r.validate();
        return r;
    }

    void validate() const {
        if (kind != ScheduleKind::tabulated) return;
        if (samples.size() < 2)
            throw ConfigError("tabulated schedule needs at least two samples");
        for (std::size_t i = 1; i < samples.size(); ++i) {
            if (!(samples[i].first > samples[i - 1].first))
                throw ConfigError("tabulated schedule: s values must be strictly increasing");
            if (samples[i].second < samples[i - 1].second - 1e-12)
                throw ConfigError("tabulated schedule: gamma must be nondecreasing");
        }
        if (std::abs(samples.front().first) > 1e-12 || std::abs(samples.front().second) > 1e-12 ||
            std::abs(samples.back().first - 1.0) > 1e-12 || std::abs(samples.back().second - 1.0) > 1e-12)
            throw ConfigError("tabulated schedule must start at (0,0) and end at (1,1)");
    }
};

inline double gamma_eval(const RampSchedule& schedule, double s) {
    if (s < 0.0 || s > 1.0)
        throw std::domain_error("gamma_eval: s outside [0,1]");
    switch (schedule.kind) {
    case ScheduleKind::linear:
        return s;
    case ScheduleKind::smooth: {
        const double pi = std::numbers::pi;
        const double inner = std::sin(0.5 * pi * s);
        const double v = std::sin(0.5 * pi * inner * inner);
        return v * v;
    }
    case ScheduleKind::tabulated: {
        const auto& p = schedule.samples;
        if (s <= p.front().first) return 0.0;
        if (s >= p.back().first) return 1.0;
        auto it = std::upper_bound(p.begin(), p.end(), s,
                                   [](double x, const auto& q) { return x < q.first; });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double t = (s - lo.first) / (hi.first - lo.first);
        const double g = lo.second + t * (hi.second - lo.second);
        return std::clamp(g, 0.0, 1.0);
    }
    }
    throw std::domain_error("gamma_eval: unknown schedule kind");
}

// d gamma / d s; analytic for the closed-form ramps, central finite
// difference for tabulated ones.
inline double gamma_derivative(const RampSchedule& schedule, double s) {
    const double pi = std::numbers::pi;
    switch (schedule.kind) {
    case ScheduleKind::linear:
        return 1.0;
    case ScheduleKind::smooth: {
        const double u = std::sin(0.5 * pi * s);
        const double a = 0.5 * pi * u * u;
        return 2.0 * std::sin(a) * std::cos(a) * 0.5 * pi * 2.0 * u * std::cos(0.5 * pi * s) * 0.5 * pi;
    }
    case ScheduleKind::tabulated: {
        const double h = 1e-6;
        const double lo = std::max(0.0, s - h);
        const double hi = std::min(1.0, s + h);
        return (gamma_eval(schedule, hi) - gamma_eval(schedule, lo)) / (hi - lo);
    }
    }
    return 0.0;
}

inline double interpolated_coupling(double g0, double g1, const RampSchedule& schedule, double s) {
    const double g = gamma_eval(schedule, s);
    return (1.0 - g) * g0 + g * g1;
}

// Uniform Trotter grid: M = ceil(T/tau) steps of duration T/M, with the
// j-th step evaluated at s_j = j/M.
struct TrotterGrid {
    int m_steps = 0;
    double dt = 0.0; // actual step duration T/M
    std::vector<double> s;
};

inline int trotter_steps(double total_time, double tau) {
    if (!(total_time > 0.0) || !(tau > 0.0))
        throw std::domain_error("trotter grid requires T > 0 and tau > 0");
    const double ratio = total_time / tau;
    int m = static_cast<int>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
    return std::max(m, 1);
}

inline TrotterGrid trotter_grid(double total_time, double tau) {
    TrotterGrid grid;
    grid.m_steps = trotter_steps(total_time, tau);
    grid.dt = total_time / grid.m_steps;
    grid.s.resize(grid.m_steps);
    for (int j = 1; j <= grid.m_steps; ++j)
        grid.s[j - 1] = static_cast<double>(j) / grid.m_steps;
    return grid;
}

} // namespace qate
