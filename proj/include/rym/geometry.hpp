#pragma once

// Pointwise geometric quantities of the warped-product metric
// g = dr^2 + phi(r)^2 dtheta^2 and residuals of the identities the
// soliton family satisfies, evaluated on integrated trajectories.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rym/ode.hpp"
#include "rym/soliton.hpp"

namespace rym {

class DegenerateRadiusError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class InconclusiveTopologyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Below this radius the phi'/phi quotients switch to their pole limits
/// (the coordinate degeneracy at the pole is removable).
inline constexpr double kRSwitch = 1e-4;

/// Event index convention: the phi = 0 closing event armed by solve_family.
inline constexpr std::size_t kPhiZeroEvent = 0;

struct PointwiseGeometry {
    double r = 0.0;
    double K = 0.0;          // Gauss curvature
    double R_scalar = 0.0;   // = 2K
    double F2_norm = 0.0;    // |F|^2 = 2 eta^2 e^{2f}
    double lap_f = 0.0;      // f'' + (phi'/phi) f'
    double grad_f_sq = 0.0;  // (f')^2
    double psi = 0.0;        // eta phi e^f
};

struct IdentityResiduals {
    double i1 = 0.0;            // R - |F|^2/2 + lap f
    double i2_drift = 0.0;      // (R - 3|F|^2/4 + |grad f|^2) relative to a reference point
    double i3 = 0.0;            // |F|^2/4 + lap f - |grad f|^2 - lambda
    double conservation = 0.0;  // psi e^{-f}/phi - eta
    double potent_curv = 0.0;   // psi^2/(2 phi^2) - mu^2 phi^2 + 2 mu phi' - lambda
};

enum class TopologyKind { Compact, Noncompact, Cusp };

struct Topology {
    TopologyKind kind = TopologyKind::Noncompact;
    // Compact: first positive zero of phi and the cone data there.
    double L = 0.0;
    double phip_L = 0.0;
    double cone_angle = 0.0;
    // Noncompact: phi at the end of the trajectory vs the predicted cylinder
    // radius sqrt(-lambda); the cusp case decays to zero instead.
    double asymptotic_radius = 0.0;
    double predicted_radius = 0.0;
};

struct GeometrySummary {
    double lambda = 0.0;
    double K_origin = 0.0;
    Topology topology;
    IdentityResiduals max_residuals;  // componentwise max |.| over the sampled grid
    double r_covered = 0.0;
};

struct ClosingData {
    double L = 0.0;
    double phip_L = 0.0;
    double cone_angle = 0.0;
};

/// K = -phi''/phi with phi'' from the phi-ODE. The common factor phi cancels
/// exactly (phi'' = phi (3 mu phi' - mu^2 phi^2 - lambda)), so the quotient is
/// evaluated in its regular form; below r_switch the Taylor-corrected pole
/// limit -(mu - eta^2/2) - (7 mu^2 - 3 mu lambda) r^2 / 2 is used.
inline double gauss_curvature(const ode::DenseSolution& sol, double r,
                              const SolitonParams& p) {
    if (r < kRSwitch) {
        if (r < sol.r_begin() || r > sol.r_end())
            throw ode::OutOfRangeError("gauss_curvature: r outside trajectory domain");
        const double k0 = p.lambda - 3.0 * p.mu;  // = -(mu - eta^2/2)
        return k0 - 0.5 * (7.0 * p.mu * p.mu - 3.0 * p.mu * p.lambda) * r * r;
    }
    const SolitonState s = state_at(sol, r, p);
    return p.lambda + p.mu * p.mu * s.phi * s.phi - 3.0 * p.mu * s.phip;
}

/// |F|^2 = 2 eta^2 e^{2f}.
inline double ym_density(const SolitonState& s, const SolitonParams& p) {
    return 2.0 * p.eta * p.eta * std::exp(2.0 * s.f);
}

namespace detail {

struct ResidualTerms {
    double i1 = 0.0, i2_quantity = 0.0, i3 = 0.0, conservation = 0.0, potent_curv = 0.0;
};

// Residual terms at a state; quotients switch to their pole limits below
// r_switch (f'/phi = mu exactly along coupled trajectories).
inline ResidualTerms residual_terms(const SolitonState& s, double K, const SolitonParams& p) {
    const bool at_pole = s.r < kRSwitch;
    const double R = 2.0 * K;
    const double F2 = ym_density(s, p);
    const double fpp = rhs_f(s.r, {s.f, s.fp}, p)[1];
    const double lap_f = at_pole ? fpp + p.mu * s.phip : fpp + (s.phip / s.phi) * s.fp;
    const double grad = s.fp * s.fp;
    const double psi = psi_of(s, p);

    ResidualTerms t;
    t.i1 = R - 0.5 * F2 + lap_f;
    t.i2_quantity = R - 0.75 * F2 + grad;
    t.i3 = 0.25 * F2 + lap_f - grad - p.lambda;
    t.conservation = at_pole ? 0.0 : psi * std::exp(-s.f) / s.phi - p.eta;
    const double psi_sq_over_phi_sq =
        at_pole ? p.eta * p.eta * std::exp(2.0 * s.f) : (psi / s.phi) * (psi / s.phi);
    t.potent_curv = 0.5 * psi_sq_over_phi_sq - p.mu * p.mu * s.phi * s.phi +
                    2.0 * p.mu * s.phip - p.lambda;
    return t;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
}

}  // namespace detail

inline PointwiseGeometry pointwise_geometry(const ode::DenseSolution& sol, double r,
                                            const SolitonParams& p) {
    const SolitonState s = state_at(sol, r, p);
    PointwiseGeometry g;
    g.r = r;
    g.K = gauss_curvature(sol, r, p);
    g.R_scalar = 2.0 * g.K;
    g.F2_norm = ym_density(s, p);
    const double fpp = rhs_f(r, {s.f, s.fp}, p)[1];
    g.lap_f = (r < kRSwitch) ? fpp + p.mu * s.phip : fpp + (s.phip / s.phi) * s.fp;
    g.grad_f_sq = s.fp * s.fp;
    g.psi = psi_of(s, p);
    return g;
}

/// Residuals of the soliton identities at radius r, with the drift quantity
/// referenced to r_ref (conventionally the first point of the caller's grid).
inline IdentityResiduals identity_residuals(const ode::DenseSolution& sol, double r,
                                            const SolitonParams& p, double r_ref = 1e-2) {
    if (r < kRSwitch)
        throw DegenerateRadiusError("identity_residuals: r below r_switch");
    const auto t = detail::residual_terms(state_at(sol, r, p), gauss_curvature(sol, r, p), p);
    const auto t_ref =
        detail::residual_terms(state_at(sol, r_ref, p), gauss_curvature(sol, r_ref, p), p);
    return IdentityResiduals{t.i1, t.i2_quantity - t_ref.i2_quantity, t.i3, t.conservation,
                             t.potent_curv};
}

/// First positive zero of phi, if a closing event fired: (L, phi'(L), 2 pi |phi'(L)|).
inline std::optional<ClosingData> closing_radius(const ode::DenseSolution& sol,
                                                 const SolitonParams& /*params*/) {
    for (const auto& ev : sol.events()) {
        if (ev.event_index == kPhiZeroEvent && ev.r > 0.0) {
            const double phip_L = ev.y[2];
            return ClosingData{ev.r, phip_L, 2.0 * std::acos(-1.0) * std::abs(phip_L)};
        }
    }
    return std::nullopt;
}

/// Per-trajectory report: curvature at the origin, topology classification and
/// the maximum identity residuals over a 500-point grid.
inline GeometrySummary summarize(const ode::DenseSolution& sol, const SolitonParams& p) {
    GeometrySummary out;
    out.lambda = p.lambda;
    out.r_covered = sol.r_end();
    out.K_origin = gauss_curvature(sol, sol.r_begin(), p);

    const auto closing = closing_radius(sol, p);
    if (closing) {
        out.topology.kind = TopologyKind::Compact;
        out.topology.L = closing->L;
        out.topology.phip_L = closing->phip_L;
        out.topology.cone_angle = closing->cone_angle;
    } else if (p.lambda > 0.0) {
        throw InconclusiveTopologyError(
            "summarize: lambda > 0 but no closing event fired; r_end too small");
    } else {
        std::array<double, 3> y_end{};
        sol.eval_into(sol.r_end(), y_end);
        out.topology.kind = (p.lambda == 0.0) ? TopologyKind::Cusp : TopologyKind::Noncompact;
        out.topology.asymptotic_radius = y_end[1];
        out.topology.predicted_radius = std::sqrt(std::max(0.0, -p.lambda));
    }

    const double lo = std::max(1e-2, sol.r_begin() + kRSwitch);
    const double hi = sol.r_end() - 1e-2;
    if (hi > lo) {
        const auto grid = detail::linspace(lo, hi, 500);
        const auto ref =
            detail::residual_terms(state_at(sol, grid.front(), p),
                                   gauss_curvature(sol, grid.front(), p), p);
        IdentityResiduals m;
        for (double r : grid) {
            const auto t = detail::residual_terms(state_at(sol, r, p),
                                                  gauss_curvature(sol, r, p), p);
            m.i1 = std::max(m.i1, std::abs(t.i1));
            m.i2_drift = std::max(m.i2_drift, std::abs(t.i2_quantity - ref.i2_quantity));
            m.i3 = std::max(m.i3, std::abs(t.i3));
            m.conservation = std::max(m.conservation, std::abs(t.conservation));
            m.potent_curv = std::max(m.potent_curv, std::abs(t.potent_curv));
        }
        out.max_residuals = m;
    }
    return out;
}

}  // namespace rym
