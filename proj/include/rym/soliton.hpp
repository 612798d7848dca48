#pragma once

// Parameter space, reduced ODE right-hand sides, closed-form solutions and
// rescaling maps for the one-parameter family of rotationally symmetric
// steady gradient Ricci-Yang-Mills solitons on surfaces.
//
// Conventions (canonical normalization mu = -1):
//   metric        g = dr^2 + phi(r)^2 dtheta^2
//   potential     f' = mu * phi
//   field         F = psi dr ^ dtheta,  psi = eta * phi * e^f  (eta conserved)
//   family        lambda = 2 (eta^2/4 + mu),  lambda in [-2, inf)
//
// ODEs:
//   f''   = (1/2) f'^2 - (eta^2/4) e^{2f} + lambda/2
//   phi'' = 3 mu phi phi' - mu^2 phi^3 - lambda phi
// The production system integrates (f, phi, phi'); f' is recovered as mu*phi.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "rym/ode.hpp"

namespace rym {

class FormParamMismatchError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// The triple (mu, eta, lambda) selecting one member of the family.
///
/// The constraint lambda = 2 (eta^2/4 + mu) is maintained exactly: every
/// constructor derives the stored lambda from (mu, eta) through the single
/// expression constraint_lambda, so constraint_residual() is 0.0 bitwise.
/// A requested lambda may therefore shift by an ulp or two.
struct SolitonParams {
    double mu = -1.0;
    double eta = 0.0;
    double lambda = -2.0;

    static double constraint_lambda(double mu, double eta) {
        return 2.0 * (eta * eta / 4.0 + mu);
    }

    double constraint_residual() const { return lambda - constraint_lambda(mu, eta); }

    /// Canonical normalization: mu = -1, eta = sqrt(2 (lambda + 2)).
    static SolitonParams canonical(double lambda) {
        if (!(lambda >= -2.0))
            throw std::invalid_argument("SolitonParams: lambda below -2 (maximal family interval)");
        return from_mu_lambda(-1.0, lambda);
    }

    static SolitonParams from_mu_eta(double mu, double eta) {
        if (!(eta >= 0.0)) throw std::invalid_argument("SolitonParams: eta must be >= 0");
        return SolitonParams{mu, eta, constraint_lambda(mu, eta)};
    }

    static SolitonParams from_mu_lambda(double mu, double lambda) {
        const double eta_sq = 2.0 * lambda - 4.0 * mu;
        if (!(eta_sq >= 0.0))
            throw std::invalid_argument("SolitonParams: lambda - 2 mu must be >= 0");
        return from_mu_eta(mu, std::sqrt(eta_sq));
    }

    static SolitonParams from_eta_lambda(double eta, double lambda) {
        if (!(eta >= 0.0)) throw std::invalid_argument("SolitonParams: eta must be >= 0");
        return from_mu_eta(lambda / 2.0 - eta * eta / 4.0, eta);
    }
};

/// Pointwise values along the radial coordinate.
struct SolitonState {
    double r = 0.0;
    double f = 0.0;
    double fp = 0.0;
    double phi = 0.0;
    double phip = 1.0;
};

/// The smooth-pole initial state f(0)=0, f'(0)=0, phi(0)=0, phi'(0)=1.
inline SolitonState initial_state() { return SolitonState{}; }

// --- right-hand sides -------------------------------------------------------

/// f'' = (1/2) f'^2 - (eta^2/4) e^{2f} + lambda/2.
inline std::array<double, 2> rhs_f(double /*r*/, std::array<double, 2> y,
                                   const SolitonParams& p) {
    const double f = y[0], fp = y[1];
    const double fpp = 0.5 * fp * fp - (p.eta * p.eta / 4.0) * std::exp(2.0 * f) +
                       0.5 * p.lambda;
    return {fp, fpp};
}

/// phi'' = 3 mu phi phi' - mu^2 phi^3 - lambda phi.
inline std::array<double, 2> rhs_phi(double /*r*/, std::array<double, 2> y,
                                     const SolitonParams& p) {
    const double phi = y[0], phip = y[1];
    const double phipp = 3.0 * p.mu * phi * phip - p.mu * p.mu * phi * phi * phi -
                         p.lambda * phi;
    return {phip, phipp};
}

/// Production system y = (f, phi, phi'): f' = mu*phi, (phi', phi'') as rhs_phi.
inline std::array<double, 3> rhs_coupled(double r, std::array<double, 3> y,
                                         const SolitonParams& p) {
    const auto ph = rhs_phi(r, {y[1], y[2]}, p);
    return {p.mu * y[1], ph[0], ph[1]};
}

/// OdeProblem for the coupled system started at the smooth pole.
inline ode::OdeProblem coupled_problem(const SolitonParams& params) {
    ode::OdeProblem prob;
    prob.dimension = 3;
    prob.r0 = 0.0;
    prob.y0 = {0.0, 0.0, 1.0};
    prob.rhs = [params](double r, std::span<const double> y, std::span<double> dy) {
        const auto d = rhs_coupled(r, {y[0], y[1], y[2]}, params);
        dy[0] = d[0];
        dy[1] = d[1];
        dy[2] = d[2];
    };
    return prob;
}

/// Reads the coupled-system state at radius r; fp is reconstructed as mu*phi.
inline SolitonState state_at(const ode::DenseSolution& sol, double r,
                             const SolitonParams& params) {
    std::array<double, 3> y{};
    sol.eval_into(r, y);
    return SolitonState{r, y[0], params.mu * y[1], y[1], y[2]};
}

/// Taylor start near the pole:
///   phi = r + (3 mu - lambda) r^3/6,   f = mu r^2/2 + mu (3 mu - lambda) r^4/24.
/// The ODE is regular at r = 0 and is integrated from the exact initial state;
/// this expansion serves callers needing geometry limits near the pole.
inline SolitonState series_start(const SolitonParams& p, double r_eps) {
    const double c3 = (3.0 * p.mu - p.lambda) / 6.0;
    const double r2 = r_eps * r_eps;
    SolitonState s;
    s.r = r_eps;
    s.phi = r_eps * (1.0 + c3 * r2);
    s.phip = 1.0 + 3.0 * c3 * r2;
    s.f = p.mu * r2 * (0.5 + c3 * r2 / 4.0);
    s.fp = p.mu * s.phi;
    return s;
}

/// psi = eta * phi * e^f  (so that psi e^{-f} / phi is the constant eta).
inline double psi_of(const SolitonState& s, const SolitonParams& p) {
    return p.eta * s.phi * std::exp(s.f);
}

// --- closed forms ------------------------------------------------------------

enum class ClosedFormKind { Cigar, Cusp, Bzero, SphereLimit };

/// Closed-form members of the family, with ODE-verified coefficients under the
/// canonical normalization mu = -1:
///   Cigar  (lambda = -2): phi = sqrt(2) tanh(r/sqrt(2)), f = -2 ln cosh(r/sqrt(2)).
///     (2 tanh(r/2) solves the same ODE for (mu, lambda) = (-1/2, -1).)
///   Cusp   (lambda =  0): phi = 2r/(r^2+2), f = ln(2/(r^2+2)).
///     (r/(r^2+1) is the alpha = 1/2 rescaling, i.e. (mu, lambda) = (-2, 0).)
///   Bzero  (lambda =  0, A = eta^2/4): general-initial-condition potential
///     f = ln(4 e^{c1} / ((2 - c2 x)^2 + 2 A e^{2 c1} x^2)).
///   SphereLimit: the rescaled alpha -> infinity limit phi = sin(r), f = 0
///     (mu = 0; for general lambda the mu = 0 equation gives sin(sqrt(lambda) r)/sqrt(lambda)).
struct ClosedForm {
    ClosedFormKind kind = ClosedFormKind::Cigar;
    double c1 = 0.0, c2 = 0.0, A = 1.0;  // Bzero only

    static ClosedForm cigar() { return {ClosedFormKind::Cigar}; }
    static ClosedForm cusp() { return {ClosedFormKind::Cusp}; }
    static ClosedForm sphere_limit() { return {ClosedFormKind::SphereLimit}; }
    static ClosedForm bzero(double c1, double c2, double A) {
        if (!(A > 0.0)) throw std::invalid_argument("ClosedForm::bzero: A must be > 0");
        return {ClosedFormKind::Bzero, c1, c2, A};
    }
};

namespace detail {
inline void require_close(double got, double want, const char* what) {
    if (!(std::abs(got - want) <= 1e-12 * (1.0 + std::abs(want))))
        throw FormParamMismatchError(std::string("closed_form_eval: form requires ") + what);
}
}  // namespace detail

inline SolitonState closed_form_eval(const ClosedForm& form, double r,
                                     const SolitonParams& p) {
    SolitonState s;
    s.r = r;
    switch (form.kind) {
        case ClosedFormKind::Cigar: {
            detail::require_close(p.mu, -1.0, "mu = -1");
            detail::require_close(p.lambda, -2.0, "lambda = -2");
            const double s2 = std::sqrt(2.0);
            const double t = std::tanh(r / s2);
            s.phi = s2 * t;
            s.phip = 1.0 - t * t;
            s.f = -2.0 * std::log(std::cosh(r / s2));
            s.fp = -s.phi;
            return s;
        }
        case ClosedFormKind::Cusp: {
            detail::require_close(p.mu, -1.0, "mu = -1");
            detail::require_close(p.lambda, 0.0, "lambda = 0");
            const double d = r * r + 2.0;
            s.phi = 2.0 * r / d;
            s.phip = 2.0 * (2.0 - r * r) / (d * d);
            s.f = std::log(2.0 / d);
            s.fp = -s.phi;
            return s;
        }
        case ClosedFormKind::Bzero: {
            detail::require_close(p.mu, -1.0, "mu = -1");
            detail::require_close(p.lambda, 0.0, "lambda = 0");
            detail::require_close(p.eta * p.eta / 4.0, form.A, "A = eta^2/4");
            const double w = 2.0 - form.c2 * r;
            const double q = 2.0 * form.A * std::exp(2.0 * form.c1);
            const double den = w * w + q * r * r;  // > 0 for all real r when A > 0
            s.f = std::log(4.0 * std::exp(form.c1) / den);
            s.fp = (4.0 * form.c2 - 2.0 * (form.c2 * form.c2 + q) * r) / den;
            s.phi = -s.fp;  // f' = mu phi with mu = -1
            const double fpp = 0.5 * s.fp * s.fp - form.A * std::exp(2.0 * s.f);
            s.phip = -fpp;
            return s;
        }
        case ClosedFormKind::SphereLimit: {
            detail::require_close(p.mu, 0.0, "mu = 0");
            detail::require_close(p.lambda, 1.0, "lambda = 1");
            s.phi = std::sin(r);
            s.phip = std::cos(r);
            s.f = 0.0;
            s.fp = 0.0;
            return s;
        }
    }
    throw FormParamMismatchError("closed_form_eval: unknown form");
}

// --- rescaling ---------------------------------------------------------------

/// Metric rescaling g -> alpha g, F -> sqrt(alpha) F.
struct RescaleMap {
    double alpha = 1.0;
};

/// (mu, eta, lambda) -> (mu/alpha, eta/sqrt(alpha), lambda/alpha); the family
/// constraint is preserved exactly (lambda re-derived from the scaled pair).
inline SolitonParams rescale_params(const SolitonParams& p, const RescaleMap& map) {
    if (!(map.alpha > 0.0)) throw std::invalid_argument("rescale_params: alpha must be > 0");
    return SolitonParams::from_mu_eta(p.mu / map.alpha, p.eta / std::sqrt(map.alpha));
}

/// Warping-factor transform under the rescaling: with the arclength scaling
/// r~ = sqrt(alpha) r, the profile becomes phi~(r~) = sqrt(alpha) phi(r~/sqrt(alpha)),
/// evaluable on [0, sqrt(alpha) r_end].
class RescaledProfile {
  public:
    RescaledProfile(ode::DenseSolution sol, RescaleMap map, std::size_t phi_component)
        : sol_(std::move(sol)),
          sqrt_alpha_(std::sqrt(map.alpha)),
          comp_(phi_component) {
        if (!(map.alpha > 0.0))
            throw std::invalid_argument("RescaledProfile: alpha must be > 0");
        if (comp_ >= sol_.dimension())
            throw std::invalid_argument("RescaledProfile: component index out of range");
    }

    double r_begin() const { return sqrt_alpha_ * sol_.r_begin(); }
    double r_end() const { return sqrt_alpha_ * sol_.r_end(); }

    double operator()(double r_tilde) const {
        if (r_tilde < r_begin() || r_tilde > r_end())
            throw ode::OutOfRangeError("RescaledProfile: r outside [" +
                                       std::to_string(r_begin()) + ", " +
                                       std::to_string(r_end()) + "]");
        const double s = std::clamp(r_tilde / sqrt_alpha_, sol_.r_begin(), sol_.r_end());
        std::vector<double> y(sol_.dimension());
        sol_.eval_into(s, y);
        return sqrt_alpha_ * y[comp_];
    }

  private:
    ode::DenseSolution sol_;
    double sqrt_alpha_;
    std::size_t comp_;
};

inline RescaledProfile rescale_profile(ode::DenseSolution sol, const RescaleMap& map,
                                       std::size_t phi_component = 1) {
    return RescaledProfile(std::move(sol), map, phi_component);
}

}  // namespace rym
