#pragma once

// Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)) with
// continuous dense output and event location on the dense interpolant.
//
// The integrator is deterministic: identical inputs produce bit-identical
// DenseSolution objects. All types here are immutable after construction
// and safe to share across threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rym::ode {

using Rhs = std::function<void(double r, std::span<const double> y, std::span<double> dydr)>;
using EventFn = std::function<double(double r, std::span<const double> y)>;

/// An initial value problem y' = rhs(r, y), y(r0) = y0.
/// The right-hand side must be deterministic.
struct OdeProblem {
    std::size_t dimension = 0;
    Rhs rhs;
    double r0 = 0.0;
    std::vector<double> y0;
};

struct IntegrationConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double h_init = 1e-3;
    double h_min = 1e-12;
    double h_max = 0.1;
    std::size_t max_steps = 10'000'000;

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
            throw std::invalid_argument("IntegrationConfig: tolerances must be positive");
        if (!(h_min > 0.0) || !(h_init > 0.0) || !(h_max > 0.0))
            throw std::invalid_argument("IntegrationConfig: step sizes must be positive");
        if (h_min > h_init || h_init > h_max)
            throw std::invalid_argument("IntegrationConfig: require h_min <= h_init <= h_max");
        if (max_steps < 1)
            throw std::invalid_argument("IntegrationConfig: max_steps must be >= 1");
    }
};

enum class EventDirection { Any, Rising, Falling };

/// A scalar event function g(r, y). A root is recorded whenever g changes
/// sign across an accepted step in the requested direction. Terminal events
/// stop the integration at the located root.
struct EventSpec {
    EventFn fn;
    EventDirection direction = EventDirection::Any;
    bool terminal = false;
    double root_tol = 1e-12;
};

struct EventRecord {
    std::size_t event_index = 0;
    double r = 0.0;
    std::vector<double> y;
};

class OutOfRangeError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

class NoSignChangeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class DenseSolution;
DenseSolution integrate(const OdeProblem& problem, const IntegrationConfig& config,
                        double r_end, std::span<const EventSpec> events);

/// Piecewise-quartic interpolant of an integrated trajectory.
///
/// eval() is continuous on [r_begin, r_end] and returns the stored step
/// endpoint states exactly when queried at a breakpoint.
class DenseSolution {
  public:
    std::size_t dimension() const { return dim_; }
    double r_begin() const { return bp_.front(); }
    double r_end() const { return bp_.back(); }
    const std::vector<double>& breakpoints() const { return bp_; }
    const std::vector<EventRecord>& events() const { return events_; }
    std::size_t steps() const { return h_.size(); }

    std::vector<double> eval(double r) const {
        std::vector<double> out(dim_);
        eval_into(r, out);
        return out;
    }

    void eval_into(double r, std::span<double> out) const {
        if (r < bp_.front() || r > bp_.back())
            throw OutOfRangeError("DenseSolution::eval: r=" + std::to_string(r) +
                                  " outside [" + std::to_string(bp_.front()) + ", " +
                                  std::to_string(bp_.back()) + "]");
        auto it = std::lower_bound(bp_.begin(), bp_.end(), r);
        if (it != bp_.end() && *it == r) {
            const std::size_t i = static_cast<std::size_t>(it - bp_.begin());
            std::copy_n(states_.begin() + static_cast<std::ptrdiff_t>(i * dim_), dim_, out.begin());
            return;
        }
        const std::size_t step = static_cast<std::size_t>(it - bp_.begin()) - 1;
        const double theta = (r - bp_[step]) / h_[step];
        const double theta1 = 1.0 - theta;
        const double* c = coeff_.data() + step * 5 * dim_;
        for (std::size_t i = 0; i < dim_; ++i) {
            out[i] = c[i] + theta * (c[dim_ + i] +
                     theta1 * (c[2 * dim_ + i] +
                     theta * (c[3 * dim_ + i] + theta1 * c[4 * dim_ + i])));
        }
    }

    /// State stored at breakpoint index i (0 = initial state).
    std::span<const double> state(std::size_t i) const {
        return {states_.data() + i * dim_, dim_};
    }

  private:
    friend DenseSolution integrate(const OdeProblem&, const IntegrationConfig&,
                                   double, std::span<const EventSpec>);

    std::size_t dim_ = 0;
    std::vector<double> bp_;      // n+1 breakpoints, strictly increasing
    std::vector<double> h_;       // n polynomial scales (>= breakpoint gap; differs
                                  // from the gap only on a step truncated by a
                                  // terminal event)
    std::vector<double> coeff_;   // n * 5 * dim interpolation coefficients
    std::vector<double> states_;  // (n+1) * dim states at breakpoints
    std::vector<EventRecord> events_;
};

enum class FailureKind { StepUnderflow, MaxStepsExceeded, NonFiniteState };

/// Integration failure carrying the partial trajectory accepted so far.
class IntegrationError : public std::runtime_error {
  public:
    IntegrationError(FailureKind k, const std::string& msg, DenseSolution partial_sol)
        : std::runtime_error(msg), kind(k), partial(std::move(partial_sol)) {}

    FailureKind kind;
    DenseSolution partial;
};

/// Bracketing root refinement (Brent). Returns r* with |fn(r*)| <= tol or
/// bracket width <= tol. Requires fn(lo) * fn(hi) <= 0.
inline double refine_root(const std::function<double(double)>& fn, double lo, double hi,
                          double tol) {
    double a = lo, b = hi;
    double fa = fn(a), fb = fn(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0))
        throw NoSignChangeError("refine_root: fn does not change sign on the bracket");

    double c = a, fc = fa;
    double d = b - a, e = d;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (int iter = 0; iter < 200; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a; fc = fa;
            d = b - a; e = d;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * eps * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(fb) <= tol || std::abs(xm) <= tol1) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            // inverse quadratic / secant step
            const double s = fb / fa;
            double p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double rr = fb / fc;
                p = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0));
                q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
        fb = fn(b);
    }
    return b;
}

namespace detail {

// Dormand-Prince 5(4) tableau, error weights and dense-output weights.
namespace dp {
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool crossing_matches(double g_lo, double g_hi, EventDirection dir) {
    // A left-endpoint zero never counts as a crossing; it was either recorded
    // by the previous subinterval or sits at the trajectory start.
    if (g_lo == 0.0) return false;
    switch (dir) {
        case EventDirection::Rising: return g_lo < 0.0 && g_hi >= 0.0;
        case EventDirection::Falling: return g_lo > 0.0 && g_hi <= 0.0;
        case EventDirection::Any: return (g_lo > 0.0 && g_hi <= 0.0) || (g_lo < 0.0 && g_hi >= 0.0);
    }
    return false;
}

}  // namespace detail

/// Integrates `problem` from r0 to r_end (or to the first terminal event).
///
/// Local error per step is controlled against rel_tol/abs_tol with the mixed
/// componentwise norm sc_i = abs_tol + rel_tol * max(|y_i|, |y_new_i|) and a
/// PI step-size controller. Every sign change of each event function across an
/// accepted step is located on the dense interpolant: the step is scanned at 8
/// subintervals and each bracket is refined to the event's root_tol.
///
/// Throws IntegrationError (StepUnderflow, MaxStepsExceeded, NonFiniteState)
/// with the partial trajectory attached.
inline DenseSolution integrate(const OdeProblem& problem, const IntegrationConfig& config,
                               double r_end, std::span<const EventSpec> events = {}) {
    config.validate();
    if (!(r_end > problem.r0))
        throw std::invalid_argument("integrate: r_end must exceed r0");
    if (problem.y0.size() != problem.dimension)
        throw std::invalid_argument("integrate: y0 length must equal dimension");
    if (problem.dimension == 0 || !problem.rhs)
        throw std::invalid_argument("integrate: problem must have a dimension and a rhs");

    using namespace detail::dp;
    const std::size_t n = problem.dimension;

    DenseSolution sol;
    sol.dim_ = n;
    sol.bp_.push_back(problem.r0);
    sol.states_ = problem.y0;

    std::vector<double> y = problem.y0, ynew(n), ystage(n);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    std::vector<double> probe(n);

    double r = problem.r0;
    problem.rhs(r, y, k1);
    if (!detail::all_finite(y) || !detail::all_finite(k1))
        throw IntegrationError(FailureKind::NonFiniteState,
                               "integrate: non-finite state or derivative at the initial point",
                               std::move(sol));

    double h = std::clamp(config.h_init, config.h_min, std::min(config.h_max, r_end - r));
    double facold = 1e-4;
    bool rejected = false;
    bool nonfinite_reject = false;
    constexpr double beta = 0.04, safe = 0.9, expo1 = 0.2 - beta * 0.75;

    for (std::size_t step_count = 0;; ++step_count) {
        if (step_count >= config.max_steps)
            throw IntegrationError(FailureKind::MaxStepsExceeded,
                                   "integrate: exceeded max_steps=" + std::to_string(config.max_steps),
                                   std::move(sol));
        bool last = false;
        if (r + h >= r_end) {
            h = r_end - r;
            last = true;
        }

        // Stages (FSAL: k1 holds f(r, y)).
        for (std::size_t i = 0; i < n; ++i) ystage[i] = y[i] + h * (a21 * k1[i]);
        problem.rhs(r + c2 * h, ystage, k2);
        for (std::size_t i = 0; i < n; ++i) ystage[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        problem.rhs(r + c3 * h, ystage, k3);
        for (std::size_t i = 0; i < n; ++i)
            ystage[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        problem.rhs(r + c4 * h, ystage, k4);
        for (std::size_t i = 0; i < n; ++i)
            ystage[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        problem.rhs(r + c5 * h, ystage, k5);
        for (std::size_t i = 0; i < n; ++i)
            ystage[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                    a65 * k5[i]);
        problem.rhs(r + h, ystage, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                  a76 * k6[i]);
        problem.rhs(r + h, ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = config.abs_tol +
                              config.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                  e6 * k6[i] + e7 * k7[i]);
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / static_cast<double>(n));
        const bool finite_step = std::isfinite(err);
        if (!finite_step) err = 1e10;

        const double fac11 = std::pow(err, expo1);
        if (finite_step && err <= 1.0) {
            // Accept: store dense coefficients for [r, r+h].
            facold = std::max(err, 1e-4);
            const std::size_t base = sol.coeff_.size();
            sol.coeff_.resize(base + 5 * n);
            double* c = sol.coeff_.data() + base;
            for (std::size_t i = 0; i < n; ++i) {
                const double ydiff = ynew[i] - y[i];
                const double bspl = h * k1[i] - ydiff;
                c[i] = y[i];
                c[n + i] = ydiff;
                c[2 * n + i] = bspl;
                c[3 * n + i] = ydiff - h * k7[i] - bspl;
                c[4 * n + i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                    d6 * k6[i] + d7 * k7[i]);
            }
            sol.h_.push_back(h);
            sol.bp_.push_back(r + h);
            sol.states_.insert(sol.states_.end(), ynew.begin(), ynew.end());

            // Locate event roots on this step.
            double r_stop = std::numeric_limits<double>::quiet_NaN();
            if (!events.empty()) {
                const double r_lo = r, r_hi = sol.bp_.back();
                constexpr int probes = 8;
                std::vector<std::pair<double, std::size_t>> roots;
                for (std::size_t j = 0; j < events.size(); ++j) {
                    const EventSpec& ev = events[j];
                    double g_prev = ev.fn(r_lo, y);
                    double rp_prev = r_lo;
                    for (int p = 1; p <= probes; ++p) {
                        const double rp = (p == probes)
                                              ? r_hi
                                              : r_lo + (r_hi - r_lo) * (static_cast<double>(p) / probes);
                        sol.eval_into(rp, probe);
                        const double g = ev.fn(rp, probe);
                        if (detail::crossing_matches(g_prev, g, ev.direction)) {
                            auto g_of = [&](double rr) {
                                sol.eval_into(rr, probe);
                                return ev.fn(rr, probe);
                            };
                            const double root = (g == 0.0)
                                                    ? rp
                                                    : refine_root(g_of, rp_prev, rp, ev.root_tol);
                            roots.emplace_back(root, j);
                        }
                        g_prev = g;
                        rp_prev = rp;
                    }
                }
                std::sort(roots.begin(), roots.end());
                for (const auto& [root, j] : roots) {
                    sol.eval_into(root, probe);
                    sol.events_.push_back(
                        {j, root, std::vector<double>(probe.begin(), probe.end())});
                    if (events[j].terminal) {
                        r_stop = root;
                        break;
                    }
                }
            }
            if (!std::isnan(r_stop)) {
                // Truncate the final step at the terminal root. The polynomial
                // scale h_ keeps the full step so theta stays consistent.
                sol.eval_into(r_stop, probe);
                sol.bp_.back() = r_stop;
                std::copy(probe.begin(), probe.end(),
                          sol.states_.end() - static_cast<std::ptrdiff_t>(n));
                return sol;
            }

            r = sol.bp_.back();
            std::swap(y, ynew);
            std::swap(k1, k7);
            if (last) return sol;

            double fac = fac11 / std::pow(facold, beta);
            fac = std::max(0.1, std::min(5.0, fac / safe));
            double hnew = h / fac;
            if (rejected) hnew = std::min(hnew, h);
            rejected = false;
            nonfinite_reject = false;
            h = std::clamp(hnew, config.h_min, config.h_max);
        } else {
            // Reject and shrink.
            rejected = true;
            nonfinite_reject = !finite_step;
            const double hnew = h / std::min(5.0, fac11 / safe);
            if (hnew < config.h_min) {
                if (nonfinite_reject)
                    throw IntegrationError(
                        FailureKind::NonFiniteState,
                        "integrate: state or derivative became non-finite near r=" +
                            std::to_string(r),
                        std::move(sol));
                throw IntegrationError(FailureKind::StepUnderflow,
                                       "integrate: step size underflow (h < h_min) near r=" +
                                           std::to_string(r),
                                       std::move(sol));
            }
            h = hnew;
        }
    }
}

inline DenseSolution integrate(const OdeProblem& problem, const IntegrationConfig& config,
                               double r_end) {
    return integrate(problem, config, r_end, std::span<const EventSpec>{});
}

}  // namespace rym::ode
