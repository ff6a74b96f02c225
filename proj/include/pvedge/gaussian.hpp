#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace pvedge {

/// Probabilists' Hermite polynomial H_k(x).
double hermite(int k, double x);

/// |x|^p with repeated squaring for small integer p.
inline double abs_pow(double x, double p) noexcept {
    x = x < 0 ? -x : x;
    if (p >= 0.0 && p <= 64.0 && static_cast<double>(static_cast<int>(p)) == p) {
        int k = static_cast<int>(p);
        double result = 1.0;
        while (k > 0) {
            if (k & 1) result *= x;
            x *= x;
            k >>= 1;
        }
        return result;
    }
    return std::pow(x, p);
}

/// m_p = E|Z|^p for Z ~ N(0, 1); requires p > -1.
double abs_moment(double p);

/// Exponent of the power function f_p(x) = |x|^p.
struct PowerSpec {
    double p = 2.0;

    /// p in 2N or p > 13, the regime of the full expansion pipeline.
    bool expansion_admissible() const noexcept;
    /// True when only LLN/CLT use is justified.
    bool warning() const noexcept { return !expansion_admissible(); }
};

/// Gauss-Hermite rule for E[h(Z)], Z ~ N(0, 1) (Golub-Welsch).
class GaussQuadrature {
public:
    explicit GaussQuadrature(int order);

    /// Shared immutable rule of the given order.
    static const GaussQuadrature& of_order(int order);

    int order() const noexcept { return static_cast<int>(nodes_.size()); }
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    template <class F>
    double expectation(F&& h) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * h(nodes_[i]);
        return s;
    }

private:
    std::vector<double> nodes_, weights_;
};

/// E[h(Z)] starting from 64 nodes and doubling (up to 1024) until two
/// successive orders agree to rel_tol relative to E|h(Z)|.
double gaussian_expectation(const std::function<double(double)>& h, double rel_tol = 1e-9);

/// rho_x(f_p) = m_p |x|^p and its first two derivatives in x.
struct RhoDerivs {
    double value = 0, d1 = 0, d2 = 0;
};
double rho(double p, double x);
/// Throws SingularityError for x = 0 with p < 2.
RhoDerivs rho_derivs(double p, double x);

/// f_p^{(k)} for k = 1, 2: p sgn(x)|x|^{p-1} and p(p-1)|x|^{p-2}.
double power_d1(double p, double x);
double power_d2(double p, double x);

/// Even function f with E f(Z) = 0 together with f' and, for Gamma-bar,
/// the uncentered version whose products enter the lag-1 estimator.
struct EvenFunctional {
    std::string name;
    double p = 0.0;  ///< power for f_p - m_p; 0 otherwise
    std::function<double(double)> f;
    std::function<double(double)> fprime;
    std::function<double(double)> raw;

    /// H_k with k even.
    static EvenFunctional hermite_poly(int k);
    /// f_p - m_p; raw is |x|^p.
    static EvenFunctional centered_power(double p);
    static EvenFunctional zero();
};

/// lambda_k = E[f(Z) H_k(Z)] / k! for k = 0..kmax; odd k and k < 2 are 0.
/// Throws ContractViolation when f is not even or not centered.
std::vector<double> hermite_coeffs(const EvenFunctional& f, int kmax);

/// y, tau -> E[g(y + sqrt(tau) Z)] for a fixed function g, with the
/// Gauss-Hermite order chosen once by doubling from 16 until two orders agree
/// to 1e-9 relatively on a probe set.
class GaussianSmoother {
public:
    explicit GaussianSmoother(std::function<double(double)> g);

    double operator()(double y, double tau) const;
    int order() const noexcept { return rule_->order(); }

private:
    std::function<double(double)> g_;
    const GaussQuadrature* rule_;
};

/// E[f_p'(y + sqrt(tau) Z)]; equals f_p'(y) at tau = 0. Gauss-Hermite for even
/// integer p, graded Gauss-Legendre panels around the kink otherwise.
double smoothed_fprime(double p, double y, double tau);

/// Monte Carlo estimates of the universal constants and their standard errors.
///   gamma1    = Var[I],  I = int_0^1 E^2[f'(W_1) | F_s] ds
///   gamma2    = Cov[f(W_1), I]
///   gamma_bar = Cov[raw(W_1)^2, I] - 2 Cov[raw(W_1) raw(W_2 - W_1), I]
///   mean_f_i  = E[f(W_1) I]
struct GammaConstants {
    double gamma1 = 0, gamma2 = 0, gamma_bar = 0, mean_f_i = 0;
    double se_gamma1 = 0, se_gamma2 = 0, se_gamma_bar = 0, se_mean_f_i = 0;
    std::size_t replications = 0;
    int time_steps = 0;
    std::uint64_t seed = 0;
};

struct GammaOptions {
    int time_steps = 512;  ///< trapezoid grid on [0, 1]; power of two
    int workers = 0;
};

/// Requires R >= 1000. W on [0, 1] comes from the dyadic bridge fill, W_2 - W_1
/// from an independent normal; the conditional expectation is evaluated by
/// Gaussian smoothing of f'.
GammaConstants gamma_constants(const EvenFunctional& f, std::size_t replications, std::uint64_t seed,
                               const GammaOptions& options = {});

/// JSON table of constants keyed by functional name and power.
std::string gamma_table_json(const std::vector<std::pair<EvenFunctional, GammaConstants>>& rows);

/// Closed forms of g_1..g_5 for f_p at (x1..x6) = (b2, b1, b21, b12, b11, b111),
/// with the absolute moments precomputed for one p (requires p > 1).
class GFunctions {
public:
    explicit GFunctions(double p);

    /// Throws DomainError for x2 = 0 with p < 2.
    std::array<double, 5> operator()(const std::array<double, 6>& x) const;
    double p() const noexcept { return p_; }

private:
    double p_, mp_, mp2_, mm2_, m2p_, m2pm2_, m2pp2_;
};

/// GFunctions(p)(x).
std::array<double, 5> g_functions(double p, const std::array<double, 6>& x);

}  // namespace pvedge
