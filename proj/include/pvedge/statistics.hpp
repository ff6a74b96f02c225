#pragma once

#include "pvedge/path.hpp"

#include <array>
#include <functional>
#include <span>

namespace pvedge {

/// Per-path quantities of the stochastic expansion of the power variation.
struct ExpansionTerms {
    int n = 0;
    double p = 0.0;
    double v_n = 0, v_limit = 0, f_n = 0, c_limit = 0, m_n = 0;
    std::array<double, 5> n_terms{};
    double z_n = 0;
    /// z_n / sqrt(f_n); NaN when f_n <= 0.
    double studentized = 0;
    bool studentized_ok = true;
    /// z_n - m_n - dn^{1/2} (n1 + ... + n5).
    double residual = 0;
    /// p outside 2N and (13, inf).
    bool power_warning = false;

    double n_sum() const noexcept {
        return n_terms[0] + n_terms[1] + n_terms[2] + n_terms[3] + n_terms[4];
    }
};

/// V_n(f_p) = dn sum |Delta_i X / sqrt(dn)|^p over i = 1..n.
double power_variation(const SimulatedPath& path, double p);

/// Trapezoid over the fine grid of m_p |b1(X_s)|^p.
double limit_v(const SimulatedPath& path, double p);

/// Trapezoid over the fine grid of (m_2p - m_p^2) |b1(X_s)|^2p.
double limit_c(const SimulatedPath& path, double p);

/// dn sum_{i=1}^{n} [f_2p(x_i) - f_p(x_i) f_p(x_{i+1})], x_i the rescaled
/// increments; x_{n+1} comes from the block simulated beyond t = 1.
double f_n_estimator(const SimulatedPath& path, double p);

/// dn^{1/2} sum |b1(X_{t_{i-1}})|^p (|Delta_i W / sqrt(dn)|^p - m_p).
double martingale_term(const SimulatedPath& path, double p);

/// Requires K >= 8 and p >= 2.
///
/// Inner integrals per observation block are fine-grid sums that match the
/// path scheme and the trapezoid used for V: int (W_s - W_t) ds and
/// int (W_s - W_t)^2 ds by the trapezoid rule, int (s - t) dW_s by the
/// midpoint sum sum (k + 1/2) h dW_k. The two first-order sums satisfy
/// discrete integration by parts exactly.
ExpansionTerms expansion_terms(const SimulatedPath& path, double p);

/// z_n / sqrt(f_n); throws NonpositiveVariance for f_n <= 0.
double studentize(double z_n, double f_n);

/// V_n computed directly and as V + dn^{1/2} (M_n + R1 + R2) with
/// R1 = dn^{-1/2}(V_n - dn sum f(alpha_i)) and R2 = dn^{-1/2}(dn sum rho(b1_{t_{i-1}}) - V).
struct Decomposition {
    double v_direct = 0, v_reassembled = 0, m_n = 0, r1 = 0, r2 = 0;
};
Decomposition decomposition(const SimulatedPath& path, double p);

/// Weight process a evaluated at a fine index of the path.
using WeightProcess = std::function<double(const SimulatedPath&, std::size_t)>;
/// g(a, w) with w the rescaled Brownian block sampled at the K + 1 fine points.
using BlockFunctional = std::function<double(double, std::span<const double>)>;

/// dn sum_i g(a_{t_{i-1}}, (W_{t_{i-1} + u dn} - W_{t_{i-1}}) / sqrt(dn)).
double riemann_functional(const SimulatedPath& path, const WeightProcess& a, const BlockFunctional& g);

/// Trapezoid over the fine grid of rho_g(a_s).
double riemann_limit(const SimulatedPath& path, const WeightProcess& a, const std::function<double(double)>& rho_g);

}  // namespace pvedge
