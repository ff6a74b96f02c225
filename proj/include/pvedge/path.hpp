#pragma once

#include "pvedge/model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pvedge {

/// Fine-grid trajectory of (W, X, Y) with the model jet stored at every
/// fine point.
///
/// Arrays hold n*K + K + 1 points: the first n*K + 1 cover [0, 1] and the
/// last K steps extend the path by one observation block onto (1, 1 + 1/n].
struct SimulatedPath {
    int n = 0;
    int refine = 0;
    double fine_dt = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> w, x, y;
    std::vector<CoefficientJet> coef;

    double dn() const noexcept { return 1.0 / n; }
    /// Fine index of t = 1.
    std::size_t steps() const noexcept { return static_cast<std::size_t>(n) * refine; }
    /// Fine index of observation point i (0 <= i <= n + 1).
    std::size_t obs(int i) const noexcept { return static_cast<std::size_t>(i) * refine; }
    std::span<const double> x_unit() const noexcept { return {x.data(), steps() + 1}; }
    std::span<const double> w_unit() const noexcept { return {w.data(), steps() + 1}; }
};

/// Brownian motion on [0, T] at 2^L + 1 equispaced points, built by
/// midpoint bridging so that coarser grids see the same path.
/// out.size() - 1 must be a power of two.
void fill_brownian_dyadic(std::uint64_t seed, std::uint64_t stream, double horizon, std::span<double> out);

/// Milstein for X with the area terms of the order-1.5 Taylor scheme replaced
/// by their conditional mean given the step increment, so that block sums of
/// drift and diffusion match trapezoid and midpoint quadratures of the
/// within-block integrals. Euler for the first variation Y. Brownian values come from
/// fill_brownian_dyadic so that the path at refinement K is nested in the one at 2K.
/// n >= 2 and K >= 1 must be powers of two.
SimulatedPath simulate_path(const DiffusionModel& model, int n, int refine, std::uint64_t seed);

/// D_s X_t = Y_t Y_s^{-1} b1(X_s) for fine indices s <= t, and 0 for s > t.
double malliavin_derivative(const SimulatedPath& path, std::size_t s, std::size_t t);

/// D_s D_s X_t by Euler integration of the second variational equation
/// started at d1_b1(X_s) b1(X_s); O(t - s).
double second_malliavin_diag(const SimulatedPath& path, std::size_t s, std::size_t t);

/// All diagonal second derivatives of one path in O(1) each after an O(nK)
/// setup. Writing Z_u = D_sD_sX_u and c = b1(X_s)/Y_s, the Euler recursion
/// for Z/Y reads U_{k+1} = U_k + c^2 (d2_b2 dt + d2_b1 dW_k) Y_k^2 / Y_{k+1},
/// so Z_u = Y_u (Z_s / Y_s + c^2 (P_u - P_s)) with one prefix sum P.
class SecondDerivativeField {
public:
    explicit SecondDerivativeField(const SimulatedPath& path);

    double operator()(std::size_t s, std::size_t t) const;
    /// P_k from the identity above.
    std::span<const double> prefix() const noexcept { return prefix_; }

private:
    const SimulatedPath* path_;
    std::vector<double> prefix_;
};

}  // namespace pvedge
