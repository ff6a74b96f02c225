#pragma once

#include "pvedge/gaussian.hpp"
#include "pvedge/path.hpp"

#include <array>
#include <functional>
#include <span>

namespace pvedge {

/// Symmetric 4x4 matrix of integrated covariance densities, indexed 0..3 for
/// (M, F-hat, N, C-hat).
using XiMatrix = std::array<std::array<double, 4>, 4>;

/// The anticipative path functionals C2, C3, C4.
struct AnticipativeFunctionals {
    double c2 = 0, c3 = 0, c4 = 0;
};

/// Per-path coefficients of the adaptive and anticipative symbols.
struct SymbolCoefficients {
    XiMatrix xi{};
    double mu3 = 0;
    double c2 = 0, c3 = 0, c4 = 0;
    double h1_tilde = 0, h2 = 0, h3_tilde = 0, h4 = 0, h5 = 0;
    double lambda2 = 0;
};

/// Fine-grid trapezoid of the covariance densities along the path, using the
/// constants for f_p - m_p. Entries (0,2), (1,2), (2,3) are stored as zero.
XiMatrix xi_matrix(const SimulatedPath& path, double p, const GammaConstants& gammas);

/// Left-point Ito sum of g1 along W plus trapezoid of g2 + g3 + g4, with the
/// g-functions evaluated at the derived coefficients along the path.
double mu3(const SimulatedPath& path, double p);

/// C2, C3, C4 for the weight a = |b1|^p.
///
/// With c_s = b1(X_s)/Y_s the inner integrals factor into suffix sums:
/// int_s^1 (a^2)'(X_u) D_sX_u du = c_s int_s^1 (a^2)'(X_u) Y_u du and likewise
/// for (D_sX_u)^2 and for D_sD_sX_u through SecondDerivativeField. Inner and
/// outer integrals are fine-grid trapezoids, so the cost is O(nK) per path.
AnticipativeFunctionals anticipative_functionals(const SimulatedPath& path, double p);

/// Same functionals for a weight given as a function of the state: a(x),
/// (a^2)'(x), (a^2)''(x).
struct StateWeight {
    std::function<double(double)> a, sq_d1, sq_d2;
};
AnticipativeFunctionals anticipative_functionals(const SimulatedPath& path, const StateWeight& weight);

/// Core routine on per-fine-point values of a, (a^2)' and (a^2)'' along the path.
AnticipativeFunctionals anticipative_functionals(const SimulatedPath& path, std::span<const double> a,
                                                 std::span<const double> sq_d1, std::span<const double> sq_d2);

/// Throws DegenerateSample when xi(0,0) <= 0.
SymbolCoefficients assemble_symbols(const XiMatrix& xi, double mu3, const AnticipativeFunctionals& c, double p);

/// xi_matrix, mu3, anticipative_functionals and assemble_symbols for one path.
SymbolCoefficients compute_symbols(const SimulatedPath& path, double p, const GammaConstants& gammas);

}  // namespace pvedge
