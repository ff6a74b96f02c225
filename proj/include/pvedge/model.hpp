#pragma once

#include <functional>
#include <span>
#include <string>

namespace pvedge {

/// Values of b1, b2 and their derivatives at one state.
struct CoefficientJet {
    double b1 = 0, d1_b1 = 0, d2_b1 = 0, d3_b1 = 0, d4_b1 = 0;
    double b2 = 0, d1_b2 = 0, d2_b2 = 0;
};

/// Ito coefficients of b1(X), b2(X) and b11(X), in the argument order
/// (x1..x6) used by the g-functions.
struct DerivedCoefficients {
    double b2 = 0, b1 = 0, b21 = 0, b12 = 0, b11 = 0, b111 = 0;
};

DerivedCoefficients derive(const CoefficientJet& j) noexcept;

/// One-dimensional diffusion dX = b1(X) dW + b2(X) dt with a declared
/// evaluation domain and a positive lower bound for |b1| on it.
class DiffusionModel {
public:
    using JetFn = std::function<CoefficientJet(double)>;

    DiffusionModel(std::string name, JetFn jet, double x0, double b1_floor, double domain_lo,
                   double domain_hi);

    /// b1 = 1, b2 = 0, x0 = 0.
    static DiffusionModel brownian();
    /// b1 = 1, b2 = 1, x0 = 0.
    static DiffusionModel brownian_drift();
    /// b1 = 1 + 0.25 tanh(x), b2 = -0.5 x, x0 = 0.3.
    static DiffusionModel tanh_vol();
    /// b1 = sigma, b2 = drift, x0 given.
    static DiffusionModel constant(double sigma, double drift = 0.0, double x0 = 0.0);
    /// Coefficients parsed from expressions in x, derivatives taken symbolically.
    /// A nonpositive floor is replaced by half the smallest |b1| seen on a
    /// 4001-point scan of the domain.
    static DiffusionModel custom(const std::string& b1, const std::string& b2, double x0,
                                 double b1_floor, double domain_lo, double domain_hi);
    /// Default domain [x0 - 10, x0 + 10].
    static DiffusionModel custom(const std::string& b1, const std::string& b2, double x0 = 0.0);

    /// Jet at x; throws DomainError if |b1(x)| is below the floor.
    CoefficientJet jet(double x) const;
    /// Jet at x without the floor assertion (finite-difference checks).
    CoefficientJet raw_jet(double x) const { return jet_(x); }

    const std::string& name() const noexcept { return name_; }
    double x0() const noexcept { return x0_; }
    double b1_floor() const noexcept { return floor_; }
    double domain_lo() const noexcept { return lo_; }
    double domain_hi() const noexcept { return hi_; }
    bool in_domain(double x) const noexcept { return x >= lo_ && x <= hi_; }
    /// Whether some derivative of b1 of order 1..4 is nonzero at x0.
    bool b1_varies_at_x0() const;

private:
    std::string name_;
    JetFn jet_;
    double x0_, floor_, lo_, hi_;
};

/// Outcome of comparing supplied derivatives against central differences.
struct DerivativeCheck {
    bool ok = true;
    double worst_error = 0.0;  ///< |fd - supplied| / max(1, |supplied|)
    double worst_x = 0.0;
    std::string worst_name;
};

/// Compares d1..d4 of b1 and d1, d2 of b2 with Richardson-extrapolated
/// central differences of the next lower order at each grid point.
DerivativeCheck validate_derivatives(const DiffusionModel& model, std::span<const double> grid,
                                     double tolerance = 1e-5);

}  // namespace pvedge
