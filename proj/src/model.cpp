#include "pvedge/model.hpp"

#include "pvedge/errors.hpp"
#include "pvedge/expression.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace pvedge {

DerivedCoefficients derive(const CoefficientJet& j) noexcept {
    DerivedCoefficients d;
    d.b2 = j.b2;
    d.b1 = j.b1;
    d.b21 = j.d1_b2 * j.b1;
    d.b12 = j.d1_b1 * j.b2 + 0.5 * j.d2_b1 * j.b1 * j.b1;
    d.b11 = j.d1_b1 * j.b1;
    d.b111 = (j.d2_b1 * j.b1 + j.d1_b1 * j.d1_b1) * j.b1;
    return d;
}

DiffusionModel::DiffusionModel(std::string name, JetFn jet_fn, double x0, double b1_floor,
                               double domain_lo, double domain_hi)
    : name_(std::move(name)), jet_(std::move(jet_fn)), x0_(x0), floor_(b1_floor), lo_(domain_lo),
      hi_(domain_hi) {
    if (!std::isfinite(x0_)) throw ContractViolation("x0 must be finite");
    if (!(floor_ > 0.0)) throw ContractViolation("b1 floor must be positive");
    if (!(lo_ < hi_) || x0_ < lo_ || x0_ > hi_) throw ContractViolation("x0 must lie inside the domain");
    (void)jet(x0_);
}

CoefficientJet DiffusionModel::jet(double x) const {
    CoefficientJet j = jet_(x);
    if (!(std::abs(j.b1) >= floor_)) {
        throw DomainError("|b1(" + std::to_string(x) + ")| = " + std::to_string(std::abs(j.b1)) +
                          " is below the model floor " + std::to_string(floor_));
    }
    return j;
}

bool DiffusionModel::b1_varies_at_x0() const {
    const CoefficientJet j = jet_(x0_);
    return std::abs(j.d1_b1) + std::abs(j.d2_b1) + std::abs(j.d3_b1) + std::abs(j.d4_b1) > 0.0;
}

DiffusionModel DiffusionModel::brownian() { return constant(1.0, 0.0, 0.0); }

DiffusionModel DiffusionModel::brownian_drift() {
    DiffusionModel m = constant(1.0, 1.0, 0.0);
    m.name_ = "bm-drift";
    return m;
}

DiffusionModel DiffusionModel::constant(double sigma, double drift, double x0) {
    if (sigma == 0.0) throw ContractViolation("constant diffusion coefficient must be nonzero");
    CoefficientJet j;
    j.b1 = sigma;
    j.b2 = drift;
    const std::string name = (sigma == 1.0 && drift == 0.0) ? "bm" : "constant";
    return DiffusionModel(name, [j](double) { return j; }, x0, std::abs(sigma), x0 - 10.0, x0 + 10.0);
}

DiffusionModel DiffusionModel::tanh_vol() {
    auto jet = [](double x) {
        const double t = std::tanh(x);
        const double s2 = 1.0 - t * t;
        CoefficientJet j;
        j.b1 = 1.0 + 0.25 * t;
        j.d1_b1 = 0.25 * s2;
        j.d2_b1 = -0.5 * t * s2;
        j.d3_b1 = -0.5 * s2 * (1.0 - 3.0 * t * t);
        j.d4_b1 = t * s2 * (4.0 - 6.0 * t * t);
        j.b2 = -0.5 * x;
        j.d1_b2 = -0.5;
        j.d2_b2 = 0.0;
        return j;
    };
    const double x0 = 0.3;
    return DiffusionModel("tanh-vol", jet, x0, 0.75, x0 - 10.0, x0 + 10.0);
}

DiffusionModel DiffusionModel::custom(const std::string& b1, const std::string& b2, double x0) {
    return custom(b1, b2, x0, 0.0, x0 - 10.0, x0 + 10.0);
}

DiffusionModel DiffusionModel::custom(const std::string& b1, const std::string& b2, double x0,
                                      double b1_floor, double domain_lo, double domain_hi) {
    std::array<Expression, 5> e1{Expression::parse(b1), Expression::constant(0), Expression::constant(0),
                                 Expression::constant(0), Expression::constant(0)};
    for (int k = 1; k < 5; ++k) e1[k] = e1[k - 1].derivative();
    std::array<Expression, 3> e2{Expression::parse(b2), Expression::constant(0), Expression::constant(0)};
    for (int k = 1; k < 3; ++k) e2[k] = e2[k - 1].derivative();

    auto jet = [e1, e2](double x) {
        CoefficientJet j;
        j.b1 = e1[0](x);
        j.d1_b1 = e1[1](x);
        j.d2_b1 = e1[2](x);
        j.d3_b1 = e1[3](x);
        j.d4_b1 = e1[4](x);
        j.b2 = e2[0](x);
        j.d1_b2 = e2[1](x);
        j.d2_b2 = e2[2](x);
        return j;
    };
    if (!(domain_lo < domain_hi)) throw ConfigError("empty evaluation domain");
    if (b1_floor <= 0.0) {
        double lowest = std::numeric_limits<double>::infinity();
        constexpr int scan = 4000;
        for (int i = 0; i <= scan; ++i) {
            const double x = domain_lo + (domain_hi - domain_lo) * i / scan;
            lowest = std::min(lowest, std::abs(e1[0](x)));
        }
        if (!(lowest > 0.0) || !std::isfinite(lowest)) {
            throw ConfigError("b1 = " + b1 + " vanishes or is not finite on the evaluation domain");
        }
        b1_floor = 0.5 * lowest;
    }
    return DiffusionModel("custom", jet, x0, b1_floor, domain_lo, domain_hi);
}

namespace {

template <class F>
double richardson_derivative(F&& f, double x) {
    const double h = 1e-3 * std::max(1.0, std::abs(x));
    auto central = [&](double step) { return (f(x + step) - f(x - step)) / (2.0 * step); };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

}  // namespace

DerivativeCheck validate_derivatives(const DiffusionModel& model, std::span<const double> grid,
                                     double tolerance) {
    using Getter = double (*)(const CoefficientJet&);
    struct Pair {
        const char* name;
        Getter lower;
        Getter upper;
    };
    static const Pair pairs[] = {
        {"d1_b1", [](const CoefficientJet& j) { return j.b1; }, [](const CoefficientJet& j) { return j.d1_b1; }},
        {"d2_b1", [](const CoefficientJet& j) { return j.d1_b1; }, [](const CoefficientJet& j) { return j.d2_b1; }},
        {"d3_b1", [](const CoefficientJet& j) { return j.d2_b1; }, [](const CoefficientJet& j) { return j.d3_b1; }},
        {"d4_b1", [](const CoefficientJet& j) { return j.d3_b1; }, [](const CoefficientJet& j) { return j.d4_b1; }},
        {"d1_b2", [](const CoefficientJet& j) { return j.b2; }, [](const CoefficientJet& j) { return j.d1_b2; }},
        {"d2_b2", [](const CoefficientJet& j) { return j.d1_b2; }, [](const CoefficientJet& j) { return j.d2_b2; }},
    };
    DerivativeCheck out;
    for (double x : grid) {
        const CoefficientJet at = model.raw_jet(x);
        for (const Pair& pr : pairs) {
            const double fd = richardson_derivative([&](double u) { return pr.lower(model.raw_jet(u)); }, x);
            const double supplied = pr.upper(at);
            const double err = std::abs(fd - supplied) / std::max(1.0, std::abs(supplied));
            if (!(err <= out.worst_error)) {
                out.worst_error = err;
                out.worst_x = x;
                out.worst_name = pr.name;
            }
        }
    }
    out.ok = out.worst_error <= tolerance;
    return out;
}

}  // namespace pvedge
