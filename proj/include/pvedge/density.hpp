#pragma once

#include "pvedge/parallel.hpp"
#include "pvedge/symbols.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace pvedge {

/// Per-path limit variance and symbol coefficients used by the density estimators.
struct SymbolRecord {
    double c_limit = 0;
    double h1_tilde = 0, h2 = 0, h3_tilde = 0, h4 = 0, h5 = 0;
};

/// C = xi(0,0) together with the symbol coefficients of one path.
SymbolRecord symbol_record(const SymbolCoefficients& s);

/// Independent replications; every c_limit must be positive.
struct SymbolSample {
    std::vector<SymbolRecord> records;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return records.size(); }
};

struct DensityFitOptions {
    /// Kernel bandwidth; the Silverman rule is used when unset.
    std::optional<double> bandwidth;
    /// Smallest admissible sample size.
    std::size_t min_replications = 1000;
};

/// Kernel estimators for p^C and the conditional symbol means, and plug-in
/// averages for the studentized expansion.
class DensityModel {
public:
    /// Index of the conditional weights kept for each record.
    enum Weight { kOne = 0, kH2, kH3Tilde, kH1Tilde, kH5, kH4, kWeightCount };
    using Weights = std::array<double, kWeightCount>;

    DensityModel(std::vector<SymbolRecord> records, double bandwidth, bool bandwidth_overridden,
                 std::uint64_t seed);

    double bandwidth() const noexcept { return bandwidth_; }
    bool bandwidth_overridden() const noexcept { return overridden_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t size() const noexcept { return c_.size(); }

    /// Interval outside of which the kernel sums are treated as zero.
    double support_lo() const noexcept { return lo_; }
    double support_hi() const noexcept { return hi_; }

    /// (1 / (R h)) sum_r phi((x - C_r) / h) w_r for every weight: entry kOne is
    /// the density of C and the others are E[w | C = x] p^C(x).
    Weights kernel_sums(double x) const;

    double density_c(double x) const { return kernel_sums(x)[kOne]; }
    /// Nadaraya-Watson estimate of E[w | C = x]; NaN where p^C(x) = 0.
    double conditional_mean(Weight w, double x) const;

    /// E[H1~ C^{-1/2}], E[H2 C^{-1/2}], E[H3~ C^{-1/2}], E[H4 C^{-5/2}], E[H5 C^{-3/2}].
    const MeanSe& e_h1() const noexcept { return e_h_[0]; }
    const MeanSe& e_h2() const noexcept { return e_h_[1]; }
    const MeanSe& e_h3() const noexcept { return e_h_[2]; }
    const MeanSe& e_h4() const noexcept { return e_h_[3]; }
    const MeanSe& e_h5() const noexcept { return e_h_[4]; }

    /// Coefficients A, B of y and y^3 in the studentized correction, with
    /// standard errors from the per-record values.
    const MeanSe& coef_y() const noexcept { return coef_y_; }
    const MeanSe& coef_y3() const noexcept { return coef_y3_; }

private:
    std::vector<double> c_;
    std::vector<Weights> w_;
    double bandwidth_;
    bool overridden_;
    std::uint64_t seed_;
    double lo_ = 0, hi_ = 0;
    std::array<MeanSe, 5> e_h_{};
    MeanSe coef_y_{}, coef_y3_{};
};

/// 0.9 min(sd, IQR / 1.34) R^{-1/5}.
double silverman_bandwidth(std::span<const double> values);

/// Throws ContractViolation for too few records or a nonpositive c_limit, and
/// DegenerateSample when the Silverman bandwidth is zero and no override is given.
DensityModel fit_density_model(const SymbolSample& sample, const DensityFitOptions& options = {});

/// Value of the joint density approximation with its parts.
struct JointDensityValue {
    double leading = 0;
    std::array<double, 8> terms{};
    double total = 0;
    bool outside_support = false;
};

/// Leading term plus sqrt(dn) times the eight correction terms. Derivatives in
/// z are exact through Hermite polynomials; derivatives in x are central
/// differences of the kernel sums with step bandwidth / 4. Outside the kernel
/// support, or for x not above one step, only the leading term is returned and
/// the flag is set.
JointDensityValue joint_density(const DensityModel& model, double dn, double z, double x);

/// d^r/dz^r of the N(0, x) density at z.
double gaussian_z_derivative(int r, double z, double x);

/// Polynomial sum_k coef_k a^{i_k} b^{j_k}.
struct BivariatePolynomial {
    struct Term {
        double coef;
        int pow_a, pow_b;
    };
    std::vector<Term> terms;

    double operator()(double a, double b) const;
};

/// Polynomials with d_x^beta g(z / sqrt(x)) = sum_v q_{beta,v}(z / sqrt(x), x^{-1/2}) g^(v)(z / sqrt(x)).
/// Throws ContractViolation unless 0 <= v <= beta <= 2.
BivariatePolynomial q_polynomial(int beta, int v);

/// phi(y) (1 + sqrt(dn) (A y + B y^3)).
double studentized_density(const DensityModel& model, double dn, double y);
double studentized_density(double coef_y, double coef_y3, double dn, double y);

/// Phi(y) - sqrt(dn) phi(y) (A + B (y^2 + 2)), the antiderivative of the density.
double corrected_cdf(const DensityModel& model, double dn, double y);
double corrected_cdf(double coef_y, double coef_y3, double dn, double y);

/// Leftmost and rightmost points where the studentized density changes sign.
struct SignChanges {
    bool any = false;
    double leftmost = 0, rightmost = 0;
};
SignChanges density_sign_changes(double coef_y, double coef_y3, double dn);

/// CSV with columns z,x,leading,t1..t8,total,outside_support.
void write_joint_grid_csv(std::ostream& out, const DensityModel& model, double dn,
                          std::span<const double> z_grid, std::span<const double> x_grid);

/// CSV with columns y,normal,coef_y,coef_y3,density,cdf.
void write_studentized_grid_csv(std::ostream& out, const DensityModel& model, double dn,
                                std::span<const double> y_grid);

}  // namespace pvedge
