#include "pvedge/density.hpp"

#include "pvedge/errors.hpp"
#include "pvedge/gaussian.hpp"
#include "pvedge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>

namespace pvedge {

namespace {

/// Kernel mass beyond this many bandwidths is dropped from the sums.
constexpr double kKernelReach = 8.0;

double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[hi] - s[lo]);
}

}  // namespace

SymbolRecord symbol_record(const SymbolCoefficients& s) {
    return {s.xi[0][0], s.h1_tilde, s.h2, s.h3_tilde, s.h4, s.h5};
}

double silverman_bandwidth(std::span<const double> values) {
    if (values.size() < 2) throw ContractViolation("silverman_bandwidth: need at least two values");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    if (s.front() == s.back()) return 0.0;
    const double n = static_cast<double>(s.size());
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
    return 0.9 * spread * std::pow(n, -0.2);
}

DensityModel::DensityModel(std::vector<SymbolRecord> records, double bandwidth, bool bandwidth_overridden,
                           std::uint64_t seed)
    : bandwidth_(bandwidth), overridden_(bandwidth_overridden), seed_(seed) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw ContractViolation("DensityModel: bandwidth must be positive");
    if (records.empty()) throw ContractViolation("DensityModel: empty sample");
    std::sort(records.begin(), records.end(),
              [](const SymbolRecord& a, const SymbolRecord& b) { return a.c_limit < b.c_limit; });

    const std::size_t n = records.size();
    c_.resize(n);
    w_.resize(n);
    std::array<std::vector<double>, 5> ratios;
    for (auto& r : ratios) r.resize(n);
    std::vector<double> coef_a(n), coef_b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const SymbolRecord& r = records[i];
        c_[i] = r.c_limit;
        w_[i] = {1.0, r.h2, r.h3_tilde, r.h1_tilde, r.h5, r.h4};
        const double c = r.c_limit;
        const double e1 = r.h1_tilde / std::sqrt(c);
        const double e2 = r.h2 / std::sqrt(c);
        const double e3 = r.h3_tilde / std::sqrt(c);
        const double e4 = r.h4 / std::pow(c, 2.5);
        const double e5 = r.h5 / std::pow(c, 1.5);
        ratios[0][i] = e1;
        ratios[1][i] = e2;
        ratios[2][i] = e3;
        ratios[3][i] = e4;
        ratios[4][i] = e5;
        coef_a[i] = e2 - 0.5 * e5 + 0.75 * e4 + e3 - 3.0 * e1;
        coef_b[i] = e1 - 0.5 * e3;
    }
    for (int k = 0; k < 5; ++k) {
        e_h_[k] = mean_se(ratios[k]);
        if (!std::isfinite(e_h_[k].mean)) throw DegenerateSample("DensityModel: non-finite symbol expectation");
    }
    coef_y_ = mean_se(coef_a);
    coef_y3_ = mean_se(coef_b);
    lo_ = c_.front() - kKernelReach * bandwidth_;
    hi_ = c_.back() + kKernelReach * bandwidth_;
}

DensityModel::Weights DensityModel::kernel_sums(double x) const {
    Weights out{};
    const double reach = kKernelReach * bandwidth_;
    const auto first = std::lower_bound(c_.begin(), c_.end(), x - reach);
    const auto last = std::upper_bound(first, c_.end(), x + reach);
    for (auto it = first; it != last; ++it) {
        const std::size_t i = static_cast<std::size_t>(it - c_.begin());
        const double u = (x - *it) / bandwidth_;
        const double k = std::exp(-0.5 * u * u);
        for (int j = 0; j < kWeightCount; ++j) out[j] += k * w_[i][j];
    }
    const double scale = 1.0 / (static_cast<double>(c_.size()) * bandwidth_ * std::sqrt(2.0 * std::numbers::pi));
    for (double& v : out) v *= scale;
    return out;
}

double DensityModel::conditional_mean(Weight w, double x) const {
    const Weights s = kernel_sums(x);
    if (s[kOne] <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return s[w] / s[kOne];
}

DensityModel fit_density_model(const SymbolSample& sample, const DensityFitOptions& options) {
    if (sample.size() < options.min_replications)
        throw ContractViolation("fit_density_model: need at least " + std::to_string(options.min_replications) +
                                " replications, got " + std::to_string(sample.size()));
    std::vector<double> c(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        c[i] = sample.records[i].c_limit;
        if (!(c[i] > 0.0) || !std::isfinite(c[i]))
            throw ContractViolation("fit_density_model: c_limit must be positive and finite");
    }
    if (options.bandwidth) return DensityModel(sample.records, *options.bandwidth, true, sample.seed);
    const double h = silverman_bandwidth(c);
    if (!(h > 0.0)) throw DegenerateSample("fit_density_model: bandwidth is zero (all c_limit equal)");
    return DensityModel(sample.records, h, false, sample.seed);
}

double gaussian_z_derivative(int r, double z, double x) {
    const double s = std::sqrt(x);
    const double y = z / s;
    const double phi = normal_pdf(y) / s;
    const double sign = (r % 2 == 0) ? 1.0 : -1.0;
    return sign * std::pow(s, -r) * hermite(r, y) * phi;
}

namespace {

struct KernelStencil {
    DensityModel::Weights k0{}, kp{}, km{};
    double step = 0;
    bool inside = false;
};

KernelStencil kernel_stencil(const DensityModel& model, double x) {
    KernelStencil st;
    st.step = model.bandwidth() / 4.0;
    if (x <= 0.0) return st;
    st.k0 = model.kernel_sums(x);
    if (x - st.step <= 0.0 || x < model.support_lo() || x > model.support_hi()) return st;
    st.kp = model.kernel_sums(x + st.step);
    st.km = model.kernel_sums(x - st.step);
    st.inside = true;
    return st;
}

JointDensityValue joint_from_stencil(const KernelStencil& st, double dn, double z, double x) {
    JointDensityValue out;
    if (x <= 0.0) {
        out.outside_support = true;
        return out;
    }
    using W = DensityModel::Weight;
    const auto& k0 = st.k0;
    out.leading = gaussian_z_derivative(0, z, x) * k0[W::kOne];
    out.total = out.leading;
    if (!st.inside) {
        out.outside_support = true;
        return out;
    }
    const double step = st.step;
    auto d1 = [&](W w) { return (st.kp[w] - st.km[w]) / (2.0 * step); };
    auto d2 = [&](W w) { return (st.kp[w] - 2.0 * k0[w] + st.km[w]) / (step * step); };
    std::array<double, 6> psi{};
    for (int r = 0; r < 6; ++r) psi[r] = gaussian_z_derivative(r, z, x);

    // (-d_z)^m (-d_x)^n [c phi_x(z) kappa(x)] with d_x phi = (1/2) d_z^2 phi.
    out.terms[0] = -psi[1] * k0[W::kH2];
    out.terms[1] = -z * (psi[0] * d1(W::kH3Tilde) + 0.5 * psi[2] * k0[W::kH3Tilde]);
    out.terms[2] = (z * psi[2] + 2.0 * psi[1]) * k0[W::kH1Tilde];
    out.terms[3] = psi[1] * d1(W::kH5) + 0.5 * psi[3] * k0[W::kH5];
    out.terms[4] = -0.5 * psi[3] * k0[W::kH5];
    out.terms[5] = -(psi[1] * d2(W::kH4) + psi[3] * d1(W::kH4) + 0.25 * psi[5] * k0[W::kH4]);
    out.terms[6] = psi[3] * d1(W::kH4) + 0.5 * psi[5] * k0[W::kH4];
    out.terms[7] = -0.25 * psi[5] * k0[W::kH4];

    double corr = 0.0;
    for (double t : out.terms) corr += t;
    out.total = out.leading + std::sqrt(dn) * corr;
    return out;
}

}  // namespace

JointDensityValue joint_density(const DensityModel& model, double dn, double z, double x) {
    if (dn < 0.0) throw ContractViolation("joint_density: dn must be nonnegative");
    return joint_from_stencil(kernel_stencil(model, x), dn, z, x);
}

double BivariatePolynomial::operator()(double a, double b) const {
    double s = 0.0;
    for (const Term& t : terms) s += t.coef * std::pow(a, t.pow_a) * std::pow(b, t.pow_b);
    return s;
}

BivariatePolynomial q_polynomial(int beta, int v) {
    if (beta < 0 || beta > 2 || v < 0 || v > beta)
        throw ContractViolation("q_polynomial: indices out of range");
    switch (beta * 3 + v) {
        case 0: return {{{1.0, 0, 0}}};
        case 3: return {};
        case 4: return {{{-0.5, 1, 2}}};
        case 6: return {};
        case 7: return {{{0.75, 1, 4}}};
        default: return {{{0.25, 2, 4}}};
    }
}

double studentized_density(double coef_y, double coef_y3, double dn, double y) {
    return normal_pdf(y) * (1.0 + std::sqrt(dn) * (coef_y * y + coef_y3 * y * y * y));
}

double studentized_density(const DensityModel& model, double dn, double y) {
    return studentized_density(model.coef_y().mean, model.coef_y3().mean, dn, y);
}

double corrected_cdf(double coef_y, double coef_y3, double dn, double y) {
    return normal_cdf(y) - std::sqrt(dn) * normal_pdf(y) * (coef_y + coef_y3 * (y * y + 2.0));
}

double corrected_cdf(const DensityModel& model, double dn, double y) {
    return corrected_cdf(model.coef_y().mean, model.coef_y3().mean, dn, y);
}

SignChanges density_sign_changes(double coef_y, double coef_y3, double dn) {
    // Real roots of 1 + s A y + s B y^3 with s = sqrt(dn).
    SignChanges out;
    const double s = std::sqrt(dn);
    const double a = s * coef_y, b = s * coef_y3;
    std::vector<double> roots;
    if (b == 0.0) {
        if (a != 0.0) roots.push_back(-1.0 / a);
    } else {
        // Depressed cubic y^3 + P y + Q = 0.
        const double P = a / b, Q = 1.0 / b;
        const double disc = Q * Q / 4.0 + P * P * P / 27.0;
        if (disc >= 0.0) {
            const double r = std::sqrt(disc);
            roots.push_back(std::cbrt(-Q / 2.0 + r) + std::cbrt(-Q / 2.0 - r));
        } else {
            const double m = 2.0 * std::sqrt(-P / 3.0);
            const double theta = std::acos(3.0 * Q / (P * m)) / 3.0;
            for (int k = 0; k < 3; ++k) roots.push_back(m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0));
        }
    }
    if (roots.empty()) return out;
    out.any = true;
    out.leftmost = *std::min_element(roots.begin(), roots.end());
    out.rightmost = *std::max_element(roots.begin(), roots.end());
    return out;
}

void write_joint_grid_csv(std::ostream& out, const DensityModel& model, double dn,
                          std::span<const double> z_grid, std::span<const double> x_grid) {
    out << "z,x,leading,t1,t2,t3,t4,t5,t6,t7,t8,total,outside_support\n";
    out << std::setprecision(17);
    if (dn < 0.0) throw ContractViolation("joint_density: dn must be nonnegative");
    for (double x : x_grid) {
        const KernelStencil st = kernel_stencil(model, x);
        for (double z : z_grid) {
            const JointDensityValue v = joint_from_stencil(st, dn, z, x);
            out << z << ',' << x << ',' << v.leading;
            for (double t : v.terms) out << ',' << t;
            out << ',' << v.total << ',' << (v.outside_support ? 1 : 0) << '\n';
        }
    }
}

void write_studentized_grid_csv(std::ostream& out, const DensityModel& model, double dn,
                                std::span<const double> y_grid) {
    out << "y,normal,coef_y,coef_y3,density,cdf\n";
    out << std::setprecision(17);
    const double a = model.coef_y().mean, b = model.coef_y3().mean;
    for (double y : y_grid) {
        out << y << ',' << normal_pdf(y) << ',' << a << ',' << b << ',' << studentized_density(a, b, dn, y)
            << ',' << corrected_cdf(a, b, dn, y) << '\n';
    }
}

}  // namespace pvedge
