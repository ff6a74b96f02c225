#include "pvedge/density.hpp"
#include "pvedge/errors.hpp"
#include "pvedge/gaussian.hpp"
#include "pvedge/model.hpp"
#include "pvedge/path.hpp"
#include "pvedge/rng.hpp"
#include "pvedge/symbols.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

using namespace pvedge;

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

double integrate(const std::function<double(double)>& f, double a, double b) {
    return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

// Sum of fixed Gauss-Legendre panels; smooth integrands only.
double panels(const std::function<double(double)>& f, double a, double b, int count) {
    const double w = (b - a) / count;
    double s = 0.0;
    for (int i = 0; i < count; ++i) s += gauss<double, 20>::integrate(f, a + i * w, a + (i + 1) * w);
    return s;
}

double normal_density(double z, double var) {
    return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

SymbolSample constant_sample(double c0, std::size_t n, const SymbolRecord& proto) {
    SymbolSample s;
    SymbolRecord r = proto;
    r.c_limit = c0;
    s.records.assign(n, r);
    return s;
}

SymbolSample lognormal_sample(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    SymbolSample s;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = std::exp(0.3 * nd(gen));
        s.records.push_back({c, 0.5 * c, -0.2 + c, 1.0 / c, 0.1 * c * c, -0.4});
    }
    return s;
}

const SymbolRecord kProto{0.0, 0.3, -0.4, 1.1, 0.25, -0.6};

}  // namespace

TEST(FitDensityModel, ConstantSampleGivesExactRatios) {
    const double c0 = 1.7;
    DensityFitOptions opt;
    opt.bandwidth = 0.05;
    const DensityModel m = fit_density_model(constant_sample(c0, 1000, kProto), opt);
    const double e1 = 0.3 / std::sqrt(c0), e2 = -0.4 / std::sqrt(c0), e3 = 1.1 / std::sqrt(c0);
    const double e4 = 0.25 / std::pow(c0, 2.5), e5 = -0.6 / std::pow(c0, 1.5);
    EXPECT_NEAR(m.e_h1().mean, e1, 1e-14);
    EXPECT_NEAR(m.e_h2().mean, e2, 1e-14);
    EXPECT_NEAR(m.e_h3().mean, e3, 1e-14);
    EXPECT_NEAR(m.e_h4().mean, e4, 1e-14);
    EXPECT_NEAR(m.e_h5().mean, e5, 1e-14);
    EXPECT_NEAR(m.e_h1().se, 0.0, 1e-15);
    EXPECT_NEAR(m.coef_y().mean, e2 - 0.5 * e5 + 0.75 * e4 + e3 - 3.0 * e1, 1e-13);
    EXPECT_NEAR(m.coef_y3().mean, e1 - 0.5 * e3, 1e-13);
    EXPECT_TRUE(m.bandwidth_overridden());
    EXPECT_EQ(m.bandwidth(), 0.05);
    EXPECT_NEAR(m.support_lo(), c0 - 0.4, 1e-14);
    EXPECT_NEAR(m.support_hi(), c0 + 0.4, 1e-14);
}

TEST(FitDensityModel, ConstantSampleWithoutBandwidthIsDegenerate) {
    EXPECT_THROW(fit_density_model(constant_sample(1.7, 1000, kProto)), DegenerateSample);
}

TEST(FitDensityModel, RejectsSmallOrInvalidSamples) {
    DensityFitOptions opt;
    opt.bandwidth = 0.1;
    EXPECT_THROW(fit_density_model(constant_sample(1.0, 999, kProto), opt), ContractViolation);
    SymbolSample s = lognormal_sample(1000, 1);
    s.records[17].c_limit = 0.0;
    EXPECT_THROW(fit_density_model(s, opt), ContractViolation);
    s.records[17].c_limit = std::nan("");
    EXPECT_THROW(fit_density_model(s, opt), ContractViolation);
    opt.bandwidth = 0.0;
    EXPECT_THROW(fit_density_model(lognormal_sample(1000, 1), opt), ContractViolation);
    EXPECT_THROW(DensityModel(std::vector<SymbolRecord>{SymbolRecord{1.0}}, -1.0, true, 0), ContractViolation);
}

TEST(FitDensityModel, UsesSilvermanBandwidthByDefault) {
    const SymbolSample s = lognormal_sample(2000, 4);
    std::vector<double> c;
    for (const auto& r : s.records) c.push_back(r.c_limit);
    const DensityModel m = fit_density_model(s);
    EXPECT_EQ(m.bandwidth(), silverman_bandwidth(c));
    EXPECT_FALSE(m.bandwidth_overridden());
    EXPECT_EQ(m.size(), 2000u);
}

TEST(SilvermanBandwidth, Examples) {
    const std::vector<double> v{0, 1, 2, 3, 4};
    // sd = sqrt(2.5) exceeds IQR / 1.34 = 2 / 1.34.
    EXPECT_NEAR(silverman_bandwidth(v), 0.9 * (2.0 / 1.34) * std::pow(5.0, -0.2), 1e-15);
    EXPECT_NEAR(silverman_bandwidth(v), 0.97358, 1e-5);
    const std::vector<double> same{3, 3, 3, 3};
    EXPECT_EQ(silverman_bandwidth(same), 0.0);
    // Zero IQR falls back to the standard deviation.
    const std::vector<double> spike{0, 0, 0, 0, 0, 0, 0, 8};
    EXPECT_NEAR(silverman_bandwidth(spike), 0.9 * std::sqrt(8.0) * std::pow(8.0, -0.2), 1e-14);
    const std::vector<double> one{1};
    EXPECT_THROW(silverman_bandwidth(one), ContractViolation);
}

TEST(KernelSums, DensityIntegratesToOne) {
    const DensityModel m = fit_density_model(lognormal_sample(3000, 2));
    const double total = integrate([&](double x) { return m.density_c(x); }, m.support_lo(), m.support_hi());
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_EQ(m.density_c(m.support_hi() + 1.0), 0.0);
}

TEST(KernelSums, MatchesDirectGaussianSum) {
    const SymbolSample s = lognormal_sample(1000, 3);
    DensityFitOptions opt;
    opt.bandwidth = 0.07;
    const DensityModel m = fit_density_model(s, opt);
    for (double x : {0.6, 1.0, 1.3}) {
        DensityModel::Weights direct{};
        for (const auto& r : s.records) {
            const double k = normal_density((x - r.c_limit) / 0.07, 1.0) / 0.07 / 1000.0;
            const double w[] = {1.0, r.h2, r.h3_tilde, r.h1_tilde, r.h5, r.h4};
            for (int j = 0; j < DensityModel::kWeightCount; ++j) direct[j] += k * w[j];
        }
        const auto got = m.kernel_sums(x);
        for (int j = 0; j < DensityModel::kWeightCount; ++j)
            EXPECT_NEAR(got[j], direct[j], 1e-12 * (1.0 + std::abs(direct[j])));
    }
}

TEST(KernelSums, ConditionalMeanRecoversDeterministicWeights) {
    // h1~ = 0.5 c exactly, so the smoothed conditional mean is 0.5 x up to O(h^2) bias.
    const DensityModel m = fit_density_model(lognormal_sample(5000, 5));
    for (double x : {0.8, 1.0, 1.2}) {
        const double got = m.conditional_mean(DensityModel::kH1Tilde, x);
        EXPECT_NEAR(got, 0.5 * x, 0.02);
        EXPECT_NEAR(m.conditional_mean(DensityModel::kH5, x), -0.4, 1e-12);
    }
    EXPECT_TRUE(std::isnan(m.conditional_mean(DensityModel::kH5, 50.0)));
}

TEST(FitDensityModel, BrownianSampleHasZeroAnticipativeExpectations) {
    const GammaConstants exact{16.0 / 3, 8.0 / 3, 32.0 / 3, 8.0 / 3};
    SymbolSample s;
    for (int r = 0; r < 1000; ++r)
        s.records.push_back(symbol_record(
            compute_symbols(simulate_path(DiffusionModel::brownian(), 16, 8, substream_seed(3, r)), 2.0, exact)));
    DensityFitOptions opt;
    opt.bandwidth = 0.1;
    const DensityModel m = fit_density_model(s, opt);
    EXPECT_NEAR(m.e_h2().mean, 0.0, 1e-12);
    EXPECT_NEAR(m.e_h4().mean, 0.0, 1e-12);
    EXPECT_NEAR(m.e_h5().mean, 0.0, 1e-12);
}

// i.i.d. reduction: for Brownian motion with p = 2 the statistic is a studentized
// mean of chi-square(1) - 1 variables with skewness 2 sqrt(2). The classical
// Edgeworth density of a studentized mean is phi(y)(1 + n^{-1/2} (g/6)(3y - 2y^3)).
TEST(StudentizedDensity, BrownianCaseMatchesClassicalEdgeworth) {
    const GammaConstants exact{16.0 / 3, 8.0 / 3, 32.0 / 3, 8.0 / 3};
    SymbolSample s;
    for (int r = 0; r < 1000; ++r)
        s.records.push_back(symbol_record(
            compute_symbols(simulate_path(DiffusionModel::brownian(), 16, 8, substream_seed(4, r)), 2.0, exact)));
    DensityFitOptions opt;
    opt.bandwidth = 0.1;
    const DensityModel m = fit_density_model(s, opt);
    const double skew = 2.0 * std::sqrt(2.0);
    EXPECT_NEAR(m.coef_y().mean, skew / 6.0 * 3.0, 1e-12);
    EXPECT_NEAR(m.coef_y3().mean, -skew / 6.0 * 2.0, 1e-12);
}

TEST(FitDensityModel, TanhVolExpectationsStableUnderDoubling) {
    const GammaConstants exact{16.0 / 3, 8.0 / 3, 32.0 / 3, 8.0 / 3};
    const std::size_t r = 10000;
    std::vector<SymbolRecord> all;
    for (std::size_t i = 0; i < 2 * r; ++i)
        all.push_back(symbol_record(
            compute_symbols(simulate_path(DiffusionModel::tanh_vol(), 64, 8, substream_seed(6, i)), 2.0, exact)));
    SymbolSample a, b, both;
    a.records.assign(all.begin(), all.begin() + r);
    b.records.assign(all.begin() + r, all.end());
    both.records = all;
    const DensityModel ma = fit_density_model(a), mb = fit_density_model(b), m2 = fit_density_model(both);
    auto check = [&](auto get) {
        const MeanSe ea = get(ma), eb = get(mb), e2 = get(m2);
        // The 2R mean minus the R mean is half the difference of independent halves.
        const double se = 0.5 * std::sqrt(ea.se * ea.se + eb.se * eb.se);
        EXPECT_LE(std::abs(e2.mean - ea.mean), 3.0 * se + 1e-15);
    };
    check([](const DensityModel& m) { return m.e_h1(); });
    check([](const DensityModel& m) { return m.e_h2(); });
    check([](const DensityModel& m) { return m.e_h3(); });
    check([](const DensityModel& m) { return m.e_h4(); });
    check([](const DensityModel& m) { return m.e_h5(); });
}

TEST(GaussianZDerivative, ZerothOrderIsTheDensity) {
    for (double x : {0.3, 1.0, 2.5})
        for (double z : {-1.7, 0.0, 0.4}) EXPECT_NEAR(gaussian_z_derivative(0, z, x), normal_density(z, x), 1e-15);
}

TEST(GaussianZDerivative, EachOrderIsTheDerivativeOfThePrevious) {
    const double e = 1e-5;
    for (int r = 1; r <= 5; ++r)
        for (double x : {0.5, 1.7})
            for (double z : {-1.3, 0.2, 2.1}) {
                const double fd =
                    (gaussian_z_derivative(r - 1, z + e, x) - gaussian_z_derivative(r - 1, z - e, x)) / (2.0 * e);
                EXPECT_NEAR(gaussian_z_derivative(r, z, x), fd, 1e-7 * std::pow(x, -0.5 * r - 0.5));
            }
}

TEST(GaussianZDerivative, SatisfiesHeatEquation) {
    const double e = 1e-5;
    for (double x : {0.5, 1.7})
        for (double z : {-1.3, 0.2, 2.1}) {
            const double dx = (normal_density(z, x + e) - normal_density(z, x - e)) / (2.0 * e);
            EXPECT_NEAR(dx, 0.5 * gaussian_z_derivative(2, z, x), 1e-8);
        }
}

TEST(JointDensity, LeadingTermIntegratesToDensityOfC) {
    const DensityModel m = fit_density_model(lognormal_sample(2000, 7));
    for (double x : {0.7, 1.0, 1.4}) {
        const double s = std::sqrt(x);
        const double total = integrate([&](double z) { return joint_density(m, 0.0, z, x).total; }, -20 * s, 20 * s);
        EXPECT_NEAR(total, m.density_c(x), 1e-6);
    }
}

TEST(JointDensity, ZeroStepReturnsLeadingTerm) {
    const DensityModel m = fit_density_model(lognormal_sample(2000, 7));
    const JointDensityValue v = joint_density(m, 0.0, 0.3, 1.1);
    EXPECT_FALSE(v.outside_support);
    EXPECT_EQ(v.total, v.leading);
    EXPECT_NEAR(v.leading, normal_density(0.3, 1.1) * m.density_c(1.1), 1e-15);
}

TEST(JointDensity, TotalDerivativeTermsIntegrateToZeroInZ) {
    const DensityModel m = fit_density_model(lognormal_sample(2000, 8));
    for (double x : {0.8, 1.2}) {
        const double s = std::sqrt(x);
        // Every term except t2 carries at least one z-derivative.
        for (int j : {0, 2, 3, 4, 5, 6, 7}) {
            const double total = panels([&](double z) { return joint_density(m, 0.01, z, x).terms[j]; }, -20 * s,
                                        20 * s, 40);
            const double scale =
                panels([&](double z) { return std::abs(joint_density(m, 0.01, z, x).terms[j]); }, -20 * s, 20 * s, 40);
            EXPECT_LE(std::abs(total), 1e-10 * std::max(scale, 1e-300)) << "term " << j + 1;
        }
        // t2 is odd in z.
        const double t2 = panels([&](double z) { return joint_density(m, 0.01, z, x).terms[1]; }, -20 * s, 20 * s, 40);
        EXPECT_NEAR(t2, 0.0, 1e-10);
    }
}

TEST(JointDensity, ConstantCDoubleIntegralIsOne) {
    const double c0 = 1.7;
    DensityFitOptions opt;
    opt.bandwidth = 0.05;
    const DensityModel m = fit_density_model(constant_sample(c0, 1000, kProto), opt);
    const double dn = 0.01;
    auto inner = [&](double x) {
        const double s = std::sqrt(x);
        return panels([&](double z) { return joint_density(m, dn, z, x).total; }, -20 * s, 20 * s, 20);
    };
    const double total = panels(inner, m.support_lo(), m.support_hi(), 32);
    EXPECT_NEAR(total, 1.0, 1e-3);
}

// Independent oracle for the eight terms on a two-point sample: z-derivatives by
// nested central differences of c(z) phi(z; 0, x) and x-derivatives by the
// prescribed bandwidth/4 central stencil applied to the whole product.
TEST(JointDensity, TermsMatchFiniteDifferenceOracle) {
    const double h = 0.2, c_a = 1.5, c_b = 2.0;
    SymbolSample s;
    for (int i = 0; i < 1000; ++i) {
        const bool first = i % 2 == 0;
        s.records.push_back(first ? SymbolRecord{c_a, 0.3, -0.4, 1.1, 0.25, -0.6}
                                  : SymbolRecord{c_b, -0.2, 0.7, 0.5, -0.15, 0.9});
    }
    DensityFitOptions opt;
    opt.bandwidth = h;
    const DensityModel m = fit_density_model(s, opt);

    // Smoothed weight sums written out directly.
    enum { H1, H2, H3, H4, H5 };
    const double wa[] = {0.3, -0.4, 1.1, 0.25, -0.6}, wb[] = {-0.2, 0.7, 0.5, -0.15, 0.9};
    auto kappa = [&](int j, double x) {
        return 0.5 * (wa[j] * normal_density((x - c_a) / h, 1.0) + wb[j] * normal_density((x - c_b) / h, 1.0)) / h;
    };
    const double step = h / 4;
    // (-d_x)^n by the central stencil.
    auto dx = [&](const std::function<double(double)>& f, int n, double x) {
        if (n == 0) return f(x);
        if (n == 1) return -(f(x + step) - f(x - step)) / (2 * step);
        return (f(x + step) - 2 * f(x) + f(x - step)) / (step * step);
    };
    // (-d_z)^m by nested central differences.
    std::function<double(const std::function<double(double)>&, int, double)> dz =
        [&](const std::function<double(double)>& f, int mm, double z) -> double {
        if (mm == 0) return f(z);
        const double e = 0.02;
        return -(dz(f, mm - 1, z + e) - dz(f, mm - 1, z - e)) / (2 * e);
    };
    struct Entry {
        int m, n, weight;
        bool times_z;
        double factor;
    };
    const Entry table[8] = {{1, 0, H2, false, 1.0},  {0, 1, H3, true, 1.0}, {2, 0, H1, true, 1.0},
                            {1, 1, H5, false, 1.0},  {3, 0, H5, false, 0.5}, {1, 2, H4, false, 1.0},
                            {3, 1, H4, false, 1.0},  {5, 0, H4, false, 0.25}};
    for (double x : {1.45, 1.75, 2.1})
        for (double z : {-1.1, 0.35, 1.9}) {
            const JointDensityValue v = joint_density(m, 0.04, z, x);
            ASSERT_FALSE(v.outside_support);
            double scale = 0.0;
            std::array<double, 8> oracle{};
            for (int j = 0; j < 8; ++j) {
                const Entry& t = table[j];
                auto in_z = [&](double zz) {
                    auto in_x = [&](double xx) { return normal_density(zz, xx) * kappa(t.weight, xx); };
                    return (t.times_z ? zz : 1.0) * t.factor * dx(in_x, t.n, x);
                };
                oracle[j] = dz(in_z, t.m, z);
                scale = std::max(scale, std::abs(oracle[j]));
            }
            double corr = 0.0;
            for (int j = 0; j < 8; ++j) {
                EXPECT_NEAR(v.terms[j], oracle[j], 5e-3 * scale) << "term " << j + 1 << " z " << z << " x " << x;
                corr += v.terms[j];
            }
            EXPECT_NEAR(v.total, v.leading + 0.2 * corr, 1e-14);
        }
}

TEST(JointDensity, OutsideSupportReturnsLeadingTermOnly) {
    DensityFitOptions opt;
    opt.bandwidth = 0.05;
    const DensityModel m = fit_density_model(constant_sample(1.0, 1000, kProto), opt);
    for (double x : {-0.5, 0.0, m.support_hi() + 0.01, m.support_lo() - 0.01}) {
        const JointDensityValue v = joint_density(m, 0.1, 0.3, x);
        EXPECT_TRUE(v.outside_support) << x;
        EXPECT_EQ(v.total, v.leading);
        for (double t : v.terms) EXPECT_EQ(t, 0.0);
    }
    EXPECT_FALSE(joint_density(m, 0.1, 0.3, 1.0).outside_support);
    // x above the support edge but not above one stencil step.
    DensityFitOptions wide;
    wide.bandwidth = 0.2;
    const DensityModel near_zero = fit_density_model(constant_sample(0.5, 1000, kProto), wide);
    EXPECT_TRUE(joint_density(near_zero, 0.1, 0.3, 0.04).outside_support);
    EXPECT_THROW(joint_density(m, -0.1, 0.3, 1.0), ContractViolation);
}

TEST(QPolynomial, TabulatedExamples) {
    EXPECT_EQ(q_polynomial(0, 0)(0.7, 1.3), 1.0);
    EXPECT_DOUBLE_EQ(q_polynomial(1, 1)(0.7, 1.3), -0.5 * 0.7 * 1.3 * 1.3);
    EXPECT_DOUBLE_EQ(q_polynomial(2, 2)(0.7, 1.3), 0.25 * 0.49 * std::pow(1.3, 4));
    EXPECT_DOUBLE_EQ(q_polynomial(2, 1)(0.7, 1.3), 0.75 * 0.7 * std::pow(1.3, 4));
    EXPECT_EQ(q_polynomial(1, 0)(0.7, 1.3), 0.0);
    EXPECT_EQ(q_polynomial(2, 0)(0.7, 1.3), 0.0);
}

TEST(QPolynomial, RejectsIndicesOutOfRange) {
    EXPECT_THROW(q_polynomial(3, 0), ContractViolation);
    EXPECT_THROW(q_polynomial(1, 2), ContractViolation);
    EXPECT_THROW(q_polynomial(-1, 0), ContractViolation);
    EXPECT_THROW(q_polynomial(0, -1), ContractViolation);
}

TEST(QPolynomial, MatchesFiniteDifferencesOfComposition) {
    struct TestFn {
        std::function<double(double)> g, g1, g2;
    };
    const std::vector<TestFn> fns{
        {[](double t) { return std::sin(t); }, [](double t) { return std::cos(t); },
         [](double t) { return -std::sin(t); }},
        {[](double t) { return t * t * t; }, [](double t) { return 3 * t * t; }, [](double t) { return 6 * t; }},
        {[](double t) { return std::exp(-t * t); }, [](double t) { return -2 * t * std::exp(-t * t); },
         [](double t) { return (4 * t * t - 2) * std::exp(-t * t); }},
    };
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> uz(-2.0, 2.0), ux(0.5, 3.0);
    for (int i = 0; i < 50; ++i) {
        const double z = uz(gen), x = ux(gen);
        const double a = z / std::sqrt(x), b = 1.0 / std::sqrt(x);
        for (const TestFn& f : fns) {
            auto comp = [&](double xx) { return f.g(z / std::sqrt(xx)); };
            const double e = 1e-3;
            const double fp = comp(x + e), fm = comp(x - e), fp2 = comp(x + 2 * e), fm2 = comp(x - 2 * e);
            const double d1 = (8 * (fp - fm) - (fp2 - fm2)) / (12 * e);
            const double d2 = (16 * (fp + fm) - (fp2 + fm2) - 30 * comp(x)) / (12 * e * e);
            const double derivs[] = {f.g(a), f.g1(a), f.g2(a)};
            const double want[] = {comp(x), d1, d2};
            for (int beta = 0; beta <= 2; ++beta) {
                double got = 0.0;
                for (int v = 0; v <= beta; ++v) got += q_polynomial(beta, v)(a, b) * derivs[v];
                EXPECT_NEAR(got, want[beta], 1e-7) << "beta " << beta << " z " << z << " x " << x;
            }
        }
    }
}

TEST(StudentizedDensity, ReducesToNormal) {
    for (double y : {-2.0, 0.0, 0.7, 3.1}) {
        EXPECT_EQ(studentized_density(0.8, -0.3, 0.0, y), normal_pdf(y));
        EXPECT_EQ(studentized_density(0.0, 0.0, 0.05, y), normal_pdf(y));
        EXPECT_EQ(corrected_cdf(0.0, 0.0, 0.05, y), normal_cdf(y));
    }
}

TEST(StudentizedDensity, IntegratesToOneForEveryStep) {
    for (double dn : {0.0, 1.0 / 1024, 1.0 / 64, 0.25, 1.0}) {
        const double total = integrate([&](double y) { return studentized_density(1.3, -0.9, dn, y); }, -40.0, 40.0);
        EXPECT_NEAR(total, 1.0, 1e-8) << dn;
    }
}

TEST(StudentizedDensity, ModelOverloadUsesFittedCoefficients) {
    DensityFitOptions opt;
    opt.bandwidth = 0.05;
    const DensityModel m = fit_density_model(constant_sample(1.7, 1000, kProto), opt);
    EXPECT_EQ(studentized_density(m, 0.02, 0.9), studentized_density(m.coef_y().mean, m.coef_y3().mean, 0.02, 0.9));
    EXPECT_EQ(corrected_cdf(m, 0.02, 0.9), corrected_cdf(m.coef_y().mean, m.coef_y3().mean, 0.02, 0.9));
}

TEST(CorrectedCdf, IsTheAntiderivativeOfTheDensity) {
    const double a = 1.3, b = -0.9, dn = 1.0 / 64;
    for (double y : {-3.0, -0.5, 0.0, 1.2, 2.5}) {
        const double lower = integrate([&](double t) { return studentized_density(a, b, dn, t); }, -40.0, y);
        EXPECT_NEAR(corrected_cdf(a, b, dn, y), lower, 1e-10) << y;
    }
    EXPECT_NEAR(corrected_cdf(a, b, dn, -40.0), 0.0, 1e-15);
    EXPECT_NEAR(corrected_cdf(a, b, dn, 40.0), 1.0, 1e-15);
}

TEST(DensitySignChanges, Examples) {
    SignChanges s = density_sign_changes(0.0, -1.0, 1.0);
    ASSERT_TRUE(s.any);
    EXPECT_NEAR(s.leftmost, 1.0, 1e-14);
    EXPECT_NEAR(s.rightmost, 1.0, 1e-14);
    EXPECT_FALSE(density_sign_changes(0.0, 0.0, 0.5).any);
    EXPECT_FALSE(density_sign_changes(1.0, 1.0, 0.0).any);
    s = density_sign_changes(2.0, 0.0, 0.25);
    ASSERT_TRUE(s.any);
    EXPECT_NEAR(s.leftmost, -1.0, 1e-14);
}

TEST(DensitySignChanges, RootsAreZerosOfTheCorrectionFactor) {
    for (const auto& [a, b, dn] : std::vector<std::tuple<double, double, double>>{
             {-3.0, 1.0, 1.0}, {1.3, -0.9, 0.0625}, {0.5, 0.2, 0.01}, {-0.4, -0.3, 0.2}}) {
        const SignChanges s = density_sign_changes(a, b, dn);
        ASSERT_TRUE(s.any);
        const double r = std::sqrt(dn);
        for (double y : {s.leftmost, s.rightmost}) {
            EXPECT_NEAR(1.0 + r * (a * y + b * y * y * y), 0.0, 1e-10);
            const double lo = studentized_density(a, b, dn, y - 1e-6), hi = studentized_density(a, b, dn, y + 1e-6);
            EXPECT_LT(lo * hi, 0.0);
        }
    }
}

TEST(DensityCsv, JointGridHeaderAndRows) {
    const DensityModel m = fit_density_model(lognormal_sample(1000, 9));
    const std::vector<double> zs{-1.0, 0.0, 1.0}, xs{0.8, 1.0};
    std::ostringstream out;
    write_joint_grid_csv(out, m, 0.01, zs, xs);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "z,x,leading,t1,t2,t3,t4,t5,t6,t7,t8,total,outside_support");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 12);
        ++rows;
    }
    EXPECT_EQ(rows, 6);
}

TEST(DensityCsv, StudentizedGridHeaderAndRows) {
    const DensityModel m = fit_density_model(lognormal_sample(1000, 9));
    const std::vector<double> ys{-2.0, -1.0, 0.0, 1.0, 2.0};
    std::ostringstream out;
    write_studentized_grid_csv(out, m, 0.01, ys);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "y,normal,coef_y,coef_y3,density,cdf");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 5);
}
