#include "pvedge/statistics.hpp"

#include "pvedge/errors.hpp"
#include "pvedge/gaussian.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pvedge {

namespace {

double fine_trapezoid(const SimulatedPath& path, const std::function<double(const CoefficientJet&)>& g) {
    const std::size_t last = path.steps();
    double s = 0.5 * (g(path.coef[0]) + g(path.coef[last]));
    for (std::size_t k = 1; k < last; ++k) s += g(path.coef[k]);
    return s * path.fine_dt;
}

double rescaled_increment(const SimulatedPath& path, int i) {
    return (path.x[path.obs(i)] - path.x[path.obs(i - 1)]) * std::sqrt(static_cast<double>(path.n));
}

}  // namespace

double power_variation(const SimulatedPath& path, double p) {
    double s = 0.0;
    for (int i = 1; i <= path.n; ++i) s += abs_pow(rescaled_increment(path, i), p);
    return s * path.dn();
}

double limit_v(const SimulatedPath& path, double p) {
    const double m = abs_moment(p);
    return fine_trapezoid(path, [&](const CoefficientJet& j) { return m * abs_pow(j.b1, p); });
}

double limit_c(const SimulatedPath& path, double p) {
    const double m1 = abs_moment(p);
    const double var = abs_moment(2.0 * p) - m1 * m1;
    return fine_trapezoid(path, [&](const CoefficientJet& j) { return var * abs_pow(j.b1, 2.0 * p); });
}

double f_n_estimator(const SimulatedPath& path, double p) {
    if (path.n < 2) throw ContractViolation("f_n needs n >= 2");
    double s = 0.0;
    double a = abs_pow(rescaled_increment(path, 1), p);
    for (int i = 1; i <= path.n; ++i) {
        const double b = abs_pow(rescaled_increment(path, i + 1), p);
        s += a * a - a * b;
        a = b;
    }
    return s * path.dn();
}

double martingale_term(const SimulatedPath& path, double p) {
    const double m = abs_moment(p);
    const double root_n = std::sqrt(static_cast<double>(path.n));
    double s = 0.0;
    for (int i = 1; i <= path.n; ++i) {
        const double u = (path.w[path.obs(i)] - path.w[path.obs(i - 1)]) * root_n;
        s += abs_pow(path.coef[path.obs(i - 1)].b1, p) * (abs_pow(u, p) - m);
    }
    return s / root_n;
}

double studentize(double z_n, double f_n) {
    if (!(f_n > 0.0)) throw NonpositiveVariance("variance estimate " + std::to_string(f_n) + " is not positive");
    return z_n / std::sqrt(f_n);
}

ExpansionTerms expansion_terms(const SimulatedPath& path, double p) {
    if (path.refine < 8) throw ContractViolation("expansion terms need refinement K >= 8");
    if (p < 2.0) throw ContractViolation("the expansion pipeline needs p >= 2");

    ExpansionTerms t;
    t.n = path.n;
    t.p = p;
    t.power_warning = PowerSpec{p}.warning();
    t.v_n = power_variation(path, p);
    t.v_limit = limit_v(path, p);
    t.f_n = f_n_estimator(path, p);
    t.c_limit = limit_c(path, p);
    t.m_n = martingale_term(path, p);

    const double dn = path.dn();
    const double sq = std::sqrt(dn);
    const double h = path.fine_dt;
    const int K = path.refine;
    std::array<double, 5> acc{};
    for (int i = 1; i <= path.n; ++i) {
        const std::size_t j0 = path.obs(i - 1);
        const double w0 = path.w[j0];
        const DerivedCoefficients d = derive(path.coef[j0]);
        const double u = (path.w[j0 + K] - w0) / sq;
        const double alpha = d.b1 * u;
        const double h2 = u * u - 1.0;
        const double h3 = u * u * u - 3.0 * u;
        const double f1 = power_d1(p, alpha);
        const double f2 = power_d2(p, alpha);
        const RhoDerivs r = rho_derivs(p, d.b1);

        double is_dw = 0.0, iw_trap = 0.0, iw2_trap = 0.0;
        for (int k = 0; k < K; ++k) {
            const double a = path.w[j0 + k] - w0;
            const double b = path.w[j0 + k + 1] - w0;
            is_dw += (k + 0.5) * (b - a);
            iw_trap += 0.5 * (a + b);
            iw2_trap += 0.5 * (a * a + b * b);
        }
        is_dw *= h;
        iw_trap *= h;
        iw2_trap *= h;

        const double lead = d.b2 + 0.5 * d.b11 * h2;
        acc[0] += f1 * lead;
        acc[1] += f1 * (d.b21 * iw_trap + d.b12 * is_dw + dn * sq * d.b111 * h3 / 6.0);
        acc[2] += f2 * lead * lead;
        acc[3] += -r.d2 * d.b11 * d.b11 * iw2_trap - dn * dn * r.d1 * d.b12;
        acc[4] += r.d1 * d.b11 * iw_trap;
    }
    t.n_terms[0] = sq * acc[0];
    t.n_terms[1] = acc[1] / sq;
    t.n_terms[2] = 0.5 * dn * acc[2];
    t.n_terms[3] = acc[3] / (2.0 * dn);
    t.n_terms[4] = -acc[4] / dn;

    t.z_n = (t.v_n - t.v_limit) / sq;
    t.residual = t.z_n - t.m_n - sq * t.n_sum();
    if (t.f_n > 0.0) {
        t.studentized = studentize(t.z_n, t.f_n);
    } else {
        t.studentized = std::numeric_limits<double>::quiet_NaN();
        t.studentized_ok = false;
    }
    return t;
}

Decomposition decomposition(const SimulatedPath& path, double p) {
    const double dn = path.dn();
    const double sq = std::sqrt(dn);
    const double m = abs_moment(p);
    double sum_f_alpha = 0.0, sum_rho = 0.0;
    for (int i = 1; i <= path.n; ++i) {
        const std::size_t j0 = path.obs(i - 1);
        const double b1 = path.coef[j0].b1;
        const double alpha = b1 * (path.w[path.obs(i)] - path.w[j0]) / sq;
        sum_f_alpha += abs_pow(alpha, p);
        sum_rho += m * abs_pow(b1, p);
    }
    Decomposition d;
    d.v_direct = power_variation(path, p);
    const double v = limit_v(path, p);
    d.m_n = sq * (sum_f_alpha - sum_rho);
    d.r1 = (d.v_direct - dn * sum_f_alpha) / sq;
    d.r2 = (dn * sum_rho - v) / sq;
    d.v_reassembled = v + sq * (d.m_n + d.r1 + d.r2);
    return d;
}

double riemann_functional(const SimulatedPath& path, const WeightProcess& a, const BlockFunctional& g) {
    const int K = path.refine;
    const double root_n = std::sqrt(static_cast<double>(path.n));
    std::vector<double> block(static_cast<std::size_t>(K) + 1);
    double s = 0.0;
    for (int i = 1; i <= path.n; ++i) {
        const std::size_t j0 = path.obs(i - 1);
        for (int k = 0; k <= K; ++k) block[k] = (path.w[j0 + k] - path.w[j0]) * root_n;
        s += g(a(path, j0), block);
    }
    return s * path.dn();
}

double riemann_limit(const SimulatedPath& path, const WeightProcess& a, const std::function<double(double)>& rho_g) {
    const std::size_t last = path.steps();
    double s = 0.5 * (rho_g(a(path, 0)) + rho_g(a(path, last)));
    for (std::size_t k = 1; k < last; ++k) s += rho_g(a(path, k));
    return s * path.fine_dt;
}

}  // namespace pvedge
