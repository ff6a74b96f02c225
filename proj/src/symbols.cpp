#include "pvedge/symbols.hpp"

#include "pvedge/errors.hpp"

#include <cmath>
#include <vector>

namespace pvedge {

namespace {

std::array<double, 6> g_args(const CoefficientJet& j) {
    const DerivedCoefficients d = derive(j);
    return {d.b2, d.b1, d.b21, d.b12, d.b11, d.b111};
}

}  // namespace

XiMatrix xi_matrix(const SimulatedPath& path, double p, const GammaConstants& gammas) {
    const double m1 = abs_moment(p), m2 = abs_moment(2 * p), m3 = abs_moment(3 * p), m4 = abs_moment(4 * p);
    const double k11 = m2 - m1 * m1;
    const double k12 = m3 - 3 * m2 * m1 + 2 * m1 * m1 * m1;
    const double k22 = m4 - 4 * m3 * m1 + 6 * m2 * m1 * m1 - 3 * m1 * m1 * m1 * m1;
    const GFunctions g(p);

    const std::size_t last = path.steps();
    double s2 = 0, s3 = 0, s4 = 0, s33 = 0;
    for (std::size_t k = 0; k <= last; ++k) {
        const double w = (k == 0 || k == last) ? 0.5 : 1.0;
        const double a = abs_pow(path.coef[k].b1, p);
        const double a2 = a * a;
        const auto gk = g(g_args(path.coef[k]));
        s2 += w * a2;
        s3 += w * a2 * a;
        s4 += w * a2 * a2;
        s33 += w * (gk[4] - gk[0] * gk[0]);
    }
    const double h = path.fine_dt;
    s2 *= h;
    s3 *= h;
    s4 *= h;
    s33 *= h;

    XiMatrix xi{};
    xi[0][0] = k11 * s2;
    xi[0][1] = xi[1][0] = k12 * s3;
    xi[1][1] = k22 * s4;
    xi[2][2] = s33;
    xi[0][3] = xi[3][0] = gammas.gamma2 * s3;
    xi[1][3] = xi[3][1] = gammas.gamma_bar * s4;
    xi[3][3] = gammas.gamma1 * s4;
    return xi;
}

double mu3(const SimulatedPath& path, double p) {
    const GFunctions g(p);
    const std::size_t last = path.steps();
    double ito = 0.0, drift = 0.0;
    for (std::size_t k = 0; k <= last; ++k) {
        const auto gk = g(g_args(path.coef[k]));
        const double w = (k == 0 || k == last) ? 0.5 : 1.0;
        drift += w * (gk[1] + gk[2] + gk[3]);
        if (k < last) ito += gk[0] * (path.w[k + 1] - path.w[k]);
    }
    return ito + drift * path.fine_dt;
}

AnticipativeFunctionals anticipative_functionals(const SimulatedPath& path, std::span<const double> a,
                                                 std::span<const double> sq_d1, std::span<const double> sq_d2) {
    const std::size_t last = path.steps();
    if (path.refine < 8) throw ContractViolation("anticipative functionals need refinement K >= 8");
    if (a.size() < last + 1 || sq_d1.size() < last + 1 || sq_d2.size() < last + 1) {
        throw ContractViolation("weight arrays must cover the fine grid on [0, 1]");
    }
    const SecondDerivativeField dd(path);
    const auto prefix = dd.prefix();
    const double h = path.fine_dt;

    // Suffix sums over u in [s, last] of F = (a^2)' Y, G = (a^2)'' Y^2 and F P.
    std::vector<double> sf(last + 2, 0.0), sg(last + 2, 0.0), sfp(last + 2, 0.0);
    for (std::size_t u = last + 1; u-- > 0;) {
        const double y = path.y[u];
        const double f = sq_d1[u] * y;
        sf[u] = sf[u + 1] + f;
        sg[u] = sg[u + 1] + sq_d2[u] * y * y;
        sfp[u] = sfp[u + 1] + f * prefix[u];
    }
    auto trap = [&](const std::vector<double>& suffix, double v_s, double v_last, std::size_t s) {
        if (s == last) return 0.0;
        return h * (suffix[s] - 0.5 * v_s - 0.5 * v_last);
    };
    const double f_last = sq_d1[last] * path.y[last];
    const double g_last = sq_d2[last] * path.y[last] * path.y[last];
    const double fp_last = f_last * prefix[last];

    AnticipativeFunctionals out;
    for (std::size_t s = 0; s <= last; ++s) {
        if (path.y[s] == 0.0) throw DegenerateVariation("first variation vanishes at fine index " + std::to_string(s));
        const double w = (s == 0 || s == last) ? 0.5 : 1.0;
        const double ys = path.y[s];
        const double c = path.coef[s].b1 / ys;
        const double f_s = sq_d1[s] * ys;
        const double tf = trap(sf, f_s, f_last, s);
        const double tg = trap(sg, sq_d2[s] * ys * ys, g_last, s);
        const double tfp = trap(sfp, f_s * prefix[s], fp_last, s);
        const double z_over_y = path.coef[s].d1_b1 * path.coef[s].b1 / ys;

        const double inner1 = c * tf;
        out.c2 += w * a[s] * inner1 * inner1;
        out.c3 += w * a[s] * c * c * tg;
        out.c4 += w * a[s] * ((z_over_y - c * c * prefix[s]) * tf + c * c * tfp);
    }
    out.c2 *= h;
    out.c3 *= h;
    out.c4 *= h;
    return out;
}

AnticipativeFunctionals anticipative_functionals(const SimulatedPath& path, double p) {
    const std::size_t n = path.steps() + 1;
    std::vector<double> a(n), d1(n), d2(n);
    for (std::size_t k = 0; k < n; ++k) {
        const CoefficientJet& j = path.coef[k];
        const double b = j.b1;
        const double sg = b > 0 ? 1.0 : -1.0;
        a[k] = abs_pow(b, p);
        const double a2m1 = abs_pow(b, 2 * p - 1);
        const double a2m2 = abs_pow(b, 2 * p - 2);
        d1[k] = 2 * p * sg * a2m1 * j.d1_b1;
        d2[k] = 2 * p * ((2 * p - 1) * a2m2 * j.d1_b1 * j.d1_b1 + sg * a2m1 * j.d2_b1);
    }
    return anticipative_functionals(path, a, d1, d2);
}

AnticipativeFunctionals anticipative_functionals(const SimulatedPath& path, const StateWeight& weight) {
    const std::size_t n = path.steps() + 1;
    std::vector<double> a(n), d1(n), d2(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = path.x[k];
        a[k] = weight.a(x);
        d1[k] = weight.sq_d1(x);
        d2[k] = weight.sq_d2(x);
    }
    return anticipative_functionals(path, a, d1, d2);
}

SymbolCoefficients assemble_symbols(const XiMatrix& xi, double mu3_value, const AnticipativeFunctionals& c,
                                    double p) {
    if (!(xi[0][0] > 0.0)) throw DegenerateSample("integrated variance xi11 is not positive");
    const double m1 = abs_moment(p);
    const double var = abs_moment(2 * p) - m1 * m1;
    SymbolCoefficients s;
    s.xi = xi;
    s.mu3 = mu3_value;
    s.c2 = c.c2;
    s.c3 = c.c3;
    s.c4 = c.c4;
    s.lambda2 = 0.5 * (abs_moment(p + 2) - m1);
    s.h1_tilde = xi[0][3] / (2.0 * xi[0][0]);
    s.h2 = mu3_value;
    s.h3_tilde = xi[0][1] / xi[0][0];
    s.h4 = s.lambda2 * var * var * c.c2;
    s.h5 = s.lambda2 * var * (c.c3 + c.c4);
    return s;
}

SymbolCoefficients compute_symbols(const SimulatedPath& path, double p, const GammaConstants& gammas) {
    return assemble_symbols(xi_matrix(path, p, gammas), mu3(path, p), anticipative_functionals(path, p), p);
}

}  // namespace pvedge
