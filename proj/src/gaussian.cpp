#include "pvedge/gaussian.hpp"

#include "pvedge/errors.hpp"
#include "pvedge/parallel.hpp"
#include "pvedge/path.hpp"
#include "pvedge/rng.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace pvedge {

double hermite(int k, double x) {
    if (k < 0) throw ContractViolation("Hermite order must be nonnegative");
    if (k == 0) return 1.0;
    double prev = 1.0, cur = x;
    for (int j = 1; j < k; ++j) {
        const double next = x * cur - j * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

double abs_moment(double p) {
    if (!(p > -1.0)) throw ContractViolation("absolute moment needs p > -1");
    return std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * (p + 1.0)) / std::sqrt(std::numbers::pi);
}

bool PowerSpec::expansion_admissible() const noexcept {
    if (p > 13.0) return true;
    return p >= 2.0 && std::floor(p) == p && std::fmod(p, 2.0) == 0.0;
}

GaussQuadrature::GaussQuadrature(int order) {
    if (order < 1) throw ContractViolation("quadrature order must be positive");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
    Eigen::VectorXd sub(order > 1 ? order - 1 : 0);
    for (int k = 1; k < order; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    nodes_.resize(order);
    weights_.resize(order);
    for (int i = 0; i < order; ++i) {
        nodes_[i] = solver.eigenvalues()(i);
        const double v = solver.eigenvectors()(0, i);
        weights_[i] = v * v;
    }
    // Symmetrize: the rule is exact for odd integrands only if nodes pair up.
    for (int i = 0; i < order / 2; ++i) {
        const int j = order - 1 - i;
        const double node = 0.5 * (nodes_[j] - nodes_[i]);
        const double weight = 0.5 * (weights_[i] + weights_[j]);
        nodes_[i] = -node;
        nodes_[j] = node;
        weights_[i] = weights_[j] = weight;
    }
    if (order % 2 == 1) nodes_[order / 2] = 0.0;
}

const GaussQuadrature& GaussQuadrature::of_order(int order) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<GaussQuadrature>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[order];
    if (!slot) slot = std::make_unique<GaussQuadrature>(order);
    return *slot;
}

double gaussian_expectation(const std::function<double(double)>& h, double rel_tol) {
    double previous = GaussQuadrature::of_order(64).expectation(h);
    for (int order = 128; order <= 1024; order *= 2) {
        const GaussQuadrature& rule = GaussQuadrature::of_order(order);
        const double current = rule.expectation(h);
        const double scale = rule.expectation([&](double z) { return std::abs(h(z)); });
        if (std::abs(current - previous) <= rel_tol * std::max(scale, 1e-300)) return current;
        previous = current;
    }
    return previous;
}

double rho(double p, double x) { return abs_moment(p) * std::pow(std::abs(x), p); }

double power_d1(double p, double x) {
    if (x == 0.0) {
        if (p < 1.0) throw SingularityError("f_p' is singular at 0 for p < 1");
        return 0.0;
    }
    return p * std::copysign(std::pow(std::abs(x), p - 1.0), x);
}

double power_d2(double p, double x) {
    if (x == 0.0 && p < 2.0) throw SingularityError("f_p'' is singular at 0 for p < 2");
    return p * (p - 1.0) * std::pow(std::abs(x), p - 2.0);
}

RhoDerivs rho_derivs(double p, double x) {
    const double m = abs_moment(p);
    RhoDerivs r;
    r.value = m * std::pow(std::abs(x), p);
    r.d1 = m * power_d1(p, x);
    r.d2 = m * power_d2(p, x);
    return r;
}

EvenFunctional EvenFunctional::hermite_poly(int k) {
    if (k < 2 || k % 2 != 0) throw ContractViolation("Hermite functional needs an even order >= 2");
    EvenFunctional f;
    f.name = "H" + std::to_string(k);
    f.f = [k](double x) { return hermite(k, x); };
    f.fprime = [k](double x) { return k * hermite(k - 1, x); };
    f.raw = f.f;
    return f;
}

EvenFunctional EvenFunctional::centered_power(double p) {
    if (!(p > 0.0)) throw ContractViolation("power must be positive");
    EvenFunctional f;
    const double m = abs_moment(p);
    f.name = "power";
    f.p = p;
    f.f = [p, m](double x) { return std::pow(std::abs(x), p) - m; };
    f.fprime = [p](double x) { return x == 0.0 ? 0.0 : p * std::copysign(std::pow(std::abs(x), p - 1.0), x); };
    f.raw = [p](double x) { return std::pow(std::abs(x), p); };
    return f;
}

EvenFunctional EvenFunctional::zero() {
    EvenFunctional f;
    f.name = "zero";
    f.f = [](double) { return 0.0; };
    f.fprime = f.f;
    f.raw = f.f;
    return f;
}

std::vector<double> hermite_coeffs(const EvenFunctional& f, int kmax) {
    if (kmax < 0) throw ContractViolation("kmax must be nonnegative");
    for (double x : {0.3, 1.1, 2.7, 4.2}) {
        const double a = f.f(x), b = f.f(-x);
        if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
            throw ContractViolation("functional " + f.name + " is not even");
        }
    }
    const double mean = gaussian_expectation(f.f);
    const double scale = gaussian_expectation([&](double z) { return std::abs(f.f(z)); });
    if (std::abs(mean) > 1e-8 * std::max(1.0, scale)) {
        throw ContractViolation("functional " + f.name + " is not centered: E f(Z) = " + std::to_string(mean));
    }
    std::vector<double> lambda(static_cast<std::size_t>(kmax) + 1, 0.0);
    double factorial = 1.0;
    for (int k = 1; k <= kmax; ++k) {
        factorial *= k;
        if (k < 2 || k % 2 != 0) continue;
        lambda[k] = gaussian_expectation([&](double z) { return f.f(z) * hermite(k, z); }) / factorial;
    }
    return lambda;
}

GaussianSmoother::GaussianSmoother(std::function<double(double)> g) : g_(std::move(g)) {
    static const double probe_y[] = {-2.1, -0.4, 0.35, 1.7};
    static const double probe_tau[] = {0.2, 1.0};
    auto evaluate = [&](const GaussQuadrature& rule) {
        std::vector<double> v;
        double scale = 0.0;
        for (double y : probe_y)
            for (double tau : probe_tau) {
                const double sd = std::sqrt(tau);
                v.push_back(rule.expectation([&](double z) { return g_(y + sd * z); }));
                scale = std::max(scale, rule.expectation([&](double z) { return std::abs(g_(y + sd * z)); }));
            }
        return std::make_pair(v, scale);
    };
    int order = 16;
    rule_ = &GaussQuadrature::of_order(order);
    auto [prev, scale0] = evaluate(*rule_);
    for (order = 32; order <= 1024; order *= 2) {
        const GaussQuadrature& next = GaussQuadrature::of_order(order);
        auto [cur, scale] = evaluate(next);
        double diff = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i) diff = std::max(diff, std::abs(cur[i] - prev[i]));
        if (diff <= 1e-9 * std::max(scale, 1e-300)) return;
        rule_ = &next;
        prev = std::move(cur);
    }
}

double GaussianSmoother::operator()(double y, double tau) const {
    if (tau < 0.0) throw ContractViolation("remaining variance must be nonnegative");
    if (tau == 0.0) return g_(y);
    const double sd = std::sqrt(tau);
    return rule_->expectation([&](double z) { return g_(y + sd * z); });
}

namespace {

// E[g(y + sd Z)] for g smooth except at 0: 7-point Gauss-Legendre panels on
// each side of the kink z0 = -y/sd, graded geometrically towards z0 and
// reaching |z| = 14 where the Gaussian tail is negligible.
template <class G>
double kinked_expectation(G&& g, double y, double sd) {
    using Rule = boost::math::quadrature::gauss<double, 7>;
    constexpr double reach = 14.0;
    const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    auto integrand = [&](double z) { return g(y + sd * z) * c * std::exp(-0.5 * z * z); };
    const double z0 = -y / sd;
    double total = 0.0;
    for (double dir : {-1.0, 1.0}) {
        const double end = dir * reach;
        const double length = std::abs(end - z0);
        if (dir * (end - z0) <= 0.0) continue;
        double a = z0, width = std::ldexp(1.0, -30);
        while (dir * (end - a) > 0.0) {
            const double b = std::abs(a - z0) + width >= length ? end : a + dir * width;
            total += Rule::integrate(integrand, std::min(a, b), std::max(a, b));
            a = b;
            width = std::min(2.0 * width, 1.0);
        }
    }
    return total;
}

}  // namespace

double smoothed_fprime(double p, double y, double tau) {
    if (tau < 0.0) throw ContractViolation("remaining variance must be nonnegative");
    if (tau == 0.0) return power_d1(p, y);
    const bool smooth = p >= 2.0 && std::fmod(p, 2.0) == 0.0;
    const double sd = std::sqrt(tau);
    if (!smooth && std::abs(y) < 14.0 * sd) {
        return kinked_expectation([p](double x) { return x == 0.0 ? 0.0 : p * std::copysign(std::pow(std::abs(x), p - 1.0), x); },
                                  y, sd);
    }
    static std::mutex mutex;
    static std::map<double, std::unique_ptr<GaussianSmoother>> cache;
    const GaussianSmoother* smoother;
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto& slot = cache[p];
        if (!slot) {
            slot = std::make_unique<GaussianSmoother>([p](double x) {
                return x == 0.0 ? 0.0 : p * std::copysign(std::pow(std::abs(x), p - 1.0), x);
            });
        }
        smoother = slot.get();
    }
    return (*smoother)(y, tau);
}

GammaConstants gamma_constants(const EvenFunctional& f, std::size_t replications, std::uint64_t seed,
                               const GammaOptions& options) {
    if (replications < 1000) throw ContractViolation("gamma_constants needs at least 1000 replications");
    const int steps = options.time_steps;
    if (steps < 1 || (steps & (steps - 1)) != 0) throw ContractViolation("time_steps must be a power of two");

    const GaussianSmoother smoother(f.fprime);
    const double h = 1.0 / steps;
    std::vector<double> fw(replications), integral(replications), raw_sq(replications), raw_lag(replications);

    parallel_chunks(replications, options.workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> w(static_cast<std::size_t>(steps) + 1);
        for (std::size_t r = begin; r < end; ++r) {
            const std::uint64_t s = substream_seed(seed, r);
            fill_brownian_dyadic(s, 0, 1.0, w);
            const double w1 = w[steps];
            const double next = NormalStream(s, 1)(0);
            double acc = 0.0;
            double g_prev = smoother(0.0, 1.0);
            g_prev *= g_prev;
            for (int k = 1; k <= steps; ++k) {
                double g = k == steps ? f.fprime(w1) : smoother(w[k], 1.0 - k * h);
                g *= g;
                acc += 0.5 * h * (g_prev + g);
                g_prev = g;
            }
            fw[r] = f.f(w1);
            integral[r] = acc;
            const double raw1 = f.raw(w1);
            raw_sq[r] = raw1 * raw1;
            raw_lag[r] = raw1 * f.raw(next);
        }
    });

    const double n = static_cast<double>(replications);
    const double mf = tree_sum(fw) / n, mi = tree_sum(integral) / n;
    const double msq = tree_sum(raw_sq) / n, mlag = tree_sum(raw_lag) / n;
    std::vector<double> v1(replications), v2(replications), vb(replications), vfi(replications);
    for (std::size_t r = 0; r < replications; ++r) {
        const double di = integral[r] - mi;
        v1[r] = di * di;
        v2[r] = (fw[r] - mf) * di;
        vb[r] = (raw_sq[r] - msq) * di - 2.0 * (raw_lag[r] - mlag) * di;
        vfi[r] = fw[r] * integral[r];
    }
    const double unbias = n / (n - 1.0);
    GammaConstants out;
    out.replications = replications;
    out.time_steps = steps;
    out.seed = seed;
    const MeanSe s1 = mean_se(v1), s2 = mean_se(v2), sb = mean_se(vb), sfi = mean_se(vfi);
    out.gamma1 = s1.mean * unbias;
    out.gamma2 = s2.mean * unbias;
    out.gamma_bar = sb.mean * unbias;
    out.mean_f_i = sfi.mean;
    out.se_gamma1 = s1.se;
    out.se_gamma2 = s2.se;
    out.se_gamma_bar = sb.se;
    out.se_mean_f_i = sfi.se;
    return out;
}

std::string gamma_table_json(const std::vector<std::pair<EvenFunctional, GammaConstants>>& rows) {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& [f, g] : rows) {
        table.push_back({{"functional", f.name},
                         {"p", f.p},
                         {"gamma1", g.gamma1},
                         {"gamma1_se", g.se_gamma1},
                         {"gamma2", g.gamma2},
                         {"gamma2_se", g.se_gamma2},
                         {"gamma_bar", g.gamma_bar},
                         {"gamma_bar_se", g.se_gamma_bar},
                         {"replications", g.replications},
                         {"time_steps", g.time_steps},
                         {"seed", g.seed}});
    }
    return table.dump(2);
}

GFunctions::GFunctions(double p) : p_(p) {
    if (!(p > 1.0)) throw DomainError("g-functions need p > 1 (E|U|^(p-2) diverges otherwise)");
    mp_ = abs_moment(p);
    mp2_ = abs_moment(p + 2.0);
    mm2_ = abs_moment(p - 2.0);
    m2p_ = abs_moment(2.0 * p);
    m2pm2_ = abs_moment(2.0 * p - 2.0);
    m2pp2_ = abs_moment(2.0 * p + 2.0);
}

std::array<double, 5> GFunctions::operator()(const std::array<double, 6>& x) const {
    const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4], x6 = x[5];
    const double p = p_;
    if (x2 == 0.0 && p < 2.0) throw DomainError("g-functions need x2 != 0 when p < 2");
    const double sg = x2 > 0 ? 1.0 : (x2 < 0 ? -1.0 : 0.0);
    const double a_pm2 = abs_pow(x2, p - 2.0);
    const double a_pm1 = abs_pow(x2, p - 1.0);
    const double mp = mp_, mp2 = mp2_, mm2 = mm2_;

    std::array<double, 5> g{};
    g[0] = p * sg * a_pm1 * (x1 * mp + 0.5 * x5 * (mp2 - 2.0 * mp));
    g[1] = p * sg * a_pm1 * (0.5 * (x3 + x4) * mp + x6 * (mp2 - 3.0 * mp) / 6.0);
    g[2] = 0.5 * p * (p - 1.0) * a_pm2 *
           (x1 * x1 * mm2 + x1 * x5 * (mp - mm2) + 0.25 * x5 * x5 * (mp2 - 2.0 * mp + mm2));
    g[3] = 0.25 * p * mp * (-(p - 1.0) * a_pm2 * x5 * x5 - 2.0 * x4 * sg * a_pm1);
    g[4] = p * p * a_pm1 * a_pm1 *
           (x1 * x1 * m2pm2_ + x1 * x5 * (m2p_ - m2pm2_) + 0.25 * x5 * x5 * (m2pp2_ - 2.0 * m2p_ + m2pm2_) +
            x5 * x5 * mp * mp / 3.0 - x5 * mp * (x1 * mp + 0.5 * x5 * (mp2 - mp)));
    return g;
}

std::array<double, 5> g_functions(double p, const std::array<double, 6>& x) { return GFunctions(p)(x); }

}  // namespace pvedge
