#include "pvedge/path.hpp"

#include "pvedge/errors.hpp"
#include "pvedge/rng.hpp"

#include <bit>
#include <cmath>

namespace pvedge {

namespace {

bool is_power_of_two(long long v) { return v > 0 && std::has_single_bit(static_cast<unsigned long long>(v)); }

}  // namespace

void fill_brownian_dyadic(std::uint64_t seed, std::uint64_t stream, double horizon, std::span<double> out) {
    const std::size_t intervals = out.size() - 1;
    if (out.size() < 2 || !is_power_of_two(static_cast<long long>(intervals))) {
        throw ContractViolation("dyadic Brownian fill needs 2^L + 1 points");
    }
    NormalStream normal(seed, stream);
    const double dt = horizon / static_cast<double>(intervals);
    out[0] = 0.0;
    out[intervals] = std::sqrt(horizon) * normal(0);
    // Node at level L with in-level position q has index 2^(L-1) + q.
    std::uint64_t level_base = 1;
    for (std::size_t half = intervals / 2; half >= 1; half /= 2, level_base *= 2) {
        const double sd = std::sqrt(0.5 * static_cast<double>(half) * dt);
        std::uint64_t q = 0;
        for (std::size_t m = half; m < intervals; m += 2 * half, ++q) {
            out[m] = 0.5 * (out[m - half] + out[m + half]) + sd * normal(level_base + q);
        }
        if (half == 1) break;
    }
}

SimulatedPath simulate_path(const DiffusionModel& model, int n, int refine, std::uint64_t seed) {
    if (n < 2 || !is_power_of_two(n)) throw ContractViolation("n must be a power of two >= 2");
    if (!is_power_of_two(refine)) throw ContractViolation("refinement K must be a power of two >= 1");

    SimulatedPath p;
    p.n = n;
    p.refine = refine;
    p.seed = seed;
    const std::size_t main = p.steps();
    const std::size_t total = main + static_cast<std::size_t>(refine) + 1;
    const double h = 1.0 / static_cast<double>(main);
    p.fine_dt = h;
    p.w.resize(total);
    p.x.resize(total);
    p.y.resize(total);
    p.coef.resize(total);

    fill_brownian_dyadic(seed, 0, 1.0, std::span<double>(p.w.data(), main + 1));
    const double w1 = p.w[main];
    fill_brownian_dyadic(seed, 1, p.dn(), std::span<double>(p.w.data() + main, refine + 1));
    for (std::size_t k = main; k < total; ++k) p.w[k] += w1;

    double x = model.x0();
    double y = 1.0;
    p.x[0] = x;
    p.y[0] = y;
    for (std::size_t k = 0;; ++k) {
        const CoefficientJet j = model.jet(x);
        p.coef[k] = j;
        if (k + 1 == total) break;
        const double dw = p.w[k + 1] - p.w[k];
        // Milstein plus E[dZ | dW] = h dW / 2 for the space-time area terms of
        // the order-1.5 Taylor scheme (coefficients b21 and b12).
        const double b21 = j.d1_b2 * j.b1;
        const double b12 = j.d1_b1 * j.b2 + 0.5 * j.d2_b1 * j.b1 * j.b1;
        x += j.b2 * h + j.b1 * dw + 0.5 * j.b1 * j.d1_b1 * (dw * dw - h) + 0.5 * (b21 + b12) * h * dw;
        y *= 1.0 + j.d1_b2 * h + j.d1_b1 * dw;
        if (!std::isfinite(x) || !std::isfinite(y)) throw SimulationDiverged(k + 1, "nonfinite state");
        if (!model.in_domain(x)) {
            throw DomainError("state " + std::to_string(x) + " left the evaluation domain at fine index " +
                              std::to_string(k + 1));
        }
        p.x[k + 1] = x;
        p.y[k + 1] = y;
    }
    return p;
}

double malliavin_derivative(const SimulatedPath& path, std::size_t s, std::size_t t) {
    if (s > t) return 0.0;
    if (path.y[s] == 0.0) throw DegenerateVariation("first variation vanishes at fine index " + std::to_string(s));
    return path.y[t] / path.y[s] * path.coef[s].b1;
}

double second_malliavin_diag(const SimulatedPath& path, std::size_t s, std::size_t t) {
    if (s > t) return 0.0;
    if (path.y[s] == 0.0) throw DegenerateVariation("first variation vanishes at fine index " + std::to_string(s));
    const double h = path.fine_dt;
    const double c = path.coef[s].b1 / path.y[s];
    double z = path.coef[s].d1_b1 * path.coef[s].b1;
    for (std::size_t k = s; k < t; ++k) {
        const CoefficientJet& j = path.coef[k];
        const double d = path.y[k] * c;
        const double dw = path.w[k + 1] - path.w[k];
        z += (j.d1_b2 * z + j.d2_b2 * d * d) * h + (j.d1_b1 * z + j.d2_b1 * d * d) * dw;
    }
    return z;
}

SecondDerivativeField::SecondDerivativeField(const SimulatedPath& path) : path_(&path) {
    const std::size_t total = path.x.size();
    prefix_.assign(total, 0.0);
    const double h = path.fine_dt;
    for (std::size_t k = 0; k + 1 < total; ++k) {
        if (path.y[k + 1] == 0.0) {
            throw DegenerateVariation("first variation vanishes at fine index " + std::to_string(k + 1));
        }
        const CoefficientJet& j = path.coef[k];
        const double dw = path.w[k + 1] - path.w[k];
        prefix_[k + 1] = prefix_[k] + (j.d2_b2 * h + j.d2_b1 * dw) * path.y[k] * path.y[k] / path.y[k + 1];
    }
}

double SecondDerivativeField::operator()(std::size_t s, std::size_t t) const {
    if (s > t) return 0.0;
    const SimulatedPath& p = *path_;
    if (p.y[s] == 0.0) throw DegenerateVariation("first variation vanishes at fine index " + std::to_string(s));
    const double c = p.coef[s].b1 / p.y[s];
    const double z0 = p.coef[s].d1_b1 * p.coef[s].b1;
    return p.y[t] * (z0 / p.y[s] + c * c * (prefix_[t] - prefix_[s]));
}

}  // namespace pvedge
