#include "pvedge/harness.hpp"

#include "pvedge/errors.hpp"
#include "pvedge/path.hpp"
#include "pvedge/rng.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace pvedge {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    T v{};
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("config: bad value '" + text + "' for " + key);
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("config: bad boolean '" + text + "' for " + key);
}

bool is_power_of_two(long long v) { return v > 0 && (v & (v - 1)) == 0; }

const std::set<std::string>& known_analyses() {
    static const std::set<std::string> s{"lln", "clt", "expansion", "symbols", "density", "studentized"};
    return s;
}

Estimate to_estimate(const MeanSe& m) { return {m.mean, m.se}; }

Estimate estimate_of(const std::vector<double>& v) { return to_estimate(mean_se(v)); }

}  // namespace

bool ExperimentConfig::needs_symbols() const {
    return wants("symbols") || wants("clt") || wants("density") || wants("studentized");
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& value) {
    const std::string key = trim(raw_key);
    if (key == "model") {
        model = trim(value);
    } else if (key == "b1") {
        b1 = trim(value);
    } else if (key == "b2") {
        b2 = trim(value);
    } else if (key == "x0") {
        x0 = parse_number<double>(key, value);
    } else if (key == "p") {
        p = parse_number<double>(key, value);
    } else if (key == "n" || key == "n_list") {
        n_list.clear();
        for (const std::string& s : split_list(value)) n_list.push_back(parse_number<int>(key, s));
    } else if (key == "refine") {
        refine = parse_number<int>(key, value);
    } else if (key == "replications" || key == "reps") {
        replications = parse_number<std::size_t>(key, value);
    } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "out_dir" || key == "out") {
        out_dir = trim(value);
    } else if (key == "analyses") {
        analyses.clear();
        for (const std::string& s : split_list(value)) analyses.insert(s);
    } else if (key == "workers") {
        workers = parse_number<int>(key, value);
    } else if (key == "gamma_replications") {
        gamma_replications = parse_number<std::size_t>(key, value);
    } else if (key == "bandwidth") {
        if (trim(value) == "auto")
            bandwidth.reset();
        else
            bandwidth = parse_number<double>(key, value);
    } else if (key == "bootstrap") {
        bootstrap = parse_number<int>(key, value);
    } else if (key == "format") {
        format = trim(value);
    } else if (key == "write_artifacts") {
        write_artifacts = parse_bool(key, value);
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> models{"tanh-vol", "bm", "bm-drift", "custom"};
    if (!models.count(model)) throw ConfigError("config: unknown model '" + model + "'");
    if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError("config: p must exceed 1");
    if (p < 2.0) throw ConfigError("config: the expansion pipeline needs p >= 2");
    if (n_list.empty()) throw ConfigError("config: empty n list");
    for (int n : n_list)
        if (n < 2 || !is_power_of_two(n)) throw ConfigError("config: n = " + std::to_string(n) + " is not a power of two >= 2");
    if (refine < 8 || !is_power_of_two(refine)) throw ConfigError("config: refine must be a power of two >= 8");
    if (replications < 1) throw ConfigError("config: replications must be at least 1");
    if (workers < 0) throw ConfigError("config: workers must be nonnegative");
    if (bootstrap < 0) throw ConfigError("config: bootstrap must be nonnegative");
    if (bandwidth && !(*bandwidth > 0.0)) throw ConfigError("config: bandwidth must be positive");
    if (needs_symbols() && gamma_replications < 1000) throw ConfigError("config: gamma_replications must be >= 1000");
    if (format != "csv" && format != "json") throw ConfigError("config: format must be csv or json");
    for (const std::string& a : analyses)
        if (!known_analyses().count(a)) throw ConfigError("config: unknown analysis '" + a + "'");
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    ExperimentConfig c;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        c.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

DiffusionModel make_model(const ExperimentConfig& config) {
    if (config.model == "tanh-vol") return DiffusionModel::tanh_vol();
    if (config.model == "bm") return DiffusionModel::brownian();
    if (config.model == "bm-drift") return DiffusionModel::brownian_drift();
    if (config.model == "custom") return DiffusionModel::custom(config.b1, config.b2, config.x0);
    throw ConfigError("config: unknown model '" + config.model + "'");
}

std::vector<ReplicationRecord> run_replications(const DiffusionModel& model, const ExperimentConfig& config, int n,
                                                const GammaConstants* gammas) {
    const std::size_t reps = config.replications;
    std::vector<ReplicationRecord> out(reps);
    const bool symbols = config.needs_symbols() && gammas != nullptr;
    const std::size_t chunk = std::clamp<std::size_t>(reps / 64, 1, kReductionChunk);
    parallel_chunks(
        reps, config.workers,
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t r = begin; r < end; ++r) {
                ReplicationRecord& rec = out[r];
                rec.index = r;
                rec.seed = substream_seed(config.seed, r);
                try {
                    const SimulatedPath path = simulate_path(model, n, config.refine, rec.seed);
                    rec.terms = expansion_terms(path, config.p);
                    if (symbols) {
                        rec.symbols = compute_symbols(path, config.p, *gammas);
                        rec.has_symbols = true;
                    }
                    rec.ok = true;
                } catch (const Error& e) {
                    rec.ok = false;
                    rec.error = e.what();
                }
            }
        },
        chunk);
    return out;
}

DistributionMetrics compare_distributions(std::span<const double> samples, double coef_y, double coef_y3,
                                          double dn, int bootstrap, std::uint64_t seed) {
    if (samples.empty()) throw ContractViolation("compare_distributions: empty sample");
    std::vector<double> y(samples.begin(), samples.end());
    for (double v : y)
        if (!std::isfinite(v)) throw ContractViolation("compare_distributions: non-finite sample");
    std::sort(y.begin(), y.end());
    const std::size_t n = y.size();

    auto cdf_n = [](double v) { return normal_cdf(v); };
    auto cdf_c = [&](double v) { return corrected_cdf(coef_y, coef_y3, dn, v); };

    // Gauss-Legendre nodes on every gap [y_i, y_{i+1}] and on tail panels
    // [y_0 - 12, y_0] and [y_{n-1}, y_{n-1} + 12]; the nodes depend only on the
    // sample positions, so bootstrap resamples only change the step heights.
    using Rule = boost::math::quadrature::gauss<double, 7>;
    std::vector<double> rx, rw;
    for (std::size_t i = 0; i < Rule::abscissa().size(); ++i) {
        const double a = Rule::abscissa()[i], w = Rule::weights()[i];
        rx.push_back(a);
        rw.push_back(w);
        if (a != 0.0) {
            rx.push_back(-a);
            rw.push_back(w);
        }
    }
    struct Panel {
        std::size_t level;  // empirical CDF equals count(level) / n on the panel
        double lo, hi;
    };
    std::vector<Panel> panels;
    constexpr int kTailPanels = 48;
    constexpr double kTail = 12.0;
    for (int k = 0; k < kTailPanels; ++k)
        panels.push_back({0, y.front() - kTail + kTail * k / kTailPanels, y.front() - kTail + kTail * (k + 1) / kTailPanels});
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (y[i + 1] > y[i]) panels.push_back({i + 1, y[i], y[i + 1]});
    for (int k = 0; k < kTailPanels; ++k)
        panels.push_back({n, y.back() + kTail * k / kTailPanels, y.back() + kTail * (k + 1) / kTailPanels});

    std::vector<double> node_w, node_fn, node_fc;
    std::vector<std::size_t> node_level;
    for (const Panel& p : panels) {
        const double mid = 0.5 * (p.lo + p.hi), half = 0.5 * (p.hi - p.lo);
        for (std::size_t j = 0; j < rx.size(); ++j) {
            const double v = mid + half * rx[j];
            node_w.push_back(half * rw[j]);
            node_fn.push_back(cdf_n(v));
            node_fc.push_back(cdf_c(v));
            node_level.push_back(p.level);
        }
    }
    std::vector<double> at_fn(n), at_fc(n);
    for (std::size_t i = 0; i < n; ++i) {
        at_fn[i] = cdf_n(y[i]);
        at_fc[i] = cdf_c(y[i]);
    }

    // cum[k] = number of resampled points among y[0..k-1].
    auto metrics = [&](const std::vector<double>& cum) {
        std::array<double, 4> m{};
        const double total = cum[n];
        for (std::size_t i = 0; i < n; ++i) {
            const double before = cum[i] / total, after = cum[i + 1] / total;
            m[0] = std::max({m[0], std::abs(at_fn[i] - before), std::abs(at_fn[i] - after)});
            m[1] = std::max({m[1], std::abs(at_fc[i] - before), std::abs(at_fc[i] - after)});
        }
        for (std::size_t k = 0; k < node_w.size(); ++k) {
            const double level = cum[node_level[k]] / total;
            m[2] += node_w[k] * std::abs(level - node_fn[k]);
            m[3] += node_w[k] * std::abs(level - node_fc[k]);
        }
        return m;
    };

    std::vector<double> cum(n + 1);
    for (std::size_t i = 0; i <= n; ++i) cum[i] = static_cast<double>(i);
    const std::array<double, 4> base = metrics(cum);

    DistributionMetrics out;
    out.samples = n;
    out.sup_normal = base[0];
    out.sup_corrected = base[1];
    out.iae_normal = base[2];
    out.iae_corrected = base[3];
    if (bootstrap < 2) return out;

    std::array<std::vector<double>, 4> boot;
    SequentialRng rng(seed, 0);
    std::vector<std::uint32_t> counts(n);
    for (int b = 0; b < bootstrap; ++b) {
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::size_t i = 0; i < n; ++i) ++counts[rng.below(n)];
        for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + counts[i];
        const std::array<double, 4> m = metrics(cum);
        for (int k = 0; k < 4; ++k) boot[k].push_back(m[k]);
    }
    auto sd = [](const std::vector<double>& v) {
        const MeanSe m = mean_se(v);
        return m.se * std::sqrt(static_cast<double>(v.size()));
    };
    out.se_sup_normal = sd(boot[0]);
    out.se_sup_corrected = sd(boot[1]);
    out.se_iae_normal = sd(boot[2]);
    out.se_iae_corrected = sd(boot[3]);
    return out;
}

std::uint64_t gamma_seed(std::uint64_t master) { return substream_seed(master, std::uint64_t{1} << 41); }

namespace {

std::uint64_t bootstrap_seed(std::uint64_t master, int n) {
    return substream_seed(master, (std::uint64_t{1} << 40) + static_cast<std::uint64_t>(n));
}

NSummary summarize_impl(const ExperimentConfig& config, int n, std::span<const ReplicationRecord> records,
                        std::optional<DensityModel>* fitted) {
    NSummary s;
    s.n = n;
    s.dn = 1.0 / n;
    s.replications = records.size();
    std::vector<const ReplicationRecord*> ok;
    for (const ReplicationRecord& r : records) {
        if (r.ok) {
            ok.push_back(&r);
            if (!r.terms.studentized_ok) ++s.nonpositive_f_n;
        } else {
            ++s.failures;
            if (s.failure_examples.size() < 5) s.failure_examples.push_back(r.error);
        }
    }
    if (ok.empty()) return s;

    auto column = [&](auto get) {
        std::vector<double> v;
        v.reserve(ok.size());
        for (const ReplicationRecord* r : ok) v.push_back(get(*r));
        return v;
    };
    auto add = [&](const std::string& name, auto get) { s.terms.emplace_back(name, estimate_of(column(get))); };
    add("v_n", [](const ReplicationRecord& r) { return r.terms.v_n; });
    add("v_limit", [](const ReplicationRecord& r) { return r.terms.v_limit; });
    add("f_n", [](const ReplicationRecord& r) { return r.terms.f_n; });
    add("c_limit", [](const ReplicationRecord& r) { return r.terms.c_limit; });
    add("m_n", [](const ReplicationRecord& r) { return r.terms.m_n; });
    for (int k = 0; k < 5; ++k)
        add("n" + std::to_string(k + 1), [k](const ReplicationRecord& r) { return r.terms.n_terms[k]; });
    add("n_sum", [](const ReplicationRecord& r) { return r.terms.n_sum(); });
    add("z_n", [](const ReplicationRecord& r) { return r.terms.z_n; });
    add("residual", [](const ReplicationRecord& r) { return r.terms.residual; });

    std::vector<double> stud;
    for (const ReplicationRecord* r : ok)
        if (r->terms.studentized_ok) stud.push_back(r->terms.studentized);
    if (!stud.empty()) s.terms.emplace_back("studentized", estimate_of(stud));

    if (config.wants("lln")) s.lln_error = estimate_of(column([](const ReplicationRecord& r) { return r.terms.v_n - r.terms.v_limit; }));
    if (config.wants("expansion")) {
        const MeanSe sq = mean_se(column([&](const ReplicationRecord& r) { return r.terms.residual * r.terms.residual / s.dn; }));
        const double l2 = std::sqrt(std::max(sq.mean, 0.0));
        s.residual_l2 = Estimate{l2, l2 > 0.0 ? sq.se / (2.0 * l2) : 0.0};
    }

    const bool symbols = std::all_of(ok.begin(), ok.end(), [](const ReplicationRecord* r) { return r->has_symbols; });
    if (!symbols) return s;

    s.mu3 = estimate_of(column([](const ReplicationRecord& r) { return r.symbols.mu3; }));
    s.n_minus_mu3 = estimate_of(column([](const ReplicationRecord& r) { return r.terms.n_sum() - r.symbols.mu3; }));

    if (config.wants("clt") && ok.size() >= 2) {
        const double sq = std::sqrt(s.dn);
        std::array<std::vector<double>, 3> v;
        v[0] = column([](const ReplicationRecord& r) { return r.terms.m_n; });
        v[1] = column([sq](const ReplicationRecord& r) { return (r.terms.f_n - r.terms.c_limit) / sq; });
        v[2] = column([](const ReplicationRecord& r) { return r.terms.n_sum() - r.symbols.mu3; });
        std::array<double, 3> mean{};
        for (int i = 0; i < 3; ++i) mean[i] = mean_se(v[i]).mean;
        CovarianceSummary cov;
        const double m = static_cast<double>(ok.size());
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                std::vector<double> prod(ok.size());
                for (std::size_t r = 0; r < ok.size(); ++r) prod[r] = (v[i][r] - mean[i]) * (v[j][r] - mean[j]);
                const MeanSe e = mean_se(prod);
                cov.empirical[i][j] = e.mean * m / (m - 1.0);
                cov.empirical_se[i][j] = e.se;
                const MeanSe x = mean_se(column([i, j](const ReplicationRecord& r) { return r.symbols.xi[i][j]; }));
                cov.xi_mean[i][j] = x.mean;
                cov.xi_se[i][j] = x.se;
            }
        }
        s.covariance = cov;
    }

    if ((config.wants("density") || config.wants("studentized")) && ok.size() >= DensityFitOptions{}.min_replications) {
        SymbolSample sample;
        sample.seed = config.seed;
        for (const ReplicationRecord* r : ok) sample.records.push_back(symbol_record(r->symbols));
        DensityFitOptions opts;
        opts.bandwidth = config.bandwidth;
        DensityModel model = fit_density_model(sample, opts);
        DensitySummary d;
        d.bandwidth = model.bandwidth();
        d.bandwidth_overridden = model.bandwidth_overridden();
        d.e_h1 = to_estimate(model.e_h1());
        d.e_h2 = to_estimate(model.e_h2());
        d.e_h3 = to_estimate(model.e_h3());
        d.e_h4 = to_estimate(model.e_h4());
        d.e_h5 = to_estimate(model.e_h5());
        d.coef_y = to_estimate(model.coef_y());
        d.coef_y3 = to_estimate(model.coef_y3());
        d.sign_changes = density_sign_changes(d.coef_y.mean, d.coef_y3.mean, s.dn);
        s.density = d;
        if (config.wants("studentized") && !stud.empty())
            s.distances = compare_distributions(stud, d.coef_y.mean, d.coef_y3.mean, s.dn, config.bootstrap,
                                                bootstrap_seed(config.seed, n));
        if (fitted) fitted->emplace(std::move(model));
    }
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

std::vector<double> linspace(double a, double b, int count) {
    std::vector<double> v(count);
    for (int i = 0; i < count; ++i) v[i] = a + (b - a) * i / (count - 1);
    return v;
}

}  // namespace

NSummary summarize(const ExperimentConfig& config, int n, std::span<const ReplicationRecord> records) {
    return summarize_impl(config, n, records, nullptr);
}

EdgeworthReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const DiffusionModel model = make_model(config);
    EdgeworthReport report;
    report.config = config;
    report.model_name = model.name();
    if (PowerSpec{config.p}.warning())
        report.power_warning = "p outside 2N and (13, inf): only the LLN and CLT parts are justified";
    if (config.needs_symbols()) {
        GammaOptions go;
        go.workers = config.workers;
        report.gammas = gamma_constants(EvenFunctional::centered_power(config.p), config.gamma_replications,
                                        gamma_seed(config.seed), go);
    }

    const std::filesystem::path dir(config.out_dir);
    if (config.write_artifacts) std::filesystem::create_directories(dir);

    for (int n : config.n_list) {
        const std::vector<ReplicationRecord> records =
            run_replications(model, config, n, report.gammas ? &*report.gammas : nullptr);
        std::optional<DensityModel> fitted;
        NSummary s = summarize_impl(config, n, records, &fitted);
        if (static_cast<double>(s.failures) > 0.01 * static_cast<double>(s.replications)) {
            std::string msg = "n = " + std::to_string(n) + ": " + std::to_string(s.failures) + " of " +
                              std::to_string(s.replications) + " replications failed";
            if (!s.failure_examples.empty()) msg += "; first error: " + s.failure_examples.front();
            throw FailureThreshold(msg);
        }
        if (config.write_artifacts) {
            const std::string tag = "_n" + std::to_string(n);
            std::ostringstream st;
            write_statistics_csv(st, records);
            write_text(dir / ("statistics" + tag + ".csv"), st.str());
            if (config.needs_symbols()) {
                std::ostringstream sy;
                write_symbols_csv(sy, n, records);
                write_text(dir / ("symbols" + tag + ".csv"), sy.str());
            }
            if (fitted && config.wants("density")) {
                std::ostringstream g;
                const std::vector<double> yg = linspace(-5.0, 5.0, 201);
                write_studentized_grid_csv(g, *fitted, s.dn, yg);
                write_text(dir / ("studentized_grid" + tag + ".csv"), g.str());
                std::ostringstream j;
                const double lo = std::max(fitted->support_lo(), 1e-3), hi = fitted->support_hi();
                write_joint_grid_csv(j, *fitted, s.dn, linspace(-4.0, 4.0, 41), linspace(lo, hi, 41));
                write_text(dir / ("joint_grid" + tag + ".csv"), j.str());
            }
        }
        report.per_n.push_back(std::move(s));
    }

    for (std::size_t i = 0; i + 1 < report.per_n.size(); ++i) {
        const NSummary& a = report.per_n[i];
        const NSummary& b = report.per_n[i + 1];
        if (a.residual_l2 && b.residual_l2 && a.residual_l2->mean > 0 && b.residual_l2->mean > 0)
            report.residual_slopes.push_back(std::log(b.residual_l2->mean / a.residual_l2->mean) /
                                             std::log(b.dn / a.dn));
    }

    if (config.write_artifacts) {
        if (config.format == "json")
            write_text(dir / "report.json", report_json(report));
        else
            write_text(dir / "report.csv", report_csv(report));
    }
    return report;
}

namespace {

using ojson = nlohmann::ordered_json;

ojson est(const Estimate& e) { return ojson{{"mean", e.mean}, {"se", e.se}}; }

ojson mat3(const std::array<std::array<double, 3>, 3>& m) {
    ojson a = ojson::array();
    for (const auto& row : m) a.push_back(ojson(row));
    return a;
}

ojson config_json(const ExperimentConfig& c) {
    ojson j;
    j["model"] = c.model;
    if (c.model == "custom") {
        j["b1"] = c.b1;
        j["b2"] = c.b2;
        j["x0"] = c.x0;
    }
    j["p"] = c.p;
    j["n_list"] = c.n_list;
    j["refine"] = c.refine;
    j["replications"] = c.replications;
    j["seed"] = c.seed;
    j["analyses"] = std::vector<std::string>(c.analyses.begin(), c.analyses.end());
    j["gamma_replications"] = c.gamma_replications;
    if (c.bandwidth) j["bandwidth"] = *c.bandwidth;
    else j["bandwidth"] = "auto";
    j["bootstrap"] = c.bootstrap;
    return j;
}

}  // namespace

std::string report_json(const EdgeworthReport& report) {
    ojson j;
    j["config"] = config_json(report.config);
    j["model"] = report.model_name;
    if (!report.power_warning.empty()) j["power_warning"] = report.power_warning;
    if (report.gammas) {
        const GammaConstants& g = *report.gammas;
        j["gamma_constants"] = ojson{{"gamma1", est({g.gamma1, g.se_gamma1})},
                                     {"gamma2", est({g.gamma2, g.se_gamma2})},
                                     {"gamma_bar", est({g.gamma_bar, g.se_gamma_bar})},
                                     {"mean_f_i", est({g.mean_f_i, g.se_mean_f_i})},
                                     {"replications", g.replications},
                                     {"time_steps", g.time_steps},
                                     {"seed", g.seed}};
    }
    ojson per = ojson::array();
    for (const NSummary& s : report.per_n) {
        ojson e;
        e["n"] = s.n;
        e["dn"] = s.dn;
        e["replications"] = s.replications;
        e["failures"] = s.failures;
        e["failure_examples"] = s.failure_examples;
        e["nonpositive_f_n"] = s.nonpositive_f_n;
        ojson terms;
        for (const auto& [name, v] : s.terms) terms[name] = est(v);
        e["terms"] = terms;
        if (s.lln_error) e["lln_error"] = est(*s.lln_error);
        if (s.residual_l2) e["residual_l2"] = est(*s.residual_l2);
        if (s.mu3) e["mu3"] = est(*s.mu3);
        if (s.n_minus_mu3) e["n_minus_mu3"] = est(*s.n_minus_mu3);
        if (s.covariance) {
            const CovarianceSummary& c = *s.covariance;
            e["covariance"] = ojson{{"variables", {"m_n", "f_hat", "n_centered"}},
                                    {"empirical", mat3(c.empirical)},
                                    {"empirical_se", mat3(c.empirical_se)},
                                    {"xi_mean", mat3(c.xi_mean)},
                                    {"xi_se", mat3(c.xi_se)}};
        }
        if (s.density) {
            const DensitySummary& d = *s.density;
            ojson dj;
            dj["bandwidth"] = d.bandwidth;
            dj["bandwidth_overridden"] = d.bandwidth_overridden;
            dj["e_h1"] = est(d.e_h1);
            dj["e_h2"] = est(d.e_h2);
            dj["e_h3"] = est(d.e_h3);
            dj["e_h4"] = est(d.e_h4);
            dj["e_h5"] = est(d.e_h5);
            dj["coef_y"] = est(d.coef_y);
            dj["coef_y3"] = est(d.coef_y3);
            dj["negative_region"] = d.sign_changes.any
                                        ? ojson{{"leftmost", d.sign_changes.leftmost}, {"rightmost", d.sign_changes.rightmost}}
                                        : ojson(nullptr);
            e["density"] = dj;
        }
        if (s.distances) {
            const DistributionMetrics& m = *s.distances;
            e["cdf_distances"] = ojson{{"samples", m.samples},
                                       {"sup_normal", est({m.sup_normal, m.se_sup_normal})},
                                       {"sup_corrected", est({m.sup_corrected, m.se_sup_corrected})},
                                       {"iae_normal", est({m.iae_normal, m.se_iae_normal})},
                                       {"iae_corrected", est({m.iae_corrected, m.se_iae_corrected})}};
        }
        per.push_back(e);
    }
    j["per_n"] = per;
    j["residual_slopes"] = report.residual_slopes;
    return j.dump(2) + "\n";
}

std::string report_csv(const EdgeworthReport& report) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "n,quantity,mean,se\n";
    for (const NSummary& s : report.per_n) {
        auto row = [&](const std::string& q, const Estimate& e) { out << s.n << ',' << q << ',' << e.mean << ',' << e.se << '\n'; };
        row("failures", {static_cast<double>(s.failures), 0.0});
        row("nonpositive_f_n", {static_cast<double>(s.nonpositive_f_n), 0.0});
        for (const auto& [name, v] : s.terms) row(name, v);
        if (s.lln_error) row("lln_error", *s.lln_error);
        if (s.residual_l2) row("residual_l2", *s.residual_l2);
        if (s.mu3) row("mu3", *s.mu3);
        if (s.n_minus_mu3) row("n_minus_mu3", *s.n_minus_mu3);
        if (s.covariance)
            for (int i = 0; i < 3; ++i)
                for (int k = i; k < 3; ++k) {
                    const std::string ij = std::to_string(i + 1) + std::to_string(k + 1);
                    row("cov" + ij, {s.covariance->empirical[i][k], s.covariance->empirical_se[i][k]});
                    row("xi" + ij, {s.covariance->xi_mean[i][k], s.covariance->xi_se[i][k]});
                }
        if (s.density) {
            row("coef_y", s.density->coef_y);
            row("coef_y3", s.density->coef_y3);
        }
        if (s.distances) {
            row("sup_normal", {s.distances->sup_normal, s.distances->se_sup_normal});
            row("sup_corrected", {s.distances->sup_corrected, s.distances->se_sup_corrected});
        }
    }
    return out.str();
}

void write_statistics_csv(std::ostream& out, std::span<const ReplicationRecord> records) {
    out << "rep,seed,n,status,v_n,v_limit,f_n,c_limit,m_n,n1,n2,n3,n4,n5,z_n,studentized,residual,error\n";
    out << std::setprecision(17);
    for (const ReplicationRecord& r : records) {
        const ExpansionTerms& t = r.terms;
        out << r.index << ',' << r.seed << ',' << t.n << ',' << (r.ok ? "ok" : "failed");
        if (r.ok) {
            out << ',' << t.v_n << ',' << t.v_limit << ',' << t.f_n << ',' << t.c_limit << ',' << t.m_n;
            for (double v : t.n_terms) out << ',' << v;
            out << ',' << t.z_n << ',';
            if (t.studentized_ok) out << t.studentized;
            out << ',' << t.residual << ",\n";
        } else {
            std::string msg = r.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            out << ",,,,,,,,,,,,,," << msg << '\n';
        }
    }
}

void write_symbols_csv(std::ostream& out, int n, std::span<const ReplicationRecord> records) {
    out << "rep,seed,n";
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) out << ",xi" << i << j;
    out << ",mu3,c2,c3,c4,h1_tilde,h2,h3_tilde,h4,h5,lambda2\n";
    out << std::setprecision(17);
    for (const ReplicationRecord& r : records) {
        if (!r.ok || !r.has_symbols) continue;
        const SymbolCoefficients& s = r.symbols;
        out << r.index << ',' << r.seed << ',' << n;
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) out << ',' << s.xi[i][j];
        out << ',' << s.mu3 << ',' << s.c2 << ',' << s.c3 << ',' << s.c4 << ',' << s.h1_tilde << ',' << s.h2 << ','
            << s.h3_tilde << ',' << s.h4 << ',' << s.h5 << ',' << s.lambda2 << '\n';
    }
}

}  // namespace pvedge
