#pragma once

#include "pvedge/density.hpp"
#include "pvedge/gaussian.hpp"
#include "pvedge/model.hpp"
#include "pvedge/parallel.hpp"
#include "pvedge/statistics.hpp"
#include "pvedge/symbols.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace pvedge {

/// Settings of a Monte Carlo study. Keys of the text form match the field names.
struct ExperimentConfig {
    /// tanh-vol, bm, bm-drift or custom (uses b1, b2, x0).
    std::string model = "tanh-vol";
    std::string b1 = "1", b2 = "0";
    double x0 = 0.0;
    double p = 2.0;
    std::vector<int> n_list{64, 256, 1024};
    int refine = 16;
    std::size_t replications = 10000;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    /// Subset of lln, clt, expansion, symbols, density, studentized.
    std::set<std::string> analyses{"lln", "clt", "expansion", "symbols", "density", "studentized"};
    int workers = 0;
    std::size_t gamma_replications = 20000;
    std::optional<double> bandwidth;
    int bootstrap = 200;
    /// csv or json.
    std::string format = "json";
    /// Write per-replication CSV files and the JSON report into out_dir.
    bool write_artifacts = true;

    bool wants(const std::string& analysis) const { return analyses.count(analysis) > 0; }
    /// Symbols are computed when any analysis that consumes them is requested.
    bool needs_symbols() const;

    /// Sets one field from text; throws ConfigError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// Throws ConfigError when an invariant fails.
    void validate() const;

    /// key = value lines; '#' starts a comment. Throws ConfigError.
    static ExperimentConfig from_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
};

/// Model described by the configuration; throws ConfigError for unknown names.
DiffusionModel make_model(const ExperimentConfig& config);

/// Outcome of the per-path pipeline for one replication.
struct ReplicationRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    ExpansionTerms terms;
    bool has_symbols = false;
    SymbolCoefficients symbols;
};

/// Runs replications 0..R-1 at one n with seeds substream_seed(master, r).
/// Errors of the library are recorded per replication; results are stored by
/// index, so the output does not depend on the worker count.
std::vector<ReplicationRecord> run_replications(const DiffusionModel& model, const ExperimentConfig& config,
                                                int n, const GammaConstants* gammas);

/// Distances between the empirical CDF of a sample and the normal and
/// corrected CDFs, with bootstrap standard errors.
struct DistributionMetrics {
    std::size_t samples = 0;
    double sup_normal = 0, sup_corrected = 0;
    double iae_normal = 0, iae_corrected = 0;
    double se_sup_normal = 0, se_sup_corrected = 0;
    double se_iae_normal = 0, se_iae_corrected = 0;
};

/// Throws ContractViolation for an empty sample. Bootstrap resamples are drawn
/// as multinomial counts from SequentialRng(seed, 0).
DistributionMetrics compare_distributions(std::span<const double> samples, double coef_y, double coef_y3,
                                          double dn, int bootstrap = 200, std::uint64_t seed = 0);

struct Estimate {
    double mean = 0, se = 0;
};

/// Empirical covariance of (M_n, dn^{-1/2}(F_n - C), N_n - mu3) against the
/// sample mean of the integrated covariance densities.
struct CovarianceSummary {
    std::array<std::array<double, 3>, 3> empirical{}, empirical_se{}, xi_mean{}, xi_se{};
};

struct DensitySummary {
    double bandwidth = 0;
    bool bandwidth_overridden = false;
    Estimate e_h1, e_h2, e_h3, e_h4, e_h5, coef_y, coef_y3;
    SignChanges sign_changes;
};

/// Aggregates at one n.
struct NSummary {
    int n = 0;
    double dn = 0;
    std::size_t replications = 0, failures = 0, nonpositive_f_n = 0;
    std::vector<std::string> failure_examples;
    /// Mean and standard error of every ExpansionTerms field, in a fixed order.
    std::vector<std::pair<std::string, Estimate>> terms;
    std::optional<Estimate> lln_error;
    /// sqrt(E[residual^2] / dn).
    std::optional<Estimate> residual_l2;
    std::optional<Estimate> mu3, n_minus_mu3;
    std::optional<CovarianceSummary> covariance;
    std::optional<DensitySummary> density;
    std::optional<DistributionMetrics> distances;
};

struct EdgeworthReport {
    ExperimentConfig config;
    std::string model_name;
    std::string power_warning;
    std::optional<GammaConstants> gammas;
    std::vector<NSummary> per_n;
    /// log(residual_l2) slope against log(dn) between consecutive n.
    std::vector<double> residual_slopes;
};

/// Seed of the universal-constant run derived from the master seed.
std::uint64_t gamma_seed(std::uint64_t master);

/// Aggregates the records of one n into a summary.
NSummary summarize(const ExperimentConfig& config, int n, std::span<const ReplicationRecord> records);

/// Full study. Throws FailureThreshold when more than 1% of the replications
/// at some n fail. Writes artifacts when config.write_artifacts is set.
EdgeworthReport run_experiment(const ExperimentConfig& config);

/// Deterministic JSON text of the report.
std::string report_json(const EdgeworthReport& report);
/// n,quantity,mean,se rows of the main summary figures.
std::string report_csv(const EdgeworthReport& report);

/// rep,seed,n,status,v_n,v_limit,f_n,c_limit,m_n,n1..n5,z_n,studentized,residual,error
void write_statistics_csv(std::ostream& out, std::span<const ReplicationRecord> records);
/// rep,seed,n,xi00..xi33 (upper triangle),mu3,c2,c3,c4,h1_tilde,h2,h3_tilde,h4,h5,lambda2
void write_symbols_csv(std::ostream& out, int n, std::span<const ReplicationRecord> records);

}  // namespace pvedge
