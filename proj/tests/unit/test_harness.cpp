#include "pvedge/errors.hpp"
#include "pvedge/harness.hpp"
#include "pvedge/path.hpp"
#include "pvedge/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace pvedge;

namespace {

Estimate term(const NSummary& s, const std::string& name) {
    for (const auto& [key, value] : s.terms)
        if (key == name) return value;
    ADD_FAILURE() << "missing term " << name;
    return {};
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.model = "tanh-vol";
    c.n_list = {16};
    c.refine = 8;
    c.replications = 1000;
    c.gamma_replications = 1000;
    c.bootstrap = 20;
    c.seed = 42;
    c.write_artifacts = false;
    return c;
}

}  // namespace

TEST(ExperimentConfig, ParsesKeyValueText) {
    const ExperimentConfig c = ExperimentConfig::from_text(
        "# study\n"
        "model = bm-drift\n"
        "p = 4   # even power\n"
        "n = 16, 64\n"
        "refine = 32\n"
        "reps = 500\n"
        "seed = 9\n"
        "analyses = lln, expansion\n"
        "bandwidth = 0.2\n"
        "format = csv\n"
        "write_artifacts = false\n");
    EXPECT_EQ(c.model, "bm-drift");
    EXPECT_EQ(c.p, 4.0);
    EXPECT_EQ(c.n_list, (std::vector<int>{16, 64}));
    EXPECT_EQ(c.refine, 32);
    EXPECT_EQ(c.replications, 500u);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_TRUE(c.wants("lln"));
    EXPECT_FALSE(c.wants("density"));
    EXPECT_FALSE(c.needs_symbols());
    ASSERT_TRUE(c.bandwidth.has_value());
    EXPECT_EQ(*c.bandwidth, 0.2);
    EXPECT_EQ(c.format, "csv");
    EXPECT_FALSE(c.write_artifacts);
}

TEST(ExperimentConfig, LaterSettingsOverrideEarlierOnes) {
    ExperimentConfig c = ExperimentConfig::from_text("seed = 3\nbandwidth = 0.5\n");
    c.set("seed", "11");
    c.set("bandwidth", "auto");
    EXPECT_EQ(c.seed, 11u);
    EXPECT_FALSE(c.bandwidth.has_value());
}

TEST(ExperimentConfig, RejectsBadInput) {
    EXPECT_THROW(ExperimentConfig::from_text("colour = blue\n"), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_text("p = two\n"), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_text("just a line\n"), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_text("write_artifacts = maybe\n"), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_file("/nonexistent/config.txt"), ConfigError);
}

TEST(ExperimentConfig, ValidateChecksInvariants) {
    auto bad = [](const std::string& key, const std::string& value) {
        ExperimentConfig c;
        c.set(key, value);
        EXPECT_THROW(c.validate(), ConfigError) << key << " = " << value;
    };
    bad("n", "12");
    bad("n", "1");
    bad("refine", "4");
    bad("refine", "24");
    bad("reps", "0");
    bad("p", "1.5");
    bad("model", "heston");
    bad("analyses", "lln, plots");
    bad("format", "xml");
    bad("bandwidth", "-1");
    bad("gamma_replications", "10");
    EXPECT_NO_THROW(ExperimentConfig{}.validate());
    EXPECT_THROW(make_model(ExperimentConfig::from_text("model = heston\n")), ConfigError);
}

TEST(RunExperiment, SingleBrownianPathHasHandValues) {
    ExperimentConfig c;
    c.model = "bm";
    c.p = 2.0;
    c.n_list = {4};
    c.refine = 8;
    c.replications = 1;
    c.seed = 17;
    c.analyses = {"lln", "expansion"};
    c.write_artifacts = false;
    const EdgeworthReport rep = run_experiment(c);
    ASSERT_EQ(rep.per_n.size(), 1u);
    const NSummary& s = rep.per_n[0];
    EXPECT_EQ(s.failures, 0u);

    const SimulatedPath path = simulate_path(DiffusionModel::brownian(), 4, 8, substream_seed(17, 0));
    double v = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double d = path.w[path.obs(i + 1)] - path.w[path.obs(i)];
        v += d * d;
    }
    EXPECT_NEAR(term(s, "v_n").mean, v, 1e-14);
    EXPECT_NEAR(term(s, "v_limit").mean, 1.0, 1e-14);
    EXPECT_NEAR(term(s, "m_n").mean, (v - 1.0) / std::sqrt(0.25), 1e-13);
    EXPECT_NEAR(term(s, "z_n").mean, (v - 1.0) / std::sqrt(0.25), 1e-13);
    for (const char* k : {"n1", "n2", "n3", "n4", "n5", "residual"}) EXPECT_NEAR(term(s, k).mean, 0.0, 1e-13) << k;
    EXPECT_EQ(term(s, "v_n").se, 0.0);
}

TEST(RunExperiment, ReportIsIdenticalForAnyWorkerCount) {
    ExperimentConfig one = small_config(), four = small_config();
    one.workers = 1;
    four.workers = 4;
    const std::string a = report_json(run_experiment(one));
    const std::string b = report_json(run_experiment(four));
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("\"density\""), std::string::npos);
}

TEST(RunExperiment, ReportCarriesStandardErrors) {
    const EdgeworthReport rep = run_experiment(small_config());
    const NSummary& s = rep.per_n.at(0);
    for (const auto& [key, value] : s.terms) EXPECT_GT(value.se, 0.0) << key;
    ASSERT_TRUE(s.density.has_value());
    EXPECT_GT(s.density->e_h1.se, 0.0);
    ASSERT_TRUE(s.distances.has_value());
    EXPECT_GT(s.distances->se_sup_normal, 0.0);
    ASSERT_TRUE(rep.gammas.has_value());
    EXPECT_GT(rep.gammas->se_gamma1, 0.0);
    EXPECT_FALSE(report_csv(rep).empty());
}

TEST(RunExperiment, WritesArtifacts) {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "pvedge_harness_artifacts";
    std::filesystem::remove_all(dir);
    ExperimentConfig c = small_config();
    c.out_dir = dir.string();
    c.write_artifacts = true;
    run_experiment(c);
    EXPECT_TRUE(std::filesystem::exists(dir / "statistics_n16.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "symbols_n16.csv"));
    std::filesystem::remove_all(dir);
}

TEST(RunExperiment, AbortsWhenTooManyReplicationsFail) {
    ExperimentConfig c;
    c.model = "custom";
    c.b1 = "1";
    c.b2 = "1e200*x*x";
    c.x0 = 1.0;
    c.n_list = {4};
    c.refine = 8;
    c.replications = 50;
    c.analyses = {"lln"};
    c.write_artifacts = false;
    EXPECT_THROW(run_experiment(c), FailureThreshold);
}

TEST(Summarize, CountsFailuresAndKeepsExamples) {
    ExperimentConfig c = small_config();
    c.analyses = {"lln"};
    c.replications = 20;
    std::vector<ReplicationRecord> recs =
        run_replications(make_model(c), c, 16, nullptr);
    for (int i = 0; i < 7; ++i) {
        recs[i].ok = false;
        recs[i].error = "failure " + std::to_string(i);
    }
    const NSummary s = summarize(c, 16, recs);
    EXPECT_EQ(s.replications, 20u);
    EXPECT_EQ(s.failures, 7u);
    EXPECT_EQ(s.failure_examples.size(), 5u);
    EXPECT_EQ(s.failure_examples.front(), "failure 0");
}

TEST(RunReplications, SeedsAreSubstreamsAndRecordedPerRow) {
    ExperimentConfig c = small_config();
    c.analyses = {"lln"};
    c.replications = 10;
    const auto recs = run_replications(make_model(c), c, 16, nullptr);
    for (std::size_t r = 0; r < recs.size(); ++r) {
        EXPECT_EQ(recs[r].index, r);
        EXPECT_EQ(recs[r].seed, substream_seed(42, r));
        EXPECT_TRUE(recs[r].ok);
    }
    std::ostringstream out;
    write_statistics_csv(out, recs);
    EXPECT_NE(out.str().find(std::to_string(substream_seed(42, 3))), std::string::npos);
}

TEST(RunReplications, NeighbouringReplicationsAreUncorrelated) {
    ExperimentConfig c = small_config();
    c.analyses = {"lln"};
    c.replications = 4000;
    const auto recs = run_replications(make_model(c), c, 16, nullptr);
    double mean = 0.0;
    for (const auto& r : recs) mean += r.terms.m_n;
    mean /= static_cast<double>(recs.size());
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < recs.size(); ++r) {
        const double d = recs[r].terms.m_n - mean;
        den += d * d;
        if (r + 1 < recs.size()) num += d * (recs[r + 1].terms.m_n - mean);
    }
    EXPECT_LT(std::abs(num / den), 3.0 / std::sqrt(static_cast<double>(recs.size())));
}

TEST(CompareDistributions, QuantileGridIsWithinOneOverR) {
    const std::size_t r = 2000;
    std::vector<double> y;
    for (std::size_t i = 0; i < r; ++i) y.push_back(normal_quantile((i + 0.5) / r));
    const DistributionMetrics m = compare_distributions(y, 0.0, 0.0, 0.0, 0);
    EXPECT_EQ(m.samples, r);
    EXPECT_LE(m.sup_normal, 1.0 / r);
    EXPECT_EQ(m.sup_normal, m.sup_corrected);
    EXPECT_EQ(m.iae_normal, m.iae_corrected);
    EXPECT_LT(m.iae_normal, 1e-3);
}

TEST(CompareDistributions, NormalSampleDistancesAreOrderRootR) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    const std::size_t r = 4000;
    std::vector<double> y(r);
    for (double& v : y) v = nd(gen);
    const DistributionMetrics m = compare_distributions(y, 0.0, 0.0, 0.0, 200, 3);
    EXPECT_LT(m.sup_normal, 2.0 / std::sqrt(static_cast<double>(r)));
    EXPECT_EQ(m.sup_normal, m.sup_corrected);
    EXPECT_GT(m.se_sup_normal, 0.0);
    EXPECT_LT(m.se_sup_normal, 1.0 / std::sqrt(static_cast<double>(r)));
    // A correction that does not fit the sample moves the corrected distance away.
    const DistributionMetrics shifted = compare_distributions(y, 2.0, 0.0, 0.04, 0);
    EXPECT_GT(shifted.sup_corrected, shifted.sup_normal);
}

TEST(CompareDistributions, BootstrapIsReproducible) {
    std::vector<double> y;
    for (int i = 0; i < 300; ++i) y.push_back(std::sin(1.7 * i));
    const DistributionMetrics a = compare_distributions(y, 0.3, -0.1, 0.01, 50, 8);
    const DistributionMetrics b = compare_distributions(y, 0.3, -0.1, 0.01, 50, 8);
    EXPECT_EQ(a.se_sup_corrected, b.se_sup_corrected);
    EXPECT_EQ(a.se_iae_normal, b.se_iae_normal);
}

TEST(CompareDistributions, RejectsEmptyOrNonFiniteSamples) {
    const std::vector<double> empty;
    EXPECT_THROW(compare_distributions(empty, 0.0, 0.0, 0.0), ContractViolation);
    const std::vector<double> bad{0.1, std::nan("")};
    EXPECT_THROW(compare_distributions(bad, 0.0, 0.0, 0.0), ContractViolation);
}

TEST(ReportCsv, SymbolsCsvHasOneRowPerReplication) {
    ExperimentConfig c = small_config();
    c.analyses = {"symbols"};
    c.replications = 12;
    const GammaConstants g{16.0 / 3, 8.0 / 3, 32.0 / 3, 8.0 / 3};
    const auto recs = run_replications(make_model(c), c, 16, &g);
    std::ostringstream out;
    write_symbols_csv(out, 16, recs);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("rep,seed,n,", 0), 0u);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 12);
}
