#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pvedge {

/// Sample sizes of the validation criteria. full() uses the acceptance sizes;
/// quick() is a smoke-scale run with the same checks.
struct ValidationBudget {
    std::string name;
    std::size_t gamma_reps;         ///< criterion 1
    std::size_t kappa_reps;         ///< criterion 2
    std::size_t expansion_reps;     ///< criterion 3
    int expansion_refine;
    std::size_t clt_reps;           ///< criterion 4
    int clt_n;
    int clt_refine;
    int degeneracy_seeds;           ///< criterion 5
    std::size_t studentized_reps;   ///< criterion 6
    int studentized_refine;
    int q_points;                   ///< criterion 7
    int malliavin_paths;            ///< criterion 8
    int malliavin_n, malliavin_refine;
    std::size_t lln_reps;           ///< criterion 9
    int lln_n;
    std::size_t lln_oracle_samples;

    static ValidationBudget full();
    static ValidationBudget quick();
    /// Throws ConfigError for names other than full and quick.
    static ValidationBudget named(const std::string& name);
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    /// Named figures in a fixed order, for the report.
    std::vector<std::pair<std::string, double>> values;
    std::string note;

    /// "[PASS] 3 stochastic expansion order: ..." style line.
    std::string line() const;
};

struct ValidationOptions {
    ValidationBudget budget = ValidationBudget::full();
    std::uint64_t seed = 20240601;
    int workers = 0;
};

CriterionResult check_quadratic_constants(const ValidationOptions& o);
CriterionResult check_kappa3_identity(const ValidationOptions& o);
CriterionResult check_expansion_order(const ValidationOptions& o);
CriterionResult check_joint_clt(const ValidationOptions& o);
CriterionResult check_constant_b1_degeneracy(const ValidationOptions& o);
CriterionResult check_studentized_density(const ValidationOptions& o);
CriterionResult check_q_polynomials(const ValidationOptions& o);
CriterionResult check_malliavin(const ValidationOptions& o);
CriterionResult check_lln_functionals(const ValidationOptions& o);

/// Criteria 1 through 9 in order.
std::vector<CriterionResult> run_validation(const ValidationOptions& o);

/// Deterministic JSON text of the results; contains no timing or worker count.
std::string validation_report_json(const ValidationOptions& o, const std::vector<CriterionResult>& results);

}  // namespace pvedge
