#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cpsched::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, GreaterEqual, Equal };

struct Constraint {
    std::vector<double> coeffs;  // dense, one entry per variable
    Relation relation = Relation::LessEqual;
    double rhs = 0.0;
    std::string name;
};

struct VariableBounds {
    double lower = 0.0;
    double upper = kInfinity;
};

/// Minimize c^T x subject to linear rows and per-variable bounds.
///
/// Lower bounds must be finite (the scheduling models never need free
/// variables); upper bounds may be +inf.
struct LinearProgram {
    std::vector<double> objective;
    std::vector<Constraint> constraints;
    std::vector<VariableBounds> bounds;
    std::vector<std::string> names;

    std::size_t num_variables() const { return objective.size(); }
    std::size_t num_constraints() const { return constraints.size(); }

    std::size_t add_variable(std::string name, double cost, double lower = 0.0,
                             double upper = kInfinity);

    using Terms = std::vector<std::pair<std::size_t, double>>;
    /// Repeated indices accumulate.
    std::size_t add_constraint(const Terms& terms, Relation relation, double rhs,
                               std::string name = {});

    /// Throws std::invalid_argument when shapes disagree or a value is NaN.
    void validate() const;
};

enum class Status { Optimal, Infeasible, Unbounded };

std::string to_string(Status status);

struct LpSolution {
    Status status = Status::Infeasible;
    std::vector<double> x;
    double objective_value = 0.0;
    std::size_t iterations = 0;
    /// Dual multipliers in the user's row orientation (Optimal only):
    /// y <= 0 on <= rows, y >= 0 on >= rows, free on = rows.
    std::vector<double> row_duals;
    /// Multipliers of the finite upper bounds (<= 0; zero where hi = +inf).
    std::vector<double> upper_bound_duals;
};

enum class Pricing {
    /// Smallest-index entering and leaving choice throughout.
    Bland,
    /// Most negative reduced cost, switching to Bland's rule during runs of
    /// degenerate pivots.
    DantzigBlandFallback,
};

struct SolverOptions {
    double pivot_tol = 1e-9;
    double feasibility_tol = 1e-7;
    double optimality_tol = 1e-9;
    std::size_t max_iterations = 50'000;
    Pricing pricing = Pricing::Bland;
    std::size_t degenerate_run_before_bland = 30;
};

class IterationLimitError : public std::runtime_error {
public:
    explicit IterationLimitError(std::size_t iterations);
};

/// One row of the standardized problem: sum_j coeffs[j] * x'_j (+/- slack) = rhs
/// with rhs >= 0 and x' = x - lower >= 0.
struct StandardRow {
    enum class Kind { Slack, SurplusArtificial, Artificial };
    enum class Origin { UserRow, UpperBound };
    std::vector<double> coeffs;
    double rhs = 0.0;
    Kind kind = Kind::Slack;
    Origin origin = Origin::UserRow;
    std::size_t source = 0;  // constraint index or variable index
    double scale = 1.0;      // standardized = scale * user row (sign included)
};

struct StandardForm {
    std::size_t num_structural = 0;
    std::vector<double> cost;   // per structural column
    std::vector<double> shift;  // x = shift + x'
    double objective_offset = 0.0;
    std::vector<StandardRow> rows;

    std::size_t num_slacks() const;
    std::size_t num_artificials() const;
    /// Restores user-variable values from standardized ones.
    std::vector<double> recover(const std::vector<double>& standardized) const;
};

/// Converts >= / = rows via surplus and artificial variables, finite upper
/// bounds via explicit <= rows, and equilibrates each row to unit max norm.
StandardForm standardize(const LinearProgram& lp);

/// Two-phase primal simplex on a dense tableau.
LpSolution solve(const LinearProgram& lp, const SolverOptions& options = {});

/// Plain-text dump (see docs/lp_format.md). Values use 17 significant
/// digits so restore(dump(lp)) reproduces every coefficient exactly.
void dump(const LinearProgram& lp, std::ostream& out);
LinearProgram restore(std::istream& in);

}  // namespace cpsched::lp
