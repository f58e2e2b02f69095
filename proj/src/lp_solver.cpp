#include "cpsched/lp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cpsched::lp {

std::size_t LinearProgram::add_variable(std::string name, double cost, double lower,
                                        double upper) {
    objective.push_back(cost);
    bounds.push_back({lower, upper});
    names.push_back(std::move(name));
    for (auto& row : constraints) row.coeffs.push_back(0.0);
    return objective.size() - 1;
}

std::size_t LinearProgram::add_constraint(const Terms& terms, Relation relation, double rhs,
                                          std::string name) {
    Constraint row;
    row.coeffs.assign(num_variables(), 0.0);
    for (const auto& [index, value] : terms) {
        if (index >= num_variables())
            throw std::invalid_argument("constraint '" + name + "' references unknown variable " +
                                        std::to_string(index));
        row.coeffs[index] += value;
    }
    row.relation = relation;
    row.rhs = rhs;
    row.name = std::move(name);
    constraints.push_back(std::move(row));
    return constraints.size() - 1;
}

void LinearProgram::validate() const {
    const std::size_t n = num_variables();
    if (n == 0) throw std::invalid_argument("linear program has no variables");
    if (bounds.size() != n || names.size() != n)
        throw std::invalid_argument("bounds/names length differs from objective length");
    for (std::size_t j = 0; j < n; ++j) {
        if (std::isnan(objective[j])) throw std::invalid_argument("NaN in objective");
        if (std::isnan(bounds[j].lower) || std::isnan(bounds[j].upper))
            throw std::invalid_argument("NaN in bounds of variable " + names[j]);
        if (!std::isfinite(bounds[j].lower))
            throw std::invalid_argument("variable " + names[j] + " needs a finite lower bound");
    }
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const auto& row = constraints[i];
        if (row.coeffs.size() != n)
            throw std::invalid_argument("constraint " + std::to_string(i) + " has wrong length");
        if (!std::isfinite(row.rhs))
            throw std::invalid_argument("non-finite rhs in constraint " + std::to_string(i));
        for (double v : row.coeffs)
            if (!std::isfinite(v))
                throw std::invalid_argument("non-finite coefficient in constraint " +
                                            std::to_string(i));
    }
}

std::string to_string(Status status) {
    switch (status) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
    }
    return "unknown";
}

IterationLimitError::IterationLimitError(std::size_t iterations)
    : std::runtime_error("simplex iteration limit reached after " + std::to_string(iterations) +
                         " pivots (possible cycling or ill-conditioning)") {}

std::size_t StandardForm::num_slacks() const {
    std::size_t count = 0;
    for (const auto& row : rows)
        if (row.kind != StandardRow::Kind::Artificial) ++count;
    return count;
}

std::size_t StandardForm::num_artificials() const {
    std::size_t count = 0;
    for (const auto& row : rows)
        if (row.kind != StandardRow::Kind::Slack) ++count;
    return count;
}

std::vector<double> StandardForm::recover(const std::vector<double>& standardized) const {
    std::vector<double> x(num_structural);
    for (std::size_t j = 0; j < num_structural; ++j) x[j] = shift[j] + standardized.at(j);
    return x;
}

namespace {

// Appends one standardized row. `slack_sign` is +1 for a <= row and -1 for a
// >= row; 0 marks an equality.
void push_row(StandardForm& form, std::vector<double> coeffs, double rhs, int slack_sign,
              StandardRow::Origin origin, std::size_t source) {
    double norm = 0.0;
    for (double v : coeffs) norm = std::max(norm, std::abs(v));
    if (norm == 0.0) norm = 1.0;

    double sign = 1.0;
    if (rhs < 0.0) {
        sign = -1.0;
        slack_sign = -slack_sign;
    }
    StandardRow row;
    row.scale = sign / norm;
    for (double& v : coeffs) v *= row.scale;
    row.coeffs = std::move(coeffs);
    row.rhs = rhs * row.scale;
    row.origin = origin;
    row.source = source;
    if (slack_sign > 0)
        row.kind = StandardRow::Kind::Slack;
    else if (slack_sign < 0)
        row.kind = StandardRow::Kind::SurplusArtificial;
    else
        row.kind = StandardRow::Kind::Artificial;
    form.rows.push_back(std::move(row));
}

}  // namespace

StandardForm standardize(const LinearProgram& lp) {
    lp.validate();
    const std::size_t n = lp.num_variables();
    StandardForm form;
    form.num_structural = n;
    form.cost = lp.objective;
    form.shift.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        form.shift[j] = lp.bounds[j].lower;
        form.objective_offset += lp.objective[j] * lp.bounds[j].lower;
    }

    for (std::size_t i = 0; i < lp.constraints.size(); ++i) {
        const auto& c = lp.constraints[i];
        double rhs = c.rhs;
        for (std::size_t j = 0; j < n; ++j) rhs -= c.coeffs[j] * form.shift[j];
        const int slack_sign = c.relation == Relation::LessEqual      ? 1
                               : c.relation == Relation::GreaterEqual ? -1
                                                                      : 0;
        push_row(form, c.coeffs, rhs, slack_sign, StandardRow::Origin::UserRow, i);
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(lp.bounds[j].upper)) continue;
        std::vector<double> coeffs(n, 0.0);
        coeffs[j] = 1.0;
        push_row(form, std::move(coeffs), lp.bounds[j].upper - lp.bounds[j].lower, 1,
                 StandardRow::Origin::UpperBound, j);
    }
    return form;
}

namespace {

class Tableau {
public:
    Tableau(const StandardForm& form, const SolverOptions& options)
        : form_(form), opt_(options), m_(form.rows.size()) {
        const std::size_t n = form.num_structural;
        // Column layout: structural, then auxiliary columns row by row.
        unit_col_.resize(m_);
        std::size_t next = n;
        std::vector<std::pair<std::size_t, double>> aux;  // (column, coefficient) per row
        std::vector<std::size_t> surplus_col(m_, SIZE_MAX);
        for (std::size_t i = 0; i < m_; ++i) {
            switch (form.rows[i].kind) {
                case StandardRow::Kind::Slack:
                    unit_col_[i] = next++;
                    break;
                case StandardRow::Kind::SurplusArtificial:
                    surplus_col[i] = next++;
                    unit_col_[i] = next++;
                    break;
                case StandardRow::Kind::Artificial:
                    unit_col_[i] = next++;
                    break;
            }
        }
        cols_ = next;
        width_ = cols_ + 1;
        artificial_.assign(cols_, false);
        cost_.assign(cols_, 0.0);
        for (std::size_t j = 0; j < n; ++j) cost_[j] = form.cost[j];

        data_.assign((m_ + 1) * width_, 0.0);
        basis_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            const auto& row = form.rows[i];
            double* t = row_ptr(i);
            std::copy(row.coeffs.begin(), row.coeffs.end(), t);
            t[unit_col_[i]] = 1.0;
            if (surplus_col[i] != SIZE_MAX) t[surplus_col[i]] = -1.0;
            if (row.kind != StandardRow::Kind::Slack) artificial_[unit_col_[i]] = true;
            t[cols_] = row.rhs;
            basis_[i] = unit_col_[i];
        }
    }

    std::size_t iterations() const { return iterations_; }

    // Phase 1: minimize the sum of artificials. Returns the phase-1 optimum.
    double phase_one() {
        double* obj = row_ptr(m_);
        std::fill(obj, obj + width_, 0.0);
        bool any = false;
        for (std::size_t j = 0; j < cols_; ++j)
            if (artificial_[j]) {
                obj[j] = 1.0;
                any = true;
            }
        if (!any) return 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (!artificial_[basis_[i]]) continue;
            const double* t = row_ptr(i);
            for (std::size_t k = 0; k < width_; ++k) obj[k] -= t[k];
        }
        run(/*block_artificials=*/false);
        return -obj[cols_];
    }

    // Pivots basic artificials (all at zero level) out where possible.
    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (!artificial_[basis_[i]]) continue;
            const double* t = row_ptr(i);
            std::size_t best = SIZE_MAX;
            double best_abs = opt_.pivot_tol;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (artificial_[j]) continue;
                if (std::abs(t[j]) > best_abs) {
                    best_abs = std::abs(t[j]);
                    best = j;
                }
            }
            if (best == SIZE_MAX) continue;  // redundant row
            row_ptr(i)[cols_] = 0.0;
            pivot(i, best);
        }
    }

    // Returns false when the problem is unbounded.
    bool phase_two() {
        double* obj = row_ptr(m_);
        std::fill(obj, obj + width_, 0.0);
        for (std::size_t j = 0; j < cols_; ++j) obj[j] = cost_[j];
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost_[basis_[i]];
            if (cb == 0.0) continue;
            const double* t = row_ptr(i);
            for (std::size_t k = 0; k < width_; ++k) obj[k] -= cb * t[k];
        }
        return run(/*block_artificials=*/true);
    }

    std::vector<double> standardized_solution() const {
        std::vector<double> x(form_.num_structural, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < form_.num_structural)
                x[basis_[i]] = std::max(0.0, row_ptr(i)[cols_]);
        return x;
    }

    // Multiplier of standardized row i after phase 2.
    double standardized_dual(std::size_t i) const { return -row_ptr(m_)[unit_col_[i]]; }

private:
    double* row_ptr(std::size_t i) { return data_.data() + i * width_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * width_; }

    bool run(bool block_artificials) {
        const double* obj = row_ptr(m_);
        std::size_t degenerate_run = 0;
        for (;;) {
            const bool bland = opt_.pricing == Pricing::Bland ||
                               degenerate_run >= opt_.degenerate_run_before_bland;
            std::size_t entering = SIZE_MAX;
            double most_negative = -opt_.optimality_tol;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (block_artificials && artificial_[j]) continue;
                if (obj[j] < most_negative) {
                    entering = j;
                    if (bland) break;
                    most_negative = obj[j];
                }
            }
            if (entering == SIZE_MAX) return true;

            std::size_t leaving = SIZE_MAX;
            double best_ratio = kInfinity;
            double best_pivot = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double* t = row_ptr(i);
                const double a = t[entering];
                if (a <= opt_.pivot_tol) continue;
                const double ratio = std::max(t[cols_], 0.0) / a;
                bool take = false;
                if (leaving == SIZE_MAX || ratio < best_ratio - 1e-12) {
                    take = true;
                } else if (ratio <= best_ratio + 1e-12) {
                    take = bland ? basis_[i] < basis_[leaving] : a > best_pivot;
                }
                if (take) {
                    leaving = i;
                    best_ratio = std::min(ratio, best_ratio);
                    best_pivot = a;
                }
            }
            if (leaving == SIZE_MAX) return false;

            if (++iterations_ > opt_.max_iterations) throw IterationLimitError(opt_.max_iterations);
            degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
            pivot(leaving, entering);
        }
    }

    void pivot(std::size_t r, std::size_t e) {
        double* prow = row_ptr(r);
        const double inv = 1.0 / prow[e];
        nz_.clear();
        for (std::size_t k = 0; k < width_; ++k) {
            if (prow[k] == 0.0) continue;
            prow[k] *= inv;
            nz_.push_back(k);
        }
        prow[e] = 1.0;
        for (std::size_t i = 0; i <= m_; ++i) {
            if (i == r) continue;
            double* t = row_ptr(i);
            const double f = t[e];
            if (f == 0.0) continue;
            for (std::size_t k : nz_) {
                double v = t[k] - f * prow[k];
                if (k != cols_ && std::abs(v) < 1e-13) v = 0.0;
                t[k] = v;
            }
            t[e] = 0.0;
        }
        basis_[r] = e;
    }

    const StandardForm& form_;
    const SolverOptions& opt_;
    std::size_t m_;
    std::size_t cols_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> unit_col_;
    std::vector<bool> artificial_;
    std::vector<double> cost_;
    std::vector<std::size_t> nz_;
    std::size_t iterations_ = 0;
};

}  // namespace

LpSolution solve(const LinearProgram& lp, const SolverOptions& options) {
    const StandardForm form = standardize(lp);
    Tableau tableau(form, options);

    LpSolution solution;
    const double infeasibility = tableau.phase_one();
    if (infeasibility > options.feasibility_tol) {
        solution.status = Status::Infeasible;
        solution.iterations = tableau.iterations();
        return solution;
    }
    tableau.drive_out_artificials();
    const bool bounded = tableau.phase_two();
    solution.iterations = tableau.iterations();
    if (!bounded) {
        solution.status = Status::Unbounded;
        return solution;
    }

    solution.status = Status::Optimal;
    solution.x = form.recover(tableau.standardized_solution());
    solution.objective_value = 0.0;
    for (std::size_t j = 0; j < lp.num_variables(); ++j)
        solution.objective_value += lp.objective[j] * solution.x[j];

    solution.row_duals.assign(lp.num_constraints(), 0.0);
    solution.upper_bound_duals.assign(lp.num_variables(), 0.0);
    for (std::size_t i = 0; i < form.rows.size(); ++i) {
        const auto& row = form.rows[i];
        const double y = tableau.standardized_dual(i) * row.scale;
        if (row.origin == StandardRow::Origin::UserRow)
            solution.row_duals[row.source] = y;
        else
            solution.upper_bound_duals[row.source] = y;
    }
    return solution;
}

}  // namespace cpsched::lp
