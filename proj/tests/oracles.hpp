#pragma once

// Reference implementations used to cross-check the library. None of these
// call into the code they check.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cpsched/dcmodel.hpp"
#include "cpsched/lp_solver.hpp"
#include "cpsched/quantile_model.hpp"

namespace oracle {

/// Sort a copy and index the k-th smallest, k = ceil(beta * n); +inf for beta > 1.
double sorted_quantile(std::vector<double> scores, double beta);

struct LpResult {
    cpsched::lp::Status status = cpsched::lp::Status::Infeasible;
    double objective = 0.0;
};

/// Brute-force vertex enumeration for small LPs (n <= 6). Unboundedness is
/// detected by comparing optima under two large artificial boxes.
LpResult vertex_enumeration(const cpsched::lp::LinearProgram& lp);

/// Forward pass recomputed from the flat weight layout.
struct ForwardTrace {
    std::vector<double> output;
    std::vector<double> preactivations;  // hidden units only
};
ForwardTrace forward(const cpsched::QuantileModel& model, std::span<const double> x);

/// Mean pinball loss computed from forward().
double pinball_loss(const cpsched::QuantileModel& model, const cpsched::Matrix& x,
                    const cpsched::Matrix& y, double tau);

/// Central differences of pinball_loss() with respect to every weight.
cpsched::Vector finite_difference_gradient(const cpsched::QuantileModel& model,
                                           const cpsched::Matrix& x, const cpsched::Matrix& y,
                                           double tau, double h);

/// Smallest |residual| and smallest |hidden preactivation| over a batch.
struct KinkDistance {
    double residual = 0.0;
    double preactivation = 0.0;
};
KinkDistance kink_distance(const cpsched::QuantileModel& model, const cpsched::Matrix& x,
                           const cpsched::Matrix& y);

/// Re-evaluates every scheduling constraint straight from the model
/// equations. Returns one message per violated constraint.
std::vector<std::string> check_schedule(const cpsched::dc::DataCenterParams& params,
                                        const cpsched::dc::EssParams& ess,
                                        const cpsched::dc::WorkloadTrace& trace,
                                        const cpsched::dc::MarketSeries& market,
                                        std::span<const double> pv_lower,
                                        const cpsched::dc::ScheduleSolution& s,
                                        double tol = 1e-6);

}  // namespace oracle
