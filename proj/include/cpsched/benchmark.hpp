#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpsched/dataio.hpp"
#include "cpsched/quantile_model.hpp"
#include "cpsched/scheduler.hpp"

namespace cpsched::bench {

/// Everything a pipeline run needs. One master seed drives data synthesis,
/// the split and every training run.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out = "run";
    data::SynthConfig synth;
    TrainConfig train;
    double tau_low = 0.1;
    double tau_high = 0.9;
    double tau_point = 0.5;
    std::vector<sched::Method> methods = sched::scheduling_methods();
    std::vector<double> alphas{0.05, 0.1, 0.15, 0.2};
    std::vector<double> lambda_c{0.1};
    dc::DataCenterParams params;
    dc::EssParams ess;
    std::size_t max_test_days = 0;  // 0: every test day
    std::size_t schedule_day = 0;   // position within the test split

    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep the values of `base`; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Per-slot and per-day outcome tallies for one (method, alpha, lambda_c).
struct MethodResult {
    sched::Method method = sched::Method::AMV_CQR;
    double alpha = 0.0;
    double lambda_c = 0.0;
    std::size_t days = 0;
    std::size_t infeasible_days = 0;

    double mean_cost = 0.0;
    double mean_carbon = 0.0;
    double mean_width = 0.0;

    std::vector<double> hourly_violation;  // per-slot violation frequency
    std::vector<double> hourly_miss_low;   // per-slot P(PV < interval lower)
    std::vector<double> hourly_coverage;   // per-slot P(PV in interval)
    double average_violation = 0.0;       // mean over slots and days
    double average_violation_se = 0.0;    // standard error over days
    double max_hour_violation = 0.0;
    double max_hour_violation_se = 0.0;
    std::size_t max_hour = 0;
    double daily_violation = 0.0;  // fraction of days with any violated slot
    double average_miss_low = 0.0;
    double average_miss_low_se = 0.0;
    double max_hour_miss_low = 0.0;
    double max_hour_miss_low_se = 0.0;
    double average_coverage = 0.0;
    double min_hour_coverage = 0.0;

    /// Average-coverage methods report the slot-averaged rate; the others
    /// the worst slot.
    bool reports_average() const;
    double violation_rate() const;
    double violation_se() const;
    double miss_rate() const;
    double miss_se() const;
};

struct Report {
    std::vector<MethodResult> rows;
    std::size_t test_days = 0;
    std::string dataset_hash;
};

/// Trained forecasters plus the data they were fit on.
struct Workspace {
    data::Bundle bundle;
    sched::ForecastModels models;
};

/// Train the three quantile models on the proper-training rows.
sched::ForecastModels train_models(const data::Bundle& bundle, const RunConfig& cfg,
                                   std::vector<TrainingLog>* logs = nullptr);

/// Test rows used for evaluation (the first `max_test_days` when nonzero).
std::vector<std::size_t> evaluation_days(const Dataset& data, std::size_t max_test_days);

Report run_benchmark(const Workspace& ws, const RunConfig& cfg);

/// Test-set average coverage and mean interval width of one method at one
/// level; no scheduling involved.
struct CoverageWidth {
    double alpha = 0.0;
    double coverage = 0.0;
    double width = 0.0;
};

std::vector<CoverageWidth> coverage_width_curve(const Workspace& ws, const RunConfig& cfg,
                                                sched::Method method,
                                                const std::vector<double>& alphas);

/// Width at a given average coverage, linearly interpolated along the curve.
/// Throws when `coverage` lies outside the curve's range.
double width_at_coverage(std::vector<CoverageWidth> curve, double coverage);

void write_report_csv(std::ostream& out, const Report& report);
void write_plot_csv(std::ostream& out, const Report& report, sched::Method method);
nlohmann::ordered_json metrics_json(const Report& report);

/// Shortest round-trip decimal text used in every report.
std::string format_number(double v);

}  // namespace cpsched::bench
