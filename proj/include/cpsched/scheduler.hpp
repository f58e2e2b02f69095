#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpsched/conformal.hpp"
#include "cpsched/dataset.hpp"
#include "cpsched/dcmodel.hpp"
#include "cpsched/quantile_model.hpp"

namespace cpsched::sched {

using conformal::CalibrationResult;
using conformal::IntervalVector;
using conformal::Method;

struct MethodSpec {
    Method method = Method::AMV_CQR;
    double alpha = 0.1;
    double alpha_l = 0.05;
    double alpha_h = 0.05;

    /// Even split alpha_l = alpha_h = alpha / 2.
    static MethodSpec make(Method method, double alpha);
    /// Rejects methods outside the scheduling roster and alpha outside (0, 1).
    void validate() const;
    bool uses_quantile_models() const;
};

/// The scheduling roster: AMV_CQR, IMV_CQR, AMV_Point, IMV_Point, RO_A.
const std::vector<Method>& scheduling_methods();

/// Lower/upper quantile models and the point (median) model. Only the ones a
/// method needs have to be present.
struct ForecastModels {
    std::optional<QuantileModel> lower;
    std::optional<QuantileModel> upper;
    std::optional<QuantileModel> point;
};

/// Per-hour empirical [alpha/2, 1 - alpha/2] quantiles of calibration PV
/// deviations from the mean calibration point forecast. Uses no covariates
/// at decision time.
CalibrationResult ro_a_calibrate(const Matrix& point_forecasts, const Matrix& targets, double alpha);

/// Calibrates `spec` on calibration rows (features, targets).
CalibrationResult calibrate_method(const MethodSpec& spec, const ForecastModels& models,
                                   const Matrix& features, const Matrix& targets);

/// Interval from precomputed predictions (point methods pass the point
/// forecast twice; RO_A ignores them). Lower endpoints clamped at 0 kW.
IntervalVector interval_from_predictions(const MethodSpec& spec, const CalibrationResult& cal,
                                         std::span<const double> mu_lower,
                                         std::span<const double> mu_upper);

IntervalVector build_uncertainty_set(const MethodSpec& spec, const CalibrationResult& cal,
                                     const ForecastModels& models, std::span<const double> x_new);

class InfeasibleScheduleError : public std::runtime_error {
public:
    InfeasibleScheduleError(const std::string& message, std::vector<std::size_t> tightest)
        : std::runtime_error(message), tightest_slots(std::move(tightest)) {}
    std::vector<std::size_t> tightest_slots;
};

struct DayContext {
    const dc::DataCenterParams& params;
    const dc::EssParams& ess;
    const dc::WorkloadTrace& trace;
    const dc::MarketSeries& market;
};

/// Build, solve and decode the robust LP for one PV lower bound.
/// Throws InfeasibleScheduleError listing the slots with the least headroom.
dc::ScheduleSolution schedule_for_bound(const DayContext& day, std::span<const double> pv_lower,
                                        std::size_t* iterations = nullptr);

struct RobustSchedule {
    IntervalVector interval;
    dc::ScheduleSolution solution;
};

RobustSchedule robust_schedule(const MethodSpec& spec, std::span<const double> covariates,
                               const DayContext& day, const ForecastModels& models,
                               const CalibrationResult& cal);

/// Slots ordered by headroom: grid cap + PV bound + full ESS discharge minus
/// the smallest power draw that serves the inflexible load.
std::vector<std::size_t> tightest_slots(const DayContext& day, std::span<const double> pv_lower,
                                        std::size_t count = 3);

}  // namespace cpsched::sched
