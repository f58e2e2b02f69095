#include "cpsched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cpsched::sched {

namespace {

const QuantileModel& require(const std::optional<QuantileModel>& m, const char* which,
                             Method method) {
    if (!m)
        throw std::invalid_argument(conformal::to_string(method) + " needs the " + which +
                                    " quantile model");
    return *m;
}

}  // namespace

MethodSpec MethodSpec::make(Method method, double alpha) {
    MethodSpec s{method, alpha, alpha / 2.0, alpha / 2.0};
    s.validate();
    return s;
}

void MethodSpec::validate() const {
    const auto& roster = scheduling_methods();
    if (std::find(roster.begin(), roster.end(), method) == roster.end())
        throw std::invalid_argument(conformal::to_string(method) +
                                    " is not a scheduling method (use AMV_CQR, IMV_CQR, "
                                    "AMV_Point, IMV_Point or RO_A)");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("alpha must lie in (0, 1), got " + std::to_string(alpha));
    if (!(alpha_l > 0.0) || !(alpha_h > 0.0) || std::abs(alpha_l + alpha_h - alpha) > 1e-12)
        throw std::invalid_argument("alpha_l and alpha_h must be positive and sum to alpha");
}

bool MethodSpec::uses_quantile_models() const {
    return method == Method::AMV_CQR || method == Method::IMV_CQR;
}

const std::vector<Method>& scheduling_methods() {
    static const std::vector<Method> roster{Method::AMV_CQR, Method::IMV_CQR, Method::AMV_Point,
                                            Method::IMV_Point, Method::RO_A};
    return roster;
}

CalibrationResult ro_a_calibrate(const Matrix& point_forecasts, const Matrix& targets,
                                 double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("RO_A: alpha must lie in (0, 1)");
    if (point_forecasts.rows() != targets.rows() || point_forecasts.cols() != targets.cols())
        throw std::invalid_argument("RO_A: forecast/target shape mismatch");
    if (targets.rows() == 0) throw std::invalid_argument("RO_A: empty calibration set");

    CalibrationResult r;
    r.method = Method::RO_A;
    r.alpha_l = r.alpha_h = alpha / 2.0;
    r.calibration_size = static_cast<std::size_t>(targets.rows());
    const Vector nominal = point_forecasts.colwise().mean().transpose();
    r.nominal.assign(nominal.data(), nominal.data() + nominal.size());

    std::vector<double> ql, qh, dev(static_cast<std::size_t>(targets.rows()));
    for (Eigen::Index j = 0; j < targets.cols(); ++j) {
        for (Eigen::Index i = 0; i < targets.rows(); ++i)
            dev[static_cast<std::size_t>(i)] = targets(i, j) - nominal[j];
        ql.push_back(-conformal::adjusted_quantile(dev, alpha / 2.0));
        qh.push_back(conformal::adjusted_quantile(dev, 1.0 - alpha / 2.0));
    }
    r.q_lower = conformal::Shift::per_dim(std::move(ql));
    r.q_upper = conformal::Shift::per_dim(std::move(qh));
    return r;
}

CalibrationResult calibrate_method(const MethodSpec& spec, const ForecastModels& models,
                                   const Matrix& features, const Matrix& targets) {
    spec.validate();
    if (features.rows() != targets.rows())
        throw std::invalid_argument("calibration features/targets row mismatch");
    const auto d = static_cast<std::size_t>(targets.cols());
    switch (spec.method) {
        case Method::AMV_CQR:
        case Method::IMV_CQR: {
            const Matrix lo = require(models.lower, "lower", spec.method).predict(features);
            const Matrix hi = require(models.upper, "upper", spec.method).predict(features);
            const auto sl = conformal::lower_scores(lo, targets);
            const auto sh = conformal::upper_scores(hi, targets);
            return spec.method == Method::AMV_CQR
                       ? conformal::amv_cqr_calibrate(sl, sh, spec.alpha_l, spec.alpha_h, d)
                       : conformal::imv_cqr_calibrate(sl, sh, spec.alpha_l, spec.alpha_h);
        }
        case Method::AMV_Point:
        case Method::IMV_Point: {
            const Matrix mu = require(models.point, "point", spec.method).predict(features);
            return conformal::point_cp_calibrate(conformal::absolute_scores(mu, targets), spec.alpha,
                                                 spec.method == Method::AMV_Point
                                                     ? conformal::MultiMode::Average
                                                     : conformal::MultiMode::Individual);
        }
        case Method::RO_A:
            return ro_a_calibrate(require(models.point, "point", spec.method).predict(features),
                                  targets, spec.alpha);
        default: break;
    }
    throw std::invalid_argument("unsupported scheduling method");
}

IntervalVector interval_from_predictions(const MethodSpec& spec, const CalibrationResult& cal,
                                         std::span<const double> mu_lower,
                                         std::span<const double> mu_upper) {
    if (cal.method != spec.method)
        throw std::invalid_argument("calibration is for " + conformal::to_string(cal.method) +
                                    ", spec asks for " + conformal::to_string(spec.method));
    IntervalVector iv = spec.method == Method::RO_A
                            ? conformal::build_intervals(cal, cal.nominal, cal.nominal)
                            : conformal::build_intervals(cal, mu_lower, mu_upper);
    for (std::size_t j = 0; j < iv.size(); ++j) {
        iv.lower[j] = std::max(0.0, iv.lower[j]);
        iv.upper[j] = std::max(iv.lower[j], iv.upper[j]);
    }
    return iv;
}

IntervalVector build_uncertainty_set(const MethodSpec& spec, const CalibrationResult& cal,
                                     const ForecastModels& models, std::span<const double> x_new) {
    spec.validate();
    if (spec.method == Method::RO_A) {
        if (cal.nominal.empty()) throw std::invalid_argument("RO_A calibration has no nominal profile");
        return interval_from_predictions(spec, cal, {}, {});
    }
    if (spec.uses_quantile_models()) {
        const auto lo = require(models.lower, "lower", spec.method).predict(x_new);
        const auto hi = require(models.upper, "upper", spec.method).predict(x_new);
        return interval_from_predictions(spec, cal, lo, hi);
    }
    const auto mu = require(models.point, "point", spec.method).predict(x_new);
    return interval_from_predictions(spec, cal, mu, mu);
}

std::vector<std::size_t> tightest_slots(const DayContext& day, std::span<const double> pv_lower,
                                        std::size_t count) {
    const double k = dc::linearize_qos(day.params);
    const std::size_t T = day.trace.horizon();
    std::vector<double> headroom(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double load = day.trace.inflexible[t];
        const double floor_kw = dc::dc_power(day.params, load / k, load);
        const double pv = t < pv_lower.size() ? std::max(0.0, pv_lower[t]) : 0.0;
        headroom[t] = day.params.p_grid_max + pv + day.ess.p_max - floor_kw;
        if (load > k * day.params.a_max) headroom[t] = std::min(headroom[t], -load);
    }
    std::vector<std::size_t> order(T);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return headroom[a] < headroom[b]; });
    order.resize(std::min(count, T));
    return order;
}

dc::ScheduleSolution schedule_for_bound(const DayContext& day, std::span<const double> pv_lower,
                                        std::size_t* iterations) {
    std::vector<double> bound(pv_lower.begin(), pv_lower.end());
    for (double& v : bound) v = std::max(0.0, v);
    const dc::ScheduleLp model = dc::build_schedule_lp(day.params, day.ess, day.trace, day.market, bound);
    const lp::LpSolution sol = lp::solve(model.program);
    if (iterations) *iterations = sol.iterations;
    if (sol.status == lp::Status::Infeasible) {
        auto slots = tightest_slots(day, bound);
        std::ostringstream msg;
        msg << "robust schedule infeasible; tightest slots:";
        for (std::size_t t : slots) msg << ' ' << t;
        throw InfeasibleScheduleError(msg.str(), std::move(slots));
    }
    if (sol.status != lp::Status::Optimal)
        throw std::runtime_error("robust schedule LP is " + lp::to_string(sol.status));
    return dc::decode_schedule(model, sol, day.params, day.ess, day.market);
}

RobustSchedule robust_schedule(const MethodSpec& spec, std::span<const double> covariates,
                               const DayContext& day, const ForecastModels& models,
                               const CalibrationResult& cal) {
    RobustSchedule out;
    out.interval = build_uncertainty_set(spec, cal, models, covariates);
    if (out.interval.size() != day.trace.horizon())
        throw std::invalid_argument("interval has " + std::to_string(out.interval.size()) +
                                    " slots but the workload horizon is " +
                                    std::to_string(day.trace.horizon()));
    out.solution = schedule_for_bound(day, out.interval.lower);
    return out;
}

}  // namespace cpsched::sched
