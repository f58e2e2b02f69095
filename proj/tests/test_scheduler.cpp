#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "cpsched/benchmark.hpp"
#include "cpsched/scheduler.hpp"

using namespace cpsched;
using namespace cpsched::sched;

namespace {

// Small generated bundle with linear forecasters, shared across cases.
struct Fixture {
    bench::RunConfig cfg;
    bench::Workspace ws;
    Matrix cal_x, cal_y, test_x, test_y;

    Fixture() {
        cfg.seed = 5;
        cfg.synth.seed = 5;
        cfg.synth.n_days = 400;
        cfg.train.architecture = Architecture::Linear;
        cfg.train.hidden_sizes.clear();
        cfg.train.epochs = 40;
        cfg.train.learning_rate = 0.01;
        ws.bundle = data::generate(cfg.synth);
        ws.models = bench::train_models(ws.bundle, cfg);
        const auto& ds = ws.bundle.dataset;
        cal_x = select_rows(ds.features, ds.split.calibration);
        cal_y = select_rows(ds.targets, ds.split.calibration);
        test_x = select_rows(ds.features, ds.split.test);
        test_y = select_rows(ds.targets, ds.split.test);
    }

    std::vector<double> x(Eigen::Index i) const {
        return {test_x.row(i).data(), test_x.row(i).data() + test_x.cols()};
    }
    std::vector<double> y(Eigen::Index i) const {
        return {test_y.row(i).data(), test_y.row(i).data() + test_y.cols()};
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

}  // namespace

TEST_CASE("method specs split alpha evenly and reject non-scheduling methods") {
    const auto s = MethodSpec::make(Method::IMV_CQR, 0.1);
    CHECK(s.alpha_l == doctest::Approx(0.05));
    CHECK(s.alpha_h == doctest::Approx(0.05));
    CHECK(s.alpha_l + s.alpha_h == doctest::Approx(s.alpha));
    CHECK(s.uses_quantile_models());
    CHECK_FALSE(MethodSpec::make(Method::AMV_Point, 0.1).uses_quantile_models());
    CHECK_THROWS(MethodSpec::make(Method::SplitCP, 0.1).validate());
    CHECK_THROWS(MethodSpec::make(Method::AMV_CQR, 0.0).validate());
    CHECK_THROWS(MethodSpec::make(Method::AMV_CQR, 1.0).validate());
    MethodSpec uneven = MethodSpec::make(Method::AMV_CQR, 0.1);
    uneven.alpha_l = 0.02;
    uneven.alpha_h = 0.08;
    CHECK_NOTHROW(uneven.validate());
    uneven.alpha_h = 0.5;
    CHECK_THROWS(uneven.validate());
    CHECK(scheduling_methods() == std::vector<Method>{Method::AMV_CQR, Method::IMV_CQR,
                                                      Method::AMV_Point, Method::IMV_Point,
                                                      Method::RO_A});
}

TEST_CASE("RO-A ignores the covariates") {
    const auto& f = fixture();
    const auto spec = MethodSpec::make(Method::RO_A, 0.1);
    const auto cal = calibrate_method(spec, f.ws.models, f.cal_x, f.cal_y);
    CHECK(cal.method == Method::RO_A);
    CHECK(cal.nominal.size() == 24);
    const auto a = build_uncertainty_set(spec, cal, f.ws.models, f.x(0));
    const auto b = build_uncertainty_set(spec, cal, f.ws.models, f.x(1));
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
}

TEST_CASE("RO-A box is the empirical deviation quantiles around the mean forecast") {
    Matrix pred(4, 1), y(4, 1);
    pred << 10, 12, 14, 16;  // mean 13
    y << 9, 15, 13, 17;      // deviations -4, 2, 0, 4
    const auto cal = ro_a_calibrate(pred, y, 0.5);
    CHECK(cal.nominal[0] == 13.0);
    // alpha/2 = 0.25 -> k = 1 (-4); 1 - alpha/2 = 0.75 -> k = 3 (2)
    CHECK(cal.q_lower.at(0) == 4.0);
    CHECK(cal.q_upper.at(0) == 2.0);
}

TEST_CASE("AMV sets share one shift, IMV sets scale per hour") {
    const auto& f = fixture();
    const auto spec = MethodSpec::make(Method::AMV_CQR, 0.1);
    const auto cal = calibrate_method(spec, f.ws.models, f.cal_x, f.cal_y);
    CHECK(cal.q_upper.is_scalar());
    const std::vector<double> lo(24, 50.0), hi(24, 100.0);
    const auto iv = interval_from_predictions(spec, cal, lo, hi);
    for (std::size_t j = 1; j < 24; ++j) CHECK(iv.upper[j] - hi[j] == doctest::Approx(iv.upper[0] - hi[0]));

    // Residual scales 1 and 10 in two hours.
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n01(0.0, 1.0);
    const Eigen::Index n = 2000;
    Matrix mu(n, 2), y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        mu(i, 0) = mu(i, 1) = 0.0;
        y(i, 0) = n01(rng);
        y(i, 1) = 10.0 * n01(rng);
    }
    const auto imv = conformal::imv_cqr_calibrate(conformal::lower_scores(mu, y),
                                                  conformal::upper_scores(mu, y), 0.05, 0.05);
    const std::vector<double> zero{0.0, 0.0};
    const auto box = conformal::build_intervals(imv, zero, zero);
    CHECK(box.width(1) / box.width(0) == doctest::Approx(10.0).epsilon(0.1));
}

TEST_CASE("intervals are clamped to physical PV") {
    CalibrationResult cal;
    cal.method = Method::AMV_CQR;
    cal.q_lower = conformal::Shift::scalar(5.0);
    cal.q_upper = conformal::Shift::scalar(-8.0);
    const auto spec = MethodSpec::make(Method::AMV_CQR, 0.1);
    const std::vector<double> lo{2.0, 20.0}, hi{3.0, 21.0};
    const auto iv = interval_from_predictions(spec, cal, lo, hi);
    CHECK(iv.lower[0] == 0.0);
    CHECK(iv.upper[0] >= iv.lower[0]);
    for (std::size_t j = 0; j < 2; ++j) CHECK(iv.lower[j] <= iv.upper[j]);
}

TEST_CASE("covering the realized PV means no violation") {
    const auto& f = fixture();
    const auto& b = f.ws.bundle;
    const DayContext day{f.cfg.params, f.cfg.ess, b.workload, b.market};
    for (Eigen::Index i = 0; i < 5; ++i) {
        const auto y = f.y(i);
        const auto sol = schedule_for_bound(day, y);
        CHECK(dc::validate_schedule(sol, y).violations == 0);
        CHECK(oracle::check_schedule(f.cfg.params, f.cfg.ess, b.workload, b.market, y, sol).empty());
    }
}

TEST_CASE("violations only happen where PV falls below the bound") {
    const auto& f = fixture();
    const auto& b = f.ws.bundle;
    const DayContext day{f.cfg.params, f.cfg.ess, b.workload, b.market};
    for (Method m : scheduling_methods()) {
        const auto spec = MethodSpec::make(m, 0.2);
        const auto cal = calibrate_method(spec, f.ws.models, f.cal_x, f.cal_y);
        std::size_t violated = 0, uncovered = 0, slots = 0;
        for (Eigen::Index i = 0; i < 40; ++i) {
            const auto rs = robust_schedule(spec, f.x(i), day, f.ws.models, cal);
            const auto y = f.y(i);
            const auto check = dc::validate_schedule(rs.solution, y);
            for (std::size_t t = 0; t < 24; ++t) {
                if (check.violated[t]) CHECK(y[t] < rs.interval.lower[t]);
                violated += check.violated[t];
                uncovered += y[t] < rs.interval.lower[t];
                ++slots;
            }
        }
        CHECK(violated <= uncovered);
    }
}

TEST_CASE("a tighter coverage target never makes the schedule cheaper") {
    const auto& f = fixture();
    const auto& b = f.ws.bundle;
    const DayContext day{f.cfg.params, f.cfg.ess, b.workload, b.market};
    for (Method m : {Method::AMV_CQR, Method::IMV_Point}) {
        const auto loose = MethodSpec::make(m, 0.2), tight = MethodSpec::make(m, 0.05);
        const auto cal_loose = calibrate_method(loose, f.ws.models, f.cal_x, f.cal_y);
        const auto cal_tight = calibrate_method(tight, f.ws.models, f.cal_x, f.cal_y);
        for (Eigen::Index i = 0; i < 8; ++i) {
            const auto a = robust_schedule(loose, f.x(i), day, f.ws.models, cal_loose);
            const auto c = robust_schedule(tight, f.x(i), day, f.ws.models, cal_tight);
            for (std::size_t t = 0; t < 24; ++t) CHECK(c.interval.lower[t] <= a.interval.lower[t]);
            CHECK(c.solution.total_cost() >= a.solution.total_cost() - 1e-7);
        }
    }
}

TEST_CASE("with no PV the grid supplies the whole load") {
    const auto& f = fixture();
    const auto& b = f.ws.bundle;
    const DayContext day{f.cfg.params, f.cfg.ess, b.workload, b.market};
    const auto s = schedule_for_bound(day, std::vector<double>(24, 0.0));
    double bought = 0.0, used = 0.0;
    for (std::size_t t = 0; t < 24; ++t) {
        CHECK(s.grid[t] >= s.dc_load[t] + s.ess_power[t] - 1e-7);
        bought += s.grid[t];
        used += s.dc_load[t];
    }
    CHECK(bought >= used - 1e-6);
}

TEST_CASE("infeasible days name their tightest slots") {
    const auto& f = fixture();
    dc::DataCenterParams params = f.cfg.params;
    params.p_grid_max = 50.0;
    const auto& b = f.ws.bundle;
    const DayContext day{params, f.cfg.ess, b.workload, b.market};
    try {
        schedule_for_bound(day, std::vector<double>(24, 0.0));
        FAIL("expected an infeasible schedule");
    } catch (const InfeasibleScheduleError& e) {
        CHECK(e.tightest_slots.size() == 3);
        const auto again = tightest_slots(day, std::vector<double>(24, 0.0));
        CHECK(again == e.tightest_slots);
    }
}
