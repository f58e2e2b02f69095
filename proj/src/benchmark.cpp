#include "cpsched/benchmark.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "cpsched/random.hpp"

namespace cpsched::bench {

namespace {

using sched::Method;

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys,
                    const std::string& section) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || item.key() == k;
        if (!known)
            throw std::invalid_argument("config" + (section.empty() ? "" : " section '" + section + "'") +
                                        ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

nlohmann::json params_json(const dc::DataCenterParams& p) {
    return {{"p_idle", p.p_idle}, {"p_peak", p.p_peak}, {"pue", p.pue},
            {"l_rate", p.l_rate}, {"c_dt", p.c_dt},     {"a_max", p.a_max},
            {"p_grid_max", p.p_grid_max}};
}

nlohmann::json ess_json(const dc::EssParams& e) {
    return {{"q_max", e.q_max}, {"q_min", e.q_min}, {"p_max", e.p_max}, {"q_init", e.q_init}};
}

struct Tally {
    std::size_t n = 0;
    double sum = 0.0, sum_sq = 0.0;
    void add(double v) {
        ++n;
        sum += v;
        sum_sq += v * v;
    }
    double mean() const { return n ? sum / double(n) : 0.0; }
    double se() const {
        if (n < 2) return 0.0;
        const double m = mean();
        const double var = std::max(0.0, (sum_sq - double(n) * m * m) / double(n - 1));
        return std::sqrt(var / double(n));
    }
};

double binomial_se(double p, std::size_t n) {
    return n ? std::sqrt(std::max(0.0, p * (1.0 - p)) / double(n)) : 0.0;
}

std::vector<double> row_vector(const Matrix& m, Eigen::Index i) {
    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(j)] = m(i, j);
    return v;
}

}  // namespace

void RunConfig::validate() const {
    synth.validate();
    train.validate();
    for (double tau : {tau_low, tau_high, tau_point})
        if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("quantile levels must lie in (0, 1)");
    if (!(tau_low < tau_high)) throw std::invalid_argument("tau_low must be below tau_high");
    if (methods.empty()) throw std::invalid_argument("at least one method is required");
    for (Method m : methods) sched::MethodSpec::make(m, 0.1).validate();
    if (alphas.empty()) throw std::invalid_argument("at least one alpha is required");
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0))
            throw std::invalid_argument("every alpha must lie in (0, 1), got " + format_number(a));
    if (lambda_c.empty()) throw std::invalid_argument("at least one lambda_c is required");
    for (double l : lambda_c)
        if (!(l >= 0.0) || !std::isfinite(l))
            throw std::invalid_argument("lambda_c values must be finite and nonnegative");
    params.validate();
    ess.validate();
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json synth = data::to_json(c.synth);
    synth.erase("seed");
    std::vector<std::string> methods;
    for (Method m : c.methods) methods.push_back(conformal::to_string(m));
    return {
        {"seed", c.seed},
        {"out", c.out},
        {"synth", synth},
        {"train",
         {{"architecture", to_string(c.train.architecture)},
          {"hidden_sizes", c.train.hidden_sizes},
          {"epochs", c.train.epochs},
          {"learning_rate", c.train.learning_rate},
          {"weight_decay", c.train.weight_decay},
          {"batch_size", c.train.batch_size}}},
        {"tau_low", c.tau_low},
        {"tau_high", c.tau_high},
        {"tau_point", c.tau_point},
        {"methods", methods},
        {"alphas", c.alphas},
        {"lambda_c", c.lambda_c},
        {"data_center", params_json(c.params)},
        {"ess", ess_json(c.ess)},
        {"max_test_days", c.max_test_days},
        {"schedule_day", c.schedule_day},
    };
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c) {
    reject_unknown(j,
                   {"seed", "out", "synth", "train", "tau_low", "tau_high", "tau_point", "methods",
                    "alphas", "lambda_c", "data_center", "ess", "max_test_days", "schedule_day"},
                   "");
    read(j, "seed", c.seed);
    read(j, "out", c.out);
    if (j.contains("synth")) {
        if (j["synth"].contains("seed"))
            throw std::invalid_argument("config section 'synth': use the top-level seed");
        c.synth = data::synth_config_from_json(j["synth"], c.synth);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        reject_unknown(t, {"architecture", "hidden_sizes", "epochs", "learning_rate", "weight_decay",
                           "batch_size"},
                       "train");
        if (t.contains("architecture"))
            c.train.architecture = architecture_from_string(t["architecture"].get<std::string>());
        read(t, "hidden_sizes", c.train.hidden_sizes);
        read(t, "epochs", c.train.epochs);
        read(t, "learning_rate", c.train.learning_rate);
        read(t, "weight_decay", c.train.weight_decay);
        read(t, "batch_size", c.train.batch_size);
    }
    read(j, "tau_low", c.tau_low);
    read(j, "tau_high", c.tau_high);
    read(j, "tau_point", c.tau_point);
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j["methods"]) c.methods.push_back(conformal::method_from_string(m.get<std::string>()));
    }
    read(j, "alphas", c.alphas);
    read(j, "lambda_c", c.lambda_c);
    if (j.contains("data_center")) {
        const auto& p = j["data_center"];
        reject_unknown(p, {"p_idle", "p_peak", "pue", "l_rate", "c_dt", "a_max", "p_grid_max"},
                       "data_center");
        read(p, "p_idle", c.params.p_idle);
        read(p, "p_peak", c.params.p_peak);
        read(p, "pue", c.params.pue);
        read(p, "l_rate", c.params.l_rate);
        read(p, "c_dt", c.params.c_dt);
        read(p, "a_max", c.params.a_max);
        read(p, "p_grid_max", c.params.p_grid_max);
    }
    if (j.contains("ess")) {
        const auto& e = j["ess"];
        reject_unknown(e, {"q_max", "q_min", "p_max", "q_init"}, "ess");
        read(e, "q_max", c.ess.q_max);
        read(e, "q_min", c.ess.q_min);
        read(e, "p_max", c.ess.p_max);
        read(e, "q_init", c.ess.q_init);
    }
    read(j, "max_test_days", c.max_test_days);
    read(j, "schedule_day", c.schedule_day);
    c.synth.seed = c.seed;
    c.validate();
    return c;
}

bool MethodResult::reports_average() const {
    return method == Method::AMV_CQR || method == Method::AMV_Point;
}
double MethodResult::violation_rate() const {
    return reports_average() ? average_violation : max_hour_violation;
}
double MethodResult::violation_se() const {
    return reports_average() ? average_violation_se : max_hour_violation_se;
}
double MethodResult::miss_rate() const {
    return reports_average() ? average_miss_low : max_hour_miss_low;
}
double MethodResult::miss_se() const {
    return reports_average() ? average_miss_low_se : max_hour_miss_low_se;
}

sched::ForecastModels train_models(const data::Bundle& bundle, const RunConfig& cfg,
                                   std::vector<TrainingLog>* logs) {
    const TrainingSet train = training_view(bundle.dataset);
    sched::ForecastModels models;
    const auto fit = [&](double tau, Stream stream) {
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, stream);
        TrainingLog log;
        QuantileModel m = fit_quantile_model(train, tau, tc, &log);
        if (logs) logs->push_back(std::move(log));
        return m;
    };
    models.lower = fit(cfg.tau_low, Stream::TrainLower);
    models.upper = fit(cfg.tau_high, Stream::TrainUpper);
    models.point = fit(cfg.tau_point, Stream::TrainPoint);
    return models;
}

std::vector<std::size_t> evaluation_days(const Dataset& data, std::size_t max_test_days) {
    std::vector<std::size_t> days = data.split.test;
    if (max_test_days > 0 && days.size() > max_test_days) days.resize(max_test_days);
    return days;
}

Report run_benchmark(const Workspace& ws, const RunConfig& cfg) {
    cfg.validate();
    const Dataset& ds = ws.bundle.dataset;
    const auto test = evaluation_days(ds, cfg.max_test_days);
    if (test.empty()) throw std::invalid_argument("benchmark: no test days");
    const Matrix cal_x = select_rows(ds.features, ds.split.calibration);
    const Matrix cal_y = select_rows(ds.targets, ds.split.calibration);
    const Matrix test_x = select_rows(ds.features, test);
    const Matrix test_y = select_rows(ds.targets, test);

    std::optional<Matrix> pred_lo, pred_hi, pred_mu;
    for (Method m : cfg.methods) {
        const auto spec = sched::MethodSpec::make(m, cfg.alphas.front());
        if (spec.uses_quantile_models()) {
            if (!pred_lo) pred_lo = ws.models.lower.value().predict(test_x);
            if (!pred_hi) pred_hi = ws.models.upper.value().predict(test_x);
        } else if (m != Method::RO_A && !pred_mu) {
            pred_mu = ws.models.point.value().predict(test_x);
        }
    }

    Report report;
    report.test_days = test.size();
    report.dataset_hash = data::dataset_hash(ws.bundle);
    const std::size_t T = static_cast<std::size_t>(ds.targets.cols());

    for (Method method : cfg.methods) {
        for (double alpha : cfg.alphas) {
            const auto spec = sched::MethodSpec::make(method, alpha);
            const auto cal = sched::calibrate_method(spec, ws.models, cal_x, cal_y);

            std::vector<sched::IntervalVector> intervals;
            std::vector<std::vector<double>> truths;
            for (std::size_t k = 0; k < test.size(); ++k) {
                const auto i = static_cast<Eigen::Index>(k);
                std::vector<double> lo, hi;
                if (spec.uses_quantile_models()) {
                    lo = row_vector(*pred_lo, i);
                    hi = row_vector(*pred_hi, i);
                } else if (method != Method::RO_A) {
                    lo = hi = row_vector(*pred_mu, i);
                }
                intervals.push_back(sched::interval_from_predictions(spec, cal, lo, hi));
                truths.push_back(row_vector(test_y, i));
            }
            const auto coverage = conformal::empirical_coverage(intervals, truths);

            for (double lambda : cfg.lambda_c) {
                MethodResult r;
                r.method = method;
                r.alpha = alpha;
                r.lambda_c = lambda;
                r.hourly_coverage = coverage.per_dim;
                r.average_coverage = coverage.average;
                r.min_hour_coverage = *std::min_element(coverage.per_dim.begin(), coverage.per_dim.end());

                dc::DataCenterParams params = cfg.params;
                params.lambda_c = lambda;
                const sched::DayContext day{params, cfg.ess, ws.bundle.workload, ws.bundle.market};

                std::vector<double> viol(T, 0.0), miss(T, 0.0);
                Tally cost, carbon, width, day_viol, day_miss;
                std::size_t any_violation = 0;
                for (std::size_t k = 0; k < test.size(); ++k) {
                    const auto& iv = intervals[k];
                    const auto& y = truths[k];
                    double w = 0.0, missed = 0.0;
                    for (std::size_t t = 0; t < T; ++t) {
                        w += iv.upper[t] - iv.lower[t];
                        const bool below = y[t] < iv.lower[t];
                        miss[t] += below;
                        missed += below;
                    }
                    width.add(w / double(T));
                    day_miss.add(missed / double(T));

                    dc::ScheduleSolution sol;
                    try {
                        sol = sched::schedule_for_bound(day, iv.lower);
                    } catch (const sched::InfeasibleScheduleError&) {
                        ++r.infeasible_days;
                        continue;
                    }
                    const auto check = dc::validate_schedule(sol, y);
                    for (std::size_t t = 0; t < T; ++t) viol[t] += check.violated[t];
                    day_viol.add(double(check.violations) / double(T));
                    any_violation += check.violations > 0;
                    cost.add(sol.total_cost());
                    carbon.add(sol.carbon_energy);
                }

                const std::size_t n = test.size();
                const std::size_t solved = n - r.infeasible_days;
                r.days = n;
                r.mean_cost = solved ? cost.mean() : std::numeric_limits<double>::quiet_NaN();
                r.mean_carbon = solved ? carbon.mean() : std::numeric_limits<double>::quiet_NaN();
                r.mean_width = width.mean();
                r.hourly_violation.resize(T);
                r.hourly_miss_low.resize(T);
                for (std::size_t t = 0; t < T; ++t) {
                    r.hourly_violation[t] = solved ? viol[t] / double(solved) : 0.0;
                    r.hourly_miss_low[t] = miss[t] / double(n);
                }
                r.average_violation = day_viol.mean();
                r.average_violation_se = day_viol.se();
                r.max_hour = static_cast<std::size_t>(
                    std::max_element(r.hourly_violation.begin(), r.hourly_violation.end()) -
                    r.hourly_violation.begin());
                r.max_hour_violation = r.hourly_violation[r.max_hour];
                r.max_hour_violation_se = binomial_se(r.max_hour_violation, solved);
                r.daily_violation = solved ? double(any_violation) / double(solved) : 0.0;
                r.average_miss_low = day_miss.mean();
                r.average_miss_low_se = day_miss.se();
                const auto worst_miss =
                    std::max_element(r.hourly_miss_low.begin(), r.hourly_miss_low.end());
                r.max_hour_miss_low = *worst_miss;
                r.max_hour_miss_low_se = binomial_se(*worst_miss, n);
                report.rows.push_back(std::move(r));
            }
        }
    }
    return report;
}

std::vector<CoverageWidth> coverage_width_curve(const Workspace& ws, const RunConfig& cfg,
                                                Method method,
                                                const std::vector<double>& alphas) {
    const Dataset& ds = ws.bundle.dataset;
    const auto test = evaluation_days(ds, cfg.max_test_days);
    if (test.empty()) throw std::invalid_argument("coverage_width_curve: no test days");
    const Matrix cal_x = select_rows(ds.features, ds.split.calibration);
    const Matrix cal_y = select_rows(ds.targets, ds.split.calibration);
    const Matrix test_x = select_rows(ds.features, test);
    const Matrix test_y = select_rows(ds.targets, test);

    const bool quantile = sched::MethodSpec::make(method, 0.1).uses_quantile_models();
    Matrix pred_lo, pred_hi;
    if (quantile) {
        pred_lo = ws.models.lower.value().predict(test_x);
        pred_hi = ws.models.upper.value().predict(test_x);
    } else if (method != Method::RO_A) {
        pred_lo = pred_hi = ws.models.point.value().predict(test_x);
    }

    std::vector<CoverageWidth> curve;
    for (double alpha : alphas) {
        const auto spec = sched::MethodSpec::make(method, alpha);
        const auto cal = sched::calibrate_method(spec, ws.models, cal_x, cal_y);
        std::vector<sched::IntervalVector> intervals;
        std::vector<std::vector<double>> truths;
        Tally width;
        for (std::size_t k = 0; k < test.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            std::vector<double> lo, hi;
            if (method != Method::RO_A) {
                lo = row_vector(pred_lo, i);
                hi = row_vector(pred_hi, i);
            }
            intervals.push_back(sched::interval_from_predictions(spec, cal, lo, hi));
            truths.push_back(row_vector(test_y, i));
            const auto& iv = intervals.back();
            double w = 0.0;
            for (std::size_t t = 0; t < iv.size(); ++t) w += iv.width(t);
            width.add(w / double(iv.size()));
        }
        const auto coverage = conformal::empirical_coverage(intervals, truths);
        curve.push_back({alpha, coverage.average, width.mean()});
    }
    return curve;
}

double width_at_coverage(std::vector<CoverageWidth> curve, double coverage) {
    std::sort(curve.begin(), curve.end(),
              [](const CoverageWidth& a, const CoverageWidth& b) { return a.coverage < b.coverage; });
    if (curve.empty() || coverage < curve.front().coverage || coverage > curve.back().coverage)
        throw std::out_of_range("width_at_coverage: coverage " + format_number(coverage) +
                                " outside the curve");
    for (std::size_t k = 1; k < curve.size(); ++k) {
        const auto& a = curve[k - 1];
        const auto& b = curve[k];
        if (coverage > b.coverage) continue;
        if (b.coverage == a.coverage) return std::min(a.width, b.width);
        const double t = (coverage - a.coverage) / (b.coverage - a.coverage);
        return a.width + t * (b.width - a.width);
    }
    return curve.back().width;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

void write_report_csv(std::ostream& out, const Report& report) {
    out << "method,lambda_c,coverage_level,mean_cost_usd,carbon_energy_kwh,violation_rate,"
           "mean_width_kw,violation_stderr,daily_violation_rate,empirical_coverage,test_days,"
           "infeasible_days\n";
    for (const auto& r : report.rows) {
        out << conformal::to_string(r.method) << ',' << format_number(r.lambda_c) << ','
            << format_number(1.0 - r.alpha) << ',' << format_number(r.mean_cost) << ','
            << format_number(r.mean_carbon) << ',' << format_number(r.violation_rate()) << ','
            << format_number(r.mean_width) << ',' << format_number(r.violation_se()) << ','
            << format_number(r.daily_violation) << ','
            << format_number(r.reports_average() ? r.average_coverage : r.min_hour_coverage) << ','
            << r.days << ',' << r.infeasible_days << '\n';
    }
}

void write_plot_csv(std::ostream& out, const Report& report, sched::Method method) {
    out << "coverage_level,lambda_c,mean_cost_usd,carbon_energy_kwh,violation_rate,mean_width_kw\n";
    for (const auto& r : report.rows) {
        if (r.method != method) continue;
        out << format_number(1.0 - r.alpha) << ',' << format_number(r.lambda_c) << ','
            << format_number(r.mean_cost) << ',' << format_number(r.mean_carbon) << ','
            << format_number(r.violation_rate()) << ',' << format_number(r.mean_width) << '\n';
    }
}

nlohmann::ordered_json metrics_json(const Report& report) {
    nlohmann::ordered_json j;
    j["dataset_hash"] = report.dataset_hash;
    j["test_days"] = report.test_days;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["method"] = conformal::to_string(r.method);
        row["alpha"] = r.alpha;
        row["coverage_level"] = 1.0 - r.alpha;
        row["lambda_c"] = r.lambda_c;
        row["days"] = r.days;
        row["infeasible_days"] = r.infeasible_days;
        row["mean_cost_usd"] = r.mean_cost;
        row["carbon_energy_kwh"] = r.mean_carbon;
        row["mean_width_kw"] = r.mean_width;
        row["violation_rate"] = r.violation_rate();
        row["violation_rate_stderr"] = r.violation_se();
        row["violation_aggregate"] = r.reports_average() ? "hour_average" : "max_hour";
        row["average_violation_rate"] = r.average_violation;
        row["max_hour_violation_rate"] = r.max_hour_violation;
        row["max_violation_hour"] = r.max_hour;
        row["daily_violation_rate"] = r.daily_violation;
        row["lower_miss_rate"] = r.miss_rate();
        row["lower_miss_rate_stderr"] = r.miss_se();
        row["average_coverage"] = r.average_coverage;
        row["min_hour_coverage"] = r.min_hour_coverage;
        row["hourly_violation_rate"] = r.hourly_violation;
        row["hourly_coverage"] = r.hourly_coverage;
        j["rows"].push_back(std::move(row));
    }
    return j;
}

}  // namespace cpsched::bench
