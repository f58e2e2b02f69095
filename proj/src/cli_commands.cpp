#include "cpsched/cli.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

namespace cpsched::cli {

namespace fs = std::filesystem;

namespace {

using sched::Method;

nlohmann::json read_json(const fs::path& path, const std::string& stage) {
    std::ifstream in(path);
    if (!in) throw StageError(stage, "missing " + path.string() + "; run '" + stage + "' first");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw StageError(stage, "corrupt " + path.string() + ": " + e.what());
    }
}

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_json(const fs::path& path, const nlohmann::json& j, std::ostream& log) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    log << "wrote " << path.string() << '\n';
}

nlohmann::json split_json(const SplitIndices& s) {
    return {{"train", s.train}, {"calibration", s.calibration}, {"test", s.test}};
}

std::size_t test_day(const bench::RunConfig& cfg, const Dataset& ds) {
    if (cfg.schedule_day >= ds.split.test.size())
        throw std::invalid_argument("schedule_day " + std::to_string(cfg.schedule_day) +
                                    " is beyond the " + std::to_string(ds.split.test.size()) +
                                    " test days");
    return ds.split.test[cfg.schedule_day];
}

conformal::CalibrationResult load_calibration(const Layout& layout, Method method, double alpha,
                                              const std::string& hash) {
    const auto path = layout.calibration_file(method, alpha);
    auto cal = conformal::calibration_from_json(read_json(path, "calibrate"));
    if (cal.provenance.dataset_hash != hash)
        throw StageError("calibrate", path.string() + " was computed on different data; rerun 'calibrate'");
    return cal;
}

std::vector<double> row_of(const Matrix& m, std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    return {m.row(r).data(), m.row(r).data() + m.cols()};
}

}  // namespace

fs::path Layout::calibration_file(Method method, double alpha) const {
    return calibration() / (conformal::to_string(method) + "_alpha" + bench::format_number(alpha) + ".json");
}

bench::RunConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config file " + path + " is not valid JSON: " + e.what());
    }
    return bench::run_config_from_json(j);
}

data::Bundle load_data(const bench::RunConfig& cfg) {
    const Layout layout{cfg.out};
    const auto manifest = read_json(layout.data() / "manifest.json", "synth");
    const auto synth = data::synth_config_from_json(manifest.at("synth"));
    const data::CsvPaths paths{(layout.data() / "pv.csv").string(),
                               (layout.data() / "market.csv").string(),
                               (layout.data() / "workload.csv").string()};
    for (const auto& p : {paths.pv, paths.market, paths.workload})
        if (!fs::exists(p)) throw StageError("synth", "missing " + p + "; run 'synth' first");
    data::Bundle b = data::ingest_csv(paths, synth.pv_capacity_kw, synth.delay_tolerance,
                                      synth.train_fraction, synth.calibration_fraction, 0);
    const auto& split = manifest.at("split");
    b.dataset.split.train = split.at("train").get<std::vector<std::size_t>>();
    b.dataset.split.calibration = split.at("calibration").get<std::vector<std::size_t>>();
    b.dataset.split.test = split.at("test").get<std::vector<std::size_t>>();
    b.dataset.validate(true);
    return b;
}

sched::ForecastModels load_models(const bench::RunConfig& cfg, const data::Bundle& bundle) {
    const Layout layout{cfg.out};
    const auto manifest = read_json(layout.models() / "manifest.json", "train");
    if (manifest.value("dataset_hash", "") != data::dataset_hash(bundle))
        throw StageError("train", "models were trained on different data; rerun 'train'");
    sched::ForecastModels m;
    const auto load = [&](const char* name) {
        return QuantileModel::from_json(read_json(layout.models() / name, "train"));
    };
    m.lower = load("lower.json");
    m.upper = load("upper.json");
    m.point = load("point.json");
    return m;
}

void cmd_synth(const bench::RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Layout layout{cfg.out};
    const data::Bundle b = data::generate(cfg.synth);
    data::write_bundle(layout.data().string(), b);
    for (const char* f : {"pv.csv", "market.csv", "workload.csv"})
        log << "wrote " << (layout.data() / f).string() << '\n';
    nlohmann::json manifest = {{"synth", data::to_json(cfg.synth)},
                               {"split", split_json(b.dataset.split)},
                               {"dataset_hash", data::dataset_hash(b)}};
    write_json(layout.data() / "manifest.json", manifest, log);
    write_json(layout.root / "config.json", bench::to_json(cfg), log);
}

void cmd_train(const bench::RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Layout layout{cfg.out};
    const data::Bundle b = load_data(cfg);
    std::vector<TrainingLog> logs;
    const auto models = bench::train_models(b, cfg, &logs);
    write_json(layout.models() / "lower.json", models.lower->to_json(), log);
    write_json(layout.models() / "upper.json", models.upper->to_json(), log);
    write_json(layout.models() / "point.json", models.point->to_json(), log);

    const Matrix cal_x = select_rows(b.dataset.features, b.dataset.split.calibration);
    nlohmann::json manifest = {
        {"dataset_hash", data::dataset_hash(b)},
        {"seed", cfg.seed},
        {"crossing_rate_calibration",
         crossing_rate(models.lower->predict(cal_x), models.upper->predict(cal_x))},
    };
    const char* names[] = {"lower", "upper", "point"};
    for (std::size_t k = 0; k < logs.size(); ++k)
        manifest["training"][names[k]] = {{"initial_loss", logs[k].initial_loss},
                                          {"final_loss", logs[k].final_loss}};
    write_json(layout.models() / "manifest.json", manifest, log);
}

void cmd_calibrate(const bench::RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Layout layout{cfg.out};
    const data::Bundle b = load_data(cfg);
    const auto models = load_models(cfg, b);
    const Matrix x = select_rows(b.dataset.features, b.dataset.split.calibration);
    const Matrix y = select_rows(b.dataset.targets, b.dataset.split.calibration);
    const std::string hash = data::dataset_hash(b);
    for (Method m : cfg.methods)
        for (double alpha : cfg.alphas) {
            auto cal = sched::calibrate_method(sched::MethodSpec::make(m, alpha), models, x, y);
            cal.provenance = {hash, cfg.seed};
            write_json(layout.calibration_file(m, alpha), conformal::to_json(cal), log);
        }
}

void cmd_schedule(const bench::RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Layout layout{cfg.out};
    const data::Bundle b = load_data(cfg);
    const auto models = load_models(cfg, b);
    const Method method = cfg.methods.front();
    const double alpha = cfg.alphas.front();
    const auto spec = sched::MethodSpec::make(method, alpha);
    const auto cal = load_calibration(layout, method, alpha, data::dataset_hash(b));

    const std::size_t row = test_day(cfg, b.dataset);
    dc::DataCenterParams params = cfg.params;
    params.lambda_c = cfg.lambda_c.front();
    const sched::DayContext day{params, cfg.ess, b.workload, b.market};
    const auto covariates = row_of(b.dataset.features, row);
    const auto result = sched::robust_schedule(spec, covariates, day, models, cal);
    const auto truth = row_of(b.dataset.targets, row);
    const auto check = dc::validate_schedule(result.solution, truth);

    const std::string stem = conformal::to_string(method) + "_alpha" + bench::format_number(alpha) +
                             "_day" + std::to_string(b.pv.day[row]);
    {
        const auto path = layout.schedule() / (stem + ".csv");
        auto out = open_out(path);
        dc::write_schedule_csv(out, result.solution, &check);
        log << "wrote " << path.string() << '\n';
    }
    auto summary = nlohmann::json::parse(dc::schedule_summary_json(result.solution, &check));
    summary["method"] = conformal::to_string(method);
    summary["alpha"] = alpha;
    summary["lambda_c"] = params.lambda_c;
    summary["day"] = b.pv.day[row];
    summary["interval_lower_kw"] = result.interval.lower;
    summary["interval_upper_kw"] = result.interval.upper;
    summary["pv_realized_kw"] = truth;
    write_json(layout.schedule() / (stem + ".json"), summary, log);
}

void cmd_benchmark(const bench::RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Layout layout{cfg.out};
    bench::Workspace ws;
    ws.bundle = load_data(cfg);
    ws.models = load_models(cfg, ws.bundle);
    const auto report = bench::run_benchmark(ws, cfg);
    {
        const auto path = layout.benchmark() / "report.csv";
        auto out = open_out(path);
        bench::write_report_csv(out, report);
        log << "wrote " << path.string() << '\n';
    }
    for (Method m : cfg.methods) {
        const auto path = layout.benchmark() / ("plot_" + conformal::to_string(m) + ".csv");
        auto out = open_out(path);
        bench::write_plot_csv(out, report, m);
        log << "wrote " << path.string() << '\n';
    }
    {
        const auto path = layout.benchmark() / "metrics.json";
        auto out = open_out(path);
        out << bench::metrics_json(report).dump(2) << '\n';
        log << "wrote " << path.string() << '\n';
    }
}

void cmd_evaluate(const bench::RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Layout layout{cfg.out};
    const data::Bundle b = load_data(cfg);
    const auto models = load_models(cfg, b);
    const std::string hash = data::dataset_hash(b);
    const auto days = bench::evaluation_days(b.dataset, cfg.max_test_days);
    const Matrix x = select_rows(b.dataset.features, days);
    const Matrix y = select_rows(b.dataset.targets, days);
    const Matrix lo = models.lower->predict(x);
    const Matrix hi = models.upper->predict(x);
    const Matrix mu = models.point->predict(x);

    std::ostringstream csv;
    csv << "method,coverage_level,average_coverage,min_hour_coverage,mean_width_kw\n";
    for (Method m : cfg.methods)
        for (double alpha : cfg.alphas) {
            const auto spec = sched::MethodSpec::make(m, alpha);
            const auto cal = load_calibration(layout, m, alpha, hash);
            std::vector<conformal::IntervalVector> intervals;
            std::vector<std::vector<double>> truths;
            double width = 0.0;
            for (std::size_t i = 0; i < days.size(); ++i) {
                const bool cqr = spec.uses_quantile_models();
                const auto iv = sched::interval_from_predictions(spec, cal, row_of(cqr ? lo : mu, i),
                                                                 row_of(cqr ? hi : mu, i));
                for (std::size_t t = 0; t < iv.size(); ++t) width += iv.width(t);
                intervals.push_back(iv);
                truths.push_back(row_of(y, i));
            }
            const auto cov = conformal::empirical_coverage(intervals, truths);
            csv << conformal::to_string(m) << ',' << bench::format_number(1.0 - alpha) << ','
                << bench::format_number(cov.average) << ','
                << bench::format_number(*std::min_element(cov.per_dim.begin(), cov.per_dim.end()))
                << ',' << bench::format_number(width / double(days.size() * size_t(y.cols())))
                << '\n';
        }
    {
        const auto path = layout.evaluate() / "coverage.csv";
        auto out = open_out(path);
        out << csv.str();
        log << "wrote " << path.string() << '\n';
    }
    write_json(layout.evaluate() / "models.json",
               {{"test_days", days.size()},
                {"crossing_rate", crossing_rate(lo, hi)},
                {"pinball_lower", models.lower->loss(x, y)},
                {"pinball_upper", models.upper->loss(x, y)},
                {"pinball_point", models.point->loss(x, y)}},
               log);
}

}  // namespace cpsched::cli
