#include "cpsched/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cpsched/random.hpp"

namespace cpsched::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt9(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    (void)ec;
    return std::string(buf, end);
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
    throw std::runtime_error(source + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream s(line);
    while (std::getline(s, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_field(const std::string& token, const std::string& source, std::size_t line,
                   const std::string& column) {
    if (token.empty()) fail(source, line, "missing value in column '" + column + "'");
    double v = 0.0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || end != token.data() + token.size())
        fail(source, line, "bad number '" + token + "' in column '" + column + "'");
    if (!std::isfinite(v)) fail(source, line, "non-finite value in column '" + column + "'");
    return v;
}

int parse_int_field(const std::string& token, const std::string& source, std::size_t line,
                    const std::string& column) {
    if (token.empty()) fail(source, line, "missing value in column '" + column + "'");
    int v = 0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || end != token.data() + token.size())
        fail(source, line, "bad integer '" + token + "' in column '" + column + "'");
    return v;
}

// Reads lines, strips a trailing CR, and checks the header.
class CsvReader {
public:
    CsvReader(std::istream& in, std::string source, const std::vector<std::string>& header)
        : in_(in), source_(std::move(source)), header_(header) {
        std::string line;
        if (!next(line)) fail(source_, 1, "empty file, expected header");
        if (split_fields(line) != header_) {
            std::string expected;
            for (const auto& h : header_) expected += (expected.empty() ? "" : ",") + h;
            fail(source_, line_, "header must be '" + expected + "'");
        }
    }

    bool row(std::vector<std::string>& fields) {
        std::string line;
        while (next(line)) {
            if (line.empty()) continue;
            fields = split_fields(line);
            if (fields.size() != header_.size())
                fail(source_, line_, "expected " + std::to_string(header_.size()) +
                                         " fields, found " + std::to_string(fields.size()));
            return true;
        }
        return false;
    }

    std::size_t line() const { return line_; }
    const std::string& source() const { return source_; }

private:
    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    std::istream& in_;
    std::string source_;
    std::vector<std::string> header_;
    std::size_t line_ = 0;
};

const std::vector<std::string> kPvHeader{"day", "hour", "pv_kw"};
const std::vector<std::string> kMarketHeader{"hour", "price_usd_per_kwh", "cbep"};
const std::vector<std::string> kWorkloadHeader{"hour", "inflexible", "flex_c1", "flex_c2",
                                               "flex_c3"};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void check_profile(const std::vector<double>& v, const std::string& what) {
    if (v.size() != kHours)
        throw std::invalid_argument(what + " profile must have 24 entries, got " +
                                    std::to_string(v.size()));
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(what + " profile has a non-finite entry");
}

std::vector<double> resolve(const std::vector<double>& explicit_values, const std::string& name,
                            std::vector<double> (*preset)(const std::string&)) {
    return explicit_values.empty() ? preset(name) : explicit_values;
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_days < 3) throw std::invalid_argument("synth: n_days must be >= 3");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
        throw std::invalid_argument("synth: noise_scale must be >= 0");
    if (!(pv_capacity_kw > 0.0)) throw std::invalid_argument("synth: pv_capacity_kw must be > 0");
    if (!(cloud_persistence >= 0.0 && cloud_persistence < 1.0))
        throw std::invalid_argument("synth: cloud_persistence must lie in [0, 1)");
    if (!(workload_scale >= 0.0)) throw std::invalid_argument("synth: workload_scale must be >= 0");
    check_profile(resolve(price, price_profile, price_preset), "price");
    const auto cb = resolve(cbep, cbep_profile, cbep_preset);
    check_profile(cb, "cbep");
    for (double x : cb)
        if (x < 0.0 || x > 1.0) throw std::invalid_argument("synth: cbep entries must lie in [0, 1]");
    if (delay_tolerance.size() != 3)
        throw std::invalid_argument("synth: exactly 3 flexible workload classes are supported");
    for (int h : delay_tolerance)
        if (h < 0) throw std::invalid_argument("synth: delay tolerances must be >= 0");
    workload_preset(workload_profile, 1.0, delay_tolerance);
    if (!(train_fraction > 0.0) || !(calibration_fraction > 0.0) ||
        train_fraction + calibration_fraction >= 1.0)
        throw std::invalid_argument("synth: split fractions must be positive and sum below 1");
}

nlohmann::json to_json(const SynthConfig& c) {
    return {
        {"seed", c.seed},
        {"n_days", c.n_days},
        {"noise_scale", c.noise_scale},
        {"heteroscedastic", c.heteroscedastic},
        {"pv_capacity_kw", c.pv_capacity_kw},
        {"cloud_persistence", c.cloud_persistence},
        {"price_profile", c.price_profile},
        {"price", c.price},
        {"cbep_profile", c.cbep_profile},
        {"cbep", c.cbep},
        {"workload_profile", c.workload_profile},
        {"workload_scale", c.workload_scale},
        {"delay_tolerance", c.delay_tolerance},
        {"train_fraction", c.train_fraction},
        {"calibration_fraction", c.calibration_fraction},
    };
}

SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig c) {
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "n_days") c.n_days = value.get<std::size_t>();
        else if (key == "noise_scale") c.noise_scale = value.get<double>();
        else if (key == "heteroscedastic") c.heteroscedastic = value.get<bool>();
        else if (key == "pv_capacity_kw") c.pv_capacity_kw = value.get<double>();
        else if (key == "cloud_persistence") c.cloud_persistence = value.get<double>();
        else if (key == "price_profile") c.price_profile = value.get<std::string>();
        else if (key == "price") c.price = value.get<std::vector<double>>();
        else if (key == "cbep_profile") c.cbep_profile = value.get<std::string>();
        else if (key == "cbep") c.cbep = value.get<std::vector<double>>();
        else if (key == "workload_profile") c.workload_profile = value.get<std::string>();
        else if (key == "workload_scale") c.workload_scale = value.get<double>();
        else if (key == "delay_tolerance") c.delay_tolerance = value.get<std::vector<int>>();
        else if (key == "train_fraction") c.train_fraction = value.get<double>();
        else if (key == "calibration_fraction") c.calibration_fraction = value.get<double>();
        else throw std::invalid_argument("synth config: unknown key '" + key + "'");
    }
    return c;
}

std::vector<double> price_preset(const std::string& name) {
    if (name == "diurnal")
        return {0.20, 0.19, 0.18, 0.18, 0.17, 0.12, 0.11, 0.11, 0.10, 0.10, 0.11, 0.12,
                0.12, 0.20, 0.24, 0.27, 0.30, 0.32, 0.16, 0.15, 0.14, 0.15, 0.16, 0.19};
    if (name == "flat") return std::vector<double>(kHours, 0.15);
    if (name == "two_tier") {
        std::vector<double> p(kHours, 0.30);
        for (std::size_t h = 10; h < 18; ++h) p[h] = 0.08;
        return p;
    }
    throw std::invalid_argument("unknown price profile '" + name +
                                "' (expected diurnal, flat or two_tier)");
}

std::vector<double> cbep_preset(const std::string& name) {
    if (name == "diurnal") {
        std::vector<double> cb(kHours);
        for (std::size_t h = 0; h < kHours; ++h)
            cb[h] = round_sig9(0.5 + 0.2 * std::cos(kTwoPi * (double(h) - 1.0) / 24.0));
        return cb;
    }
    if (name == "flat") return std::vector<double>(kHours, 0.5);
    throw std::invalid_argument("unknown cbep profile '" + name + "' (expected diurnal or flat)");
}

dc::WorkloadTrace workload_preset(const std::string& name, double scale,
                                  const std::vector<int>& delay_tolerance) {
    dc::WorkloadTrace w;
    w.delay_tolerance = delay_tolerance;
    w.inflexible.resize(kHours);
    w.flexible_arrivals.assign(delay_tolerance.size(), std::vector<double>(kHours));
    const bool flat = name == "flat";
    if (!flat && name != "diurnal")
        throw std::invalid_argument("unknown workload profile '" + name +
                                    "' (expected diurnal or flat)");
    if (!(scale >= 0.0) || !std::isfinite(scale))
        throw std::invalid_argument("workload scale must be finite and nonnegative");
    for (std::size_t h = 0; h < kHours; ++h) {
        const double t = double(h);
        w.inflexible[h] =
            round_sig9(scale * (flat ? 1200.0 : 1200.0 + 400.0 * std::sin(kTwoPi * (t - 8.0) / 24.0)));
        const double flex =
            round_sig9(scale * (flat ? 600.0 : 600.0 + 300.0 * std::sin(kTwoPi * (t - 8.0) / 24.0)));
        for (auto& arrivals : w.flexible_arrivals) arrivals[h] = flex;
    }
    return w;
}

double clear_sky_kw(int doy, std::size_t hour, double capacity_kw) {
    const double season = std::cos(kTwoPi * (double(doy) - 172.0) / 365.0);
    const double day_length = 12.0 + 2.0 * season;
    const double noon = 12.5;
    const double t = double(hour) + 0.5;
    if (std::abs(t - noon) >= day_length / 2.0) return 0.0;
    const double sigma = day_length / 6.0;
    const double z = (t - noon) / sigma;
    const double seasonal = 0.8 + 0.2 * season;
    return capacity_kw * seasonal * std::exp(-0.5 * z * z);
}

double round_sig9(double v) {
    const std::string s = fmt9(v);
    double out = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), out);
    return out;
}

Matrix build_features(const PvSeries& series, double capacity_kw) {
    const auto n = static_cast<Eigen::Index>(series.size());
    Matrix x(n, 2 * kHours + 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const int doy = series.day[k] % 365;
        const bool has_prev = k > 0 && series.day[k - 1] == series.day[k] - 1;
        for (std::size_t h = 0; h < kHours; ++h) {
            const double clear = clear_sky_kw(doy, h, capacity_kw);
            x(i, Eigen::Index(h)) = has_prev ? series.pv[k - 1][h] : clear;
            x(i, Eigen::Index(kHours + 2 + h)) = clear;
        }
        x(i, Eigen::Index(kHours)) = std::sin(kTwoPi * double(doy) / 365.0);
        x(i, Eigen::Index(kHours + 1)) = std::cos(kTwoPi * double(doy) / 365.0);
    }
    return x;
}

Matrix build_targets(const PvSeries& series) {
    Matrix y(static_cast<Eigen::Index>(series.size()), static_cast<Eigen::Index>(kHours));
    for (std::size_t i = 0; i < series.size(); ++i)
        for (std::size_t h = 0; h < kHours; ++h) y(Eigen::Index(i), Eigen::Index(h)) = series.pv[i][h];
    return y;
}

Bundle generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, Stream::Synthesis));
    std::normal_distribution<double> normal(0.0, 1.0);

    Bundle b;
    b.pv_capacity_kw = cfg.pv_capacity_kw;
    const double rho = cfg.cloud_persistence;
    const double hourly_rho = 0.6;
    double latent = normal(rng);
    for (std::size_t d = 0; d < cfg.n_days; ++d) {
        latent = rho * latent + std::sqrt(1.0 - rho * rho) * normal(rng);
        const double cloud = std::min(1.0, cfg.noise_scale * normal_cdf(latent));
        const double attenuation = 1.0 - 0.7 * cloud;
        const double rel_sd = cfg.noise_scale * (0.04 + 0.6 * cloud * (1.0 - cloud));
        const double abs_sd = cfg.noise_scale * 0.08 * cfg.pv_capacity_kw;

        const int doy = static_cast<int>(d % 365);
        std::vector<double> day(kHours, 0.0);
        double eps = normal(rng);
        for (std::size_t h = 0; h < kHours; ++h) {
            if (h > 0) eps = hourly_rho * eps + std::sqrt(1.0 - hourly_rho * hourly_rho) * normal(rng);
            const double clear = clear_sky_kw(doy, h, cfg.pv_capacity_kw);
            if (clear <= 0.0) continue;
            const double mean = clear * attenuation;
            const double value = cfg.heteroscedastic ? mean * (1.0 + rel_sd * eps) : mean + abs_sd * eps;
            day[h] = round_sig9(std::max(0.0, value));
        }
        b.pv.day.push_back(static_cast<int>(d));
        b.pv.pv.push_back(std::move(day));
    }

    b.dataset.features = build_features(b.pv, cfg.pv_capacity_kw);
    b.dataset.targets = build_targets(b.pv);
    b.dataset.split = random_split(cfg.n_days, cfg.train_fraction, cfg.calibration_fraction,
                                   derive_seed(cfg.seed, Stream::Split));
    b.market.price = resolve(cfg.price, cfg.price_profile, price_preset);
    b.market.cbep = resolve(cfg.cbep, cfg.cbep_profile, cbep_preset);
    for (double& v : b.market.price) v = round_sig9(v);
    for (double& v : b.market.cbep) v = round_sig9(v);
    b.workload = workload_preset(cfg.workload_profile, cfg.workload_scale, cfg.delay_tolerance);
    b.dataset.validate(true);
    return b;
}

void write_pv_csv(std::ostream& out, const PvSeries& pv) {
    out << "day,hour,pv_kw\n";
    for (std::size_t i = 0; i < pv.size(); ++i)
        for (std::size_t h = 0; h < pv.pv[i].size(); ++h)
            out << pv.day[i] << ',' << h << ',' << fmt9(pv.pv[i][h]) << '\n';
}

void write_market_csv(std::ostream& out, const dc::MarketSeries& market) {
    market.validate();
    out << "hour,price_usd_per_kwh,cbep\n";
    for (std::size_t h = 0; h < market.price.size(); ++h)
        out << h << ',' << fmt9(market.price[h]) << ',' << fmt9(market.cbep[h]) << '\n';
}

void write_workload_csv(std::ostream& out, const dc::WorkloadTrace& w) {
    w.validate();
    if (w.num_classes() != 3)
        throw std::invalid_argument("workload.csv holds exactly 3 flexible classes, trace has " +
                                    std::to_string(w.num_classes()));
    out << "hour,inflexible,flex_c1,flex_c2,flex_c3\n";
    for (std::size_t h = 0; h < w.horizon(); ++h) {
        out << h << ',' << fmt9(w.inflexible[h]);
        for (const auto& cls : w.flexible_arrivals) out << ',' << fmt9(cls[h]);
        out << '\n';
    }
}

PvSeries read_pv_csv(std::istream& in, const std::string& source) {
    CsvReader csv(in, source, kPvHeader);
    PvSeries series;
    std::vector<std::string> f;
    while (csv.row(f)) {
        const int day = parse_int_field(f[0], source, csv.line(), "day");
        const int hour = parse_int_field(f[1], source, csv.line(), "hour");
        const double pv = parse_field(f[2], source, csv.line(), "pv_kw");
        if (pv < 0.0) fail(source, csv.line(), "negative PV value " + f[2]);
        if (day < 0) fail(source, csv.line(), "negative day index");
        const bool new_day = series.pv.empty() || series.pv.back().size() == kHours;
        if (new_day) {
            if (hour != 0) fail(source, csv.line(), "day " + std::to_string(day) + " must start at hour 0");
            if (!series.day.empty() && day <= series.day.back())
                fail(source, csv.line(), "days must be strictly increasing");
            series.day.push_back(day);
            series.pv.emplace_back();
        } else if (day != series.day.back() ||
                   hour != static_cast<int>(series.pv.back().size())) {
            fail(source, csv.line(), "expected hour " + std::to_string(series.pv.back().size()) +
                                         " of day " + std::to_string(series.day.back()));
        }
        series.pv.back().push_back(pv);
    }
    if (series.pv.empty()) fail(source, csv.line(), "no data rows");
    if (series.pv.back().size() != kHours)
        fail(source, csv.line(), "day " + std::to_string(series.day.back()) + " has only " +
                                     std::to_string(series.pv.back().size()) + " hours");
    return series;
}

dc::MarketSeries read_market_csv(std::istream& in, const std::string& source) {
    CsvReader csv(in, source, kMarketHeader);
    dc::MarketSeries m;
    std::vector<std::string> f;
    while (csv.row(f)) {
        const int hour = parse_int_field(f[0], source, csv.line(), "hour");
        if (hour != static_cast<int>(m.price.size()))
            fail(source, csv.line(), "expected hour " + std::to_string(m.price.size()));
        m.price.push_back(parse_field(f[1], source, csv.line(), "price_usd_per_kwh"));
        const double cb = parse_field(f[2], source, csv.line(), "cbep");
        if (cb < 0.0 || cb > 1.0) fail(source, csv.line(), "cbep " + f[2] + " outside [0, 1]");
        m.cbep.push_back(cb);
    }
    if (m.price.size() != kHours)
        fail(source, csv.line(), "expected 24 hourly rows, found " + std::to_string(m.price.size()));
    return m;
}

dc::WorkloadTrace read_workload_csv(std::istream& in, const std::vector<int>& delay_tolerance,
                                    const std::string& source) {
    if (delay_tolerance.size() != 3)
        throw std::invalid_argument("workload.csv holds 3 flexible classes; got " +
                                    std::to_string(delay_tolerance.size()) + " delay tolerances");
    CsvReader csv(in, source, kWorkloadHeader);
    dc::WorkloadTrace w;
    w.delay_tolerance = delay_tolerance;
    w.flexible_arrivals.resize(3);
    std::vector<std::string> f;
    while (csv.row(f)) {
        const int hour = parse_int_field(f[0], source, csv.line(), "hour");
        if (hour != static_cast<int>(w.inflexible.size()))
            fail(source, csv.line(), "expected hour " + std::to_string(w.inflexible.size()));
        for (std::size_t k = 1; k < f.size(); ++k) {
            const double v = parse_field(f[k], source, csv.line(), kWorkloadHeader[k]);
            if (v < 0.0) fail(source, csv.line(), "negative workload in column '" + kWorkloadHeader[k] + "'");
            (k == 1 ? w.inflexible : w.flexible_arrivals[k - 2]).push_back(v);
        }
    }
    if (w.inflexible.size() != kHours)
        fail(source, csv.line(), "expected 24 hourly rows, found " + std::to_string(w.inflexible.size()));
    return w;
}

Bundle ingest_csv(const CsvPaths& paths, double pv_capacity_kw,
                  const std::vector<int>& delay_tolerance, double train_fraction,
                  double calibration_fraction, std::uint64_t split_seed) {
    auto open = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        return in;
    };
    Bundle b;
    b.pv_capacity_kw = pv_capacity_kw;
    {
        auto in = open(paths.pv);
        b.pv = read_pv_csv(in, paths.pv);
    }
    {
        auto in = open(paths.market);
        b.market = read_market_csv(in, paths.market);
    }
    {
        auto in = open(paths.workload);
        b.workload = read_workload_csv(in, delay_tolerance, paths.workload);
    }
    b.dataset.features = build_features(b.pv, pv_capacity_kw);
    b.dataset.targets = build_targets(b.pv);
    b.dataset.split = random_split(b.pv.size(), train_fraction, calibration_fraction, split_seed);
    b.dataset.validate(true);
    return b;
}

void write_bundle(const std::string& dir, const Bundle& bundle) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(std::filesystem::path(dir) / name);
        if (!out) throw std::runtime_error("cannot write " + (std::filesystem::path(dir) / name).string());
        return out;
    };
    {
        auto out = open("pv.csv");
        write_pv_csv(out, bundle.pv);
    }
    {
        auto out = open("market.csv");
        write_market_csv(out, bundle.market);
    }
    {
        auto out = open("workload.csv");
        write_workload_csv(out, bundle.workload);
    }
}

std::string dataset_hash(const Bundle& bundle) {
    std::ostringstream pv, market, workload;
    write_pv_csv(pv, bundle.pv);
    write_market_csv(market, bundle.market);
    write_workload_csv(workload, bundle.workload);
    std::uint64_t h = fnv1a(pv.str());
    h = fnv1a(market.str(), h);
    h = fnv1a(workload.str(), h);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace cpsched::data
