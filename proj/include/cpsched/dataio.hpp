#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpsched/dataset.hpp"
#include "cpsched/dcmodel.hpp"

namespace cpsched::data {

inline constexpr std::size_t kHours = 24;

/// Synthetic PV, market and workload generator settings.
///
/// Profiles are given either by preset name or as an explicit 24-vector;
/// a non-empty vector wins over the name.
struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t n_days = 2000;
    double noise_scale = 1.0;
    bool heteroscedastic = true;
    double pv_capacity_kw = 600.0;
    double cloud_persistence = 0.9;  // AR(1) coefficient of the daily cloud latent

    std::string price_profile = "diurnal";  // diurnal | flat | two_tier
    std::vector<double> price;
    std::string cbep_profile = "diurnal";   // diurnal | flat
    std::vector<double> cbep;
    std::string workload_profile = "diurnal";  // diurnal | flat
    double workload_scale = 1.0;
    std::vector<int> delay_tolerance{2, 5, 7};

    double train_fraction = 0.5;
    double calibration_fraction = 0.25;

    void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});

std::vector<double> price_preset(const std::string& name);
std::vector<double> cbep_preset(const std::string& name);
dc::WorkloadTrace workload_preset(const std::string& name, double scale,
                                  const std::vector<int>& delay_tolerance);

/// Clear-sky PV output (kW) for hour slot `hour` of day-of-year `doy`.
double clear_sky_kw(int doy, std::size_t hour, double capacity_kw);

/// One row per day of recorded PV.
struct PvSeries {
    std::vector<int> day;                   // day index; day-of-year is day mod 365
    std::vector<std::vector<double>> pv;    // [day][hour], kW

    std::size_t size() const { return day.size(); }
};

/// Covariates for each day: previous-day PV (24), sin/cos day-of-year (2),
/// clear-sky curve (24). The first day, or a day whose predecessor is
/// missing, uses its own clear-sky curve in place of the previous day.
Matrix build_features(const PvSeries& series, double capacity_kw);
Matrix build_targets(const PvSeries& series);

struct Bundle {
    PvSeries pv;
    Dataset dataset;
    dc::WorkloadTrace workload;
    dc::MarketSeries market;
    double pv_capacity_kw = 0.0;
};

Bundle generate(const SynthConfig& cfg);

/// Values are written with 9 significant digits; generated values are
/// already rounded to that precision so a write/read cycle is lossless.
double round_sig9(double v);

void write_pv_csv(std::ostream& out, const PvSeries& pv);
void write_market_csv(std::ostream& out, const dc::MarketSeries& market);
void write_workload_csv(std::ostream& out, const dc::WorkloadTrace& workload);

/// Parsers report "<source>:<line>: <problem>" on bad input.
PvSeries read_pv_csv(std::istream& in, const std::string& source = "pv.csv");
dc::MarketSeries read_market_csv(std::istream& in, const std::string& source = "market.csv");
dc::WorkloadTrace read_workload_csv(std::istream& in, const std::vector<int>& delay_tolerance,
                                    const std::string& source = "workload.csv");

struct CsvPaths {
    std::string pv;
    std::string market;
    std::string workload;
};

/// Reads and validates the three files. The dataset gets a random split
/// drawn from `split_seed`.
Bundle ingest_csv(const CsvPaths& paths, double pv_capacity_kw,
                  const std::vector<int>& delay_tolerance, double train_fraction,
                  double calibration_fraction, std::uint64_t split_seed);

void write_bundle(const std::string& dir, const Bundle& bundle);

/// FNV-1a over the CSV text of the bundle; identifies the data a
/// calibration was computed from.
std::string dataset_hash(const Bundle& bundle);

}  // namespace cpsched::data
