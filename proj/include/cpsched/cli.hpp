#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "cpsched/benchmark.hpp"

namespace cpsched::cli {

/// A failure attributed to a pipeline stage; `stage` names the stage that
/// has to run (or be fixed) for the command to succeed.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Artifact layout under the run directory.
struct Layout {
    std::filesystem::path root;

    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path calibration() const { return root / "calibration"; }
    std::filesystem::path schedule() const { return root / "schedule"; }
    std::filesystem::path benchmark() const { return root / "benchmark"; }
    std::filesystem::path evaluate() const { return root / "evaluate"; }
    std::filesystem::path calibration_file(sched::Method method, double alpha) const;
};

/// Reads the run configuration file; returns defaults for an empty path.
bench::RunConfig load_config(const std::string& path);

data::Bundle load_data(const bench::RunConfig& cfg);
sched::ForecastModels load_models(const bench::RunConfig& cfg, const data::Bundle& bundle);

// Each command logs one line per artifact written to `log`.
void cmd_synth(const bench::RunConfig& cfg, std::ostream& log);
void cmd_train(const bench::RunConfig& cfg, std::ostream& log);
void cmd_calibrate(const bench::RunConfig& cfg, std::ostream& log);
void cmd_schedule(const bench::RunConfig& cfg, std::ostream& log);
void cmd_benchmark(const bench::RunConfig& cfg, std::ostream& log);
void cmd_evaluate(const bench::RunConfig& cfg, std::ostream& log);

}  // namespace cpsched::cli
