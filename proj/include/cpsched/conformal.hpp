#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpsched/dataset.hpp"

namespace cpsched::conformal {

enum class Method { SplitCP, CQR, AMV_CQR, IMV_CQR, AMV_Point, IMV_Point, RO_A };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

enum class ScoreKind { Absolute, Lower, Upper };

struct ScoreSet {
    std::vector<double> scores;
    ScoreKind kind = ScoreKind::Absolute;
    std::optional<std::size_t> dim;

    /// Non-empty and finite.
    void validate() const;
};

/// A calibrated offset: one scalar shared by every dimension, or one value
/// per dimension. Entries may be +inf, never NaN.
class Shift {
public:
    Shift() = default;
    static Shift scalar(double q) { return Shift(std::vector<double>{q}, true); }
    static Shift per_dim(std::vector<double> q) { return Shift(std::move(q), false); }

    bool is_scalar() const { return scalar_; }
    double at(std::size_t j) const { return scalar_ ? values_.at(0) : values_.at(j); }
    const std::vector<double>& values() const { return values_; }

    bool operator==(const Shift&) const = default;

private:
    Shift(std::vector<double> v, bool s) : values_(std::move(v)), scalar_(s) {}
    std::vector<double> values_;
    bool scalar_ = true;
};

struct Provenance {
    std::string dataset_hash;
    std::uint64_t seed = 0;
};

struct CalibrationResult {
    Method method = Method::SplitCP;
    Shift q_lower;
    Shift q_upper;
    double alpha_l = 0.0;
    double alpha_h = 0.0;
    std::size_t calibration_size = 0;
    /// RO_A only: the covariate-independent per-dimension box center.
    std::vector<double> nominal;
    Provenance provenance;

    double alpha() const { return alpha_l + alpha_h; }
};

struct IntervalVector {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const { return lower.size(); }
    double width(std::size_t j) const { return upper[j] - lower[j]; }
};

/// k-th smallest score with k = ceil(beta * n); +inf when beta > 1.
double adjusted_quantile(std::span<const double> scores, double beta);
double adjusted_quantile(const ScoreSet& scores, double beta);

/// (1 - alpha)(1 + 1/n)
double conformal_level(double alpha, std::size_t n);

CalibrationResult split_cp_calibrate(const ScoreSet& residuals, double alpha);

CalibrationResult cqr_calibrate(const ScoreSet& lower_scores, const ScoreSet& upper_scores,
                                double alpha_l, double alpha_h);

/// Pools all n*d scores and shares one shift across dimensions.
CalibrationResult amv_cqr_calibrate(std::span<const ScoreSet> lower_by_dim,
                                    std::span<const ScoreSet> upper_by_dim, double alpha_l,
                                    double alpha_h, std::size_t d);

/// One shift per dimension.
CalibrationResult imv_cqr_calibrate(std::span<const ScoreSet> lower_by_dim,
                                    std::span<const ScoreSet> upper_by_dim, double alpha_l,
                                    double alpha_h);

enum class MultiMode { Average, Individual };

/// Absolute-residual calibration around a point forecast.
CalibrationResult point_cp_calibrate(std::span<const ScoreSet> abs_by_dim, double alpha,
                                     MultiMode mode);

/// [mu_lower - q_lower, mu_upper + q_upper]; crossed dimensions collapse to
/// their midpoint.
IntervalVector build_intervals(const CalibrationResult& result, std::span<const double> mu_lower,
                               std::span<const double> mu_upper);

struct Coverage {
    std::vector<double> per_dim;
    double average = 0.0;
};

/// Closed-interval coverage.
Coverage empirical_coverage(std::span<const IntervalVector> intervals,
                            std::span<const std::vector<double>> truths);

/// Per-dimension score sets from prediction and target matrices (rows are
/// calibration points).
std::vector<ScoreSet> lower_scores(const Matrix& mu_lower, const Matrix& y);  // mu_l - y
std::vector<ScoreSet> upper_scores(const Matrix& mu_upper, const Matrix& y);  // y - mu_h
std::vector<ScoreSet> absolute_scores(const Matrix& mu, const Matrix& y);     // |y - mu|

nlohmann::json to_json(const CalibrationResult& result);
CalibrationResult calibration_from_json(const nlohmann::json& j);

}  // namespace cpsched::conformal
