#include "cpsched/conformal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cpsched::conformal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha, const char* what) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument(std::string(what) + " must lie in (0, 1), got " +
                                    std::to_string(alpha));
}

std::size_t common_size(std::span<const ScoreSet> sets, const char* what) {
    if (sets.empty()) throw std::invalid_argument(std::string(what) + ": no dimensions");
    const std::size_t n = sets.front().scores.size();
    for (const auto& s : sets) {
        s.validate();
        if (s.scores.size() != n)
            throw std::invalid_argument(std::string(what) +
                                        ": every dimension needs the same number of scores");
    }
    return n;
}

std::vector<double> pool(std::span<const ScoreSet> sets) {
    std::vector<double> all;
    for (const auto& s : sets) all.insert(all.end(), s.scores.begin(), s.scores.end());
    return all;
}

std::vector<ScoreSet> scores_by_dim(const Matrix& a, const Matrix& b, ScoreKind kind) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("score computation: prediction/target shape mismatch");
    std::vector<ScoreSet> out(static_cast<std::size_t>(a.cols()));
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        auto& s = out[static_cast<std::size_t>(j)];
        s.kind = kind;
        s.dim = static_cast<std::size_t>(j);
        s.scores.resize(static_cast<std::size_t>(a.rows()));
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const double d = a(i, j) - b(i, j);
            s.scores[static_cast<std::size_t>(i)] = kind == ScoreKind::Absolute ? std::abs(d) : d;
        }
    }
    return out;
}

nlohmann::json encode(double q) {
    if (std::isinf(q) && q > 0) return "inf";
    return q;
}

double decode(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return kInf;
        throw std::runtime_error("calibration JSON: unexpected string '" + j.get<std::string>() +
                                 "' where a number or \"inf\" was expected");
    }
    return j.get<double>();
}

nlohmann::json encode(const Shift& s) {
    if (s.is_scalar()) return encode(s.at(0));
    nlohmann::json arr = nlohmann::json::array();
    for (double q : s.values()) arr.push_back(encode(q));
    return arr;
}

Shift decode_shift(const nlohmann::json& j) {
    if (!j.is_array()) return Shift::scalar(decode(j));
    std::vector<double> v;
    for (const auto& e : j) v.push_back(decode(e));
    return Shift::per_dim(std::move(v));
}

}  // namespace

std::string to_string(Method method) {
    switch (method) {
        case Method::SplitCP: return "SplitCP";
        case Method::CQR: return "CQR";
        case Method::AMV_CQR: return "AMV_CQR";
        case Method::IMV_CQR: return "IMV_CQR";
        case Method::AMV_Point: return "AMV_Point";
        case Method::IMV_Point: return "IMV_Point";
        case Method::RO_A: return "RO_A";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    std::string key;
    for (char c : name) key += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (Method m : {Method::SplitCP, Method::CQR, Method::AMV_CQR, Method::IMV_CQR,
                     Method::AMV_Point, Method::IMV_Point, Method::RO_A}) {
        std::string candidate;
        for (char c : to_string(m)) candidate += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (candidate == key) return m;
    }
    throw std::invalid_argument("unknown method '" + name +
                                "' (expected one of SplitCP, CQR, AMV_CQR, IMV_CQR, AMV_Point, "
                                "IMV_Point, RO_A)");
}

void ScoreSet::validate() const {
    if (scores.empty()) throw std::invalid_argument("score set is empty");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("score set contains a non-finite score");
}

double adjusted_quantile(std::span<const double> scores, double beta) {
    if (scores.empty()) throw std::invalid_argument("adjusted_quantile: empty score set");
    if (!(beta > 0.0)) throw std::invalid_argument("adjusted_quantile: beta must be positive");
    if (beta > 1.0) return kInf;
    const double target = beta * double(scores.size());
    const double nearest = std::round(target);
    // beta * n is usually a product of rounded factors; snap near-integers.
    const double k_real = std::abs(target - nearest) <= 1e-9 * std::max(1.0, target)
                              ? nearest
                              : std::ceil(target);
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(k_real), 1, scores.size());
    std::vector<double> copy(scores.begin(), scores.end());
    std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k - 1), copy.end());
    return copy[k - 1];
}

double adjusted_quantile(const ScoreSet& scores, double beta) {
    scores.validate();
    return adjusted_quantile(std::span<const double>(scores.scores), beta);
}

double conformal_level(double alpha, std::size_t n) {
    if (n == 0) throw std::invalid_argument("conformal_level: empty calibration set");
    return (1.0 - alpha) * (1.0 + 1.0 / double(n));
}

CalibrationResult split_cp_calibrate(const ScoreSet& residuals, double alpha) {
    check_alpha(alpha, "alpha");
    residuals.validate();
    const double q = adjusted_quantile(residuals, conformal_level(alpha, residuals.scores.size()));
    CalibrationResult r;
    r.method = Method::SplitCP;
    r.q_lower = r.q_upper = Shift::scalar(q);
    r.alpha_l = r.alpha_h = alpha / 2.0;
    r.calibration_size = residuals.scores.size();
    return r;
}

CalibrationResult cqr_calibrate(const ScoreSet& lower_scores, const ScoreSet& upper_scores,
                                double alpha_l, double alpha_h) {
    check_alpha(alpha_l, "alpha_l");
    check_alpha(alpha_h, "alpha_h");
    lower_scores.validate();
    upper_scores.validate();
    if (lower_scores.scores.size() != upper_scores.scores.size())
        throw std::invalid_argument("cqr_calibrate: lower and upper score counts differ");
    const std::size_t n = lower_scores.scores.size();
    CalibrationResult r;
    r.method = Method::CQR;
    r.q_lower = Shift::scalar(adjusted_quantile(lower_scores, conformal_level(alpha_l, n)));
    r.q_upper = Shift::scalar(adjusted_quantile(upper_scores, conformal_level(alpha_h, n)));
    r.alpha_l = alpha_l;
    r.alpha_h = alpha_h;
    r.calibration_size = n;
    return r;
}

CalibrationResult amv_cqr_calibrate(std::span<const ScoreSet> lower_by_dim,
                                    std::span<const ScoreSet> upper_by_dim, double alpha_l,
                                    double alpha_h, std::size_t d) {
    check_alpha(alpha_l, "alpha_l");
    check_alpha(alpha_h, "alpha_h");
    if (lower_by_dim.size() != d || upper_by_dim.size() != d)
        throw std::invalid_argument("amv_cqr_calibrate: expected " + std::to_string(d) +
                                    " score sets per side");
    const std::size_t n = common_size(lower_by_dim, "amv_cqr_calibrate");
    if (common_size(upper_by_dim, "amv_cqr_calibrate") != n)
        throw std::invalid_argument("amv_cqr_calibrate: lower and upper score counts differ");

    CalibrationResult r;
    r.method = Method::AMV_CQR;
    r.q_lower = Shift::scalar(adjusted_quantile(pool(lower_by_dim), conformal_level(alpha_l, n * d)));
    r.q_upper = Shift::scalar(adjusted_quantile(pool(upper_by_dim), conformal_level(alpha_h, n * d)));
    r.alpha_l = alpha_l;
    r.alpha_h = alpha_h;
    r.calibration_size = n;
    return r;
}

CalibrationResult imv_cqr_calibrate(std::span<const ScoreSet> lower_by_dim,
                                    std::span<const ScoreSet> upper_by_dim, double alpha_l,
                                    double alpha_h) {
    check_alpha(alpha_l, "alpha_l");
    check_alpha(alpha_h, "alpha_h");
    if (lower_by_dim.size() != upper_by_dim.size())
        throw std::invalid_argument("imv_cqr_calibrate: lower and upper dimension counts differ");
    const std::size_t n = common_size(lower_by_dim, "imv_cqr_calibrate");
    if (common_size(upper_by_dim, "imv_cqr_calibrate") != n)
        throw std::invalid_argument("imv_cqr_calibrate: lower and upper score counts differ");

    std::vector<double> ql, qh;
    for (std::size_t j = 0; j < lower_by_dim.size(); ++j) {
        ql.push_back(adjusted_quantile(lower_by_dim[j], conformal_level(alpha_l, n)));
        qh.push_back(adjusted_quantile(upper_by_dim[j], conformal_level(alpha_h, n)));
    }
    CalibrationResult r;
    r.method = Method::IMV_CQR;
    r.q_lower = Shift::per_dim(std::move(ql));
    r.q_upper = Shift::per_dim(std::move(qh));
    r.alpha_l = alpha_l;
    r.alpha_h = alpha_h;
    r.calibration_size = n;
    return r;
}

CalibrationResult point_cp_calibrate(std::span<const ScoreSet> abs_by_dim, double alpha,
                                     MultiMode mode) {
    check_alpha(alpha, "alpha");
    const std::size_t n = common_size(abs_by_dim, "point_cp_calibrate");
    const std::size_t d = abs_by_dim.size();
    CalibrationResult r;
    r.alpha_l = r.alpha_h = alpha / 2.0;
    r.calibration_size = n;
    if (mode == MultiMode::Average) {
        r.method = Method::AMV_Point;
        r.q_lower = r.q_upper =
            Shift::scalar(adjusted_quantile(pool(abs_by_dim), conformal_level(alpha, n * d)));
    } else {
        r.method = Method::IMV_Point;
        std::vector<double> q;
        for (const auto& s : abs_by_dim) q.push_back(adjusted_quantile(s, conformal_level(alpha, n)));
        r.q_lower = r.q_upper = Shift::per_dim(std::move(q));
    }
    return r;
}

IntervalVector build_intervals(const CalibrationResult& result, std::span<const double> mu_lower,
                               std::span<const double> mu_upper) {
    if (mu_lower.size() != mu_upper.size())
        throw std::invalid_argument("build_intervals: lower and upper predictions differ in length");
    const std::size_t d = mu_lower.size();
    for (const Shift* s : {&result.q_lower, &result.q_upper})
        if (!s->is_scalar() && s->values().size() != d)
            throw std::invalid_argument("build_intervals: calibration has " +
                                        std::to_string(s->values().size()) +
                                        " dimensions, prediction has " + std::to_string(d));
    IntervalVector out;
    out.lower.resize(d);
    out.upper.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = mu_lower[j] - result.q_lower.at(j);
        double hi = mu_upper[j] + result.q_upper.at(j);
        if (std::isfinite(lo) && std::isfinite(hi) && lo > hi) lo = hi = 0.5 * (lo + hi);
        out.lower[j] = lo;
        out.upper[j] = hi;
    }
    return out;
}

Coverage empirical_coverage(std::span<const IntervalVector> intervals,
                            std::span<const std::vector<double>> truths) {
    if (intervals.empty()) throw std::invalid_argument("empirical_coverage: no samples");
    if (intervals.size() != truths.size())
        throw std::invalid_argument("empirical_coverage: interval and truth counts differ");
    const std::size_t d = intervals.front().size();
    Coverage c;
    c.per_dim.assign(d, 0.0);
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (intervals[i].size() != d || truths[i].size() != d)
            throw std::invalid_argument("empirical_coverage: dimension mismatch at sample " +
                                        std::to_string(i));
        for (std::size_t j = 0; j < d; ++j)
            c.per_dim[j] += intervals[i].lower[j] <= truths[i][j] && truths[i][j] <= intervals[i].upper[j];
    }
    for (double& v : c.per_dim) v /= double(intervals.size());
    for (double v : c.per_dim) c.average += v;
    c.average /= double(d);
    return c;
}

std::vector<ScoreSet> lower_scores(const Matrix& mu_lower, const Matrix& y) {
    return scores_by_dim(mu_lower, y, ScoreKind::Lower);
}

std::vector<ScoreSet> upper_scores(const Matrix& mu_upper, const Matrix& y) {
    return scores_by_dim(y, mu_upper, ScoreKind::Upper);
}

std::vector<ScoreSet> absolute_scores(const Matrix& mu, const Matrix& y) {
    return scores_by_dim(y, mu, ScoreKind::Absolute);
}

nlohmann::json to_json(const CalibrationResult& r) {
    nlohmann::json j = {
        {"format", "cpsched-calibration"},
        {"version", 1},
        {"method", to_string(r.method)},
        {"alpha", r.alpha()},
        {"alpha_l", r.alpha_l},
        {"alpha_h", r.alpha_h},
        {"calibration_size", r.calibration_size},
        {"q_lower", encode(r.q_lower)},
        {"q_upper", encode(r.q_upper)},
        {"provenance", {{"dataset_hash", r.provenance.dataset_hash}, {"seed", r.provenance.seed}}},
    };
    if (!r.nominal.empty()) j["nominal"] = r.nominal;
    return j;
}

CalibrationResult calibration_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "cpsched-calibration" || j.value("version", 0) != 1)
        throw std::runtime_error("not a cpsched calibration file (version 1)");
    CalibrationResult r;
    r.method = method_from_string(j.at("method").get<std::string>());
    r.alpha_l = j.at("alpha_l").get<double>();
    r.alpha_h = j.at("alpha_h").get<double>();
    r.calibration_size = j.at("calibration_size").get<std::size_t>();
    r.q_lower = decode_shift(j.at("q_lower"));
    r.q_upper = decode_shift(j.at("q_upper"));
    if (j.contains("nominal")) r.nominal = j.at("nominal").get<std::vector<double>>();
    if (j.contains("provenance")) {
        r.provenance.dataset_hash = j["provenance"].value("dataset_hash", "");
        r.provenance.seed = j["provenance"].value("seed", std::uint64_t{0});
    }
    for (const Shift* s : {&r.q_lower, &r.q_upper})
        for (double q : s->values())
            if (std::isnan(q)) throw std::runtime_error("calibration JSON: NaN shift");
    return r;
}

}  // namespace cpsched::conformal
