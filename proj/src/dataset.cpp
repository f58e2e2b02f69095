#include "cpsched/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cpsched/random.hpp"

namespace cpsched {

void Dataset::validate(bool nonnegative_targets) const {
    if (features.rows() != targets.rows())
        throw std::invalid_argument("dataset: features have " + std::to_string(features.rows()) +
                                    " rows but targets have " + std::to_string(targets.rows()));
    if (!features.allFinite()) throw std::invalid_argument("dataset: non-finite feature value");
    if (!targets.allFinite()) throw std::invalid_argument("dataset: non-finite target value");
    if (nonnegative_targets && targets.size() > 0 && targets.minCoeff() < 0.0)
        throw std::invalid_argument("dataset: negative target value");

    std::vector<int> seen(size(), 0);
    for (const auto* part : {&split.train, &split.calibration, &split.test})
        for (std::size_t i : *part) {
            if (i >= size())
                throw std::invalid_argument("dataset: split index " + std::to_string(i) +
                                            " out of range");
            if (seen[i]++)
                throw std::invalid_argument("dataset: row " + std::to_string(i) +
                                            " appears in more than one split");
        }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw std::invalid_argument("dataset: row " + std::to_string(i) +
                                        " is not assigned to a split");
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= static_cast<std::size_t>(m.rows()))
            throw std::out_of_range("select_rows: row " + std::to_string(rows[r]) + " out of range");
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

TrainingSet training_view(const Dataset& data) {
    return {select_rows(data.features, data.split.train),
            select_rows(data.targets, data.split.train)};
}

SplitIndices random_split(std::size_t n, double train_fraction, double calibration_fraction,
                          std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("random_split: need at least 3 rows");
    if (!(train_fraction > 0.0) || !(calibration_fraction > 0.0) ||
        train_fraction + calibration_fraction >= 1.0)
        throw std::invalid_argument("random_split: fractions must be positive and sum below 1");

    const auto count = [n](double f) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * double(n))));
    };
    std::size_t n_train = count(train_fraction);
    std::size_t n_cal = count(calibration_fraction);
    while (n_train + n_cal > n - 1) (n_train >= n_cal ? n_train : n_cal) -= 1;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.calibration.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                         order.begin() + static_cast<std::ptrdiff_t>(n_train + n_cal));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_cal), order.end());
    for (auto* part : {&s.train, &s.calibration, &s.test}) std::sort(part->begin(), part->end());
    return s;
}

}  // namespace cpsched
