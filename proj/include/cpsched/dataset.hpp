#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cpsched {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Disjoint row index sets: proper training, calibration and test.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> calibration;
    std::vector<std::size_t> test;
};

/// Covariates (n x p) paired with d-dimensional targets (n x d).
struct Dataset {
    Matrix features;
    Matrix targets;
    SplitIndices split;

    std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
    std::size_t target_dim() const { return static_cast<std::size_t>(targets.cols()); }

    /// Checks shapes, finiteness and that the split partitions all rows.
    /// With `nonnegative_targets`, negative targets are rejected too.
    void validate(bool nonnegative_targets = false) const;
};

/// The proper-training rows only. Model fitting accepts nothing else, so
/// calibration and test rows cannot leak into training.
struct TrainingSet {
    Matrix features;
    Matrix targets;
};

TrainingSet training_view(const Dataset& data);

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);

/// Uniformly random partition of n rows. Every part gets at least one row
/// when n >= 3.
SplitIndices random_split(std::size_t n, double train_fraction, double calibration_fraction,
                          std::uint64_t seed);

}  // namespace cpsched
