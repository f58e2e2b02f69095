#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpsched/dataset.hpp"

namespace cpsched {

enum class Architecture { Linear, Mlp };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

struct TrainConfig {
    Architecture architecture = Architecture::Mlp;
    std::vector<std::size_t> hidden_sizes{64, 64};
    std::size_t epochs = 300;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 64;  // 0 means full batch
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainingLog {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> epoch_loss;  // mean minibatch loss per epoch
};

/// Affine column map: normalized = (raw - offset) / scale on the input side,
/// raw = offset + scale * normalized on the output side. A zero output scale
/// pins that output to its offset.
struct ColumnScaler {
    Vector offset;
    Vector scale;
};

/// Per-column mean and population standard deviation. Columns with no
/// spread get scale 1 on the input side and scale 0 on the output side.
ColumnScaler fit_input_scaler(const Matrix& x);
ColumnScaler fit_output_scaler(const Matrix& y);

/// Linear map or ReLU MLP with `output_dim` heads at one quantile level.
///
/// Parameters are stored flat, layer by layer: the weight matrix
/// (out x in, row-major) followed by the bias vector.
class QuantileModel {
public:
    QuantileModel(Architecture architecture, std::vector<std::size_t> hidden_sizes,
                  std::size_t input_dim, std::size_t output_dim, double tau);

    /// y = W x + b with identity scalers.
    static QuantileModel linear(const Matrix& w, const Vector& b, double tau);

    Architecture architecture() const { return architecture_; }
    const std::vector<std::size_t>& hidden_sizes() const { return hidden_; }
    std::size_t input_dim() const { return layer_sizes_.front(); }
    std::size_t output_dim() const { return layer_sizes_.back(); }
    double tau() const { return tau_; }

    std::size_t num_parameters() const { return weights_.size(); }
    const Vector& weights() const { return weights_; }
    void set_weights(const Vector& w);

    const ColumnScaler& input_scaler() const { return in_; }
    const ColumnScaler& output_scaler() const { return out_; }
    void set_scalers(ColumnScaler in, ColumnScaler out);

    std::vector<double> predict(std::span<const double> x) const;
    Matrix predict(const Matrix& x) const;

    /// Mean pinball loss over all rows and outputs at the model's tau.
    double loss(const Matrix& x, const Matrix& y) const { return loss(x, y, tau_); }
    double loss(const Matrix& x, const Matrix& y, double tau) const;
    /// Gradient of loss() with respect to weights().
    Vector gradient(const Matrix& x, const Matrix& y) const { return gradient(x, y, tau_); }
    Vector gradient(const Matrix& x, const Matrix& y, double tau) const;

    nlohmann::json to_json() const;
    static QuantileModel from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static QuantileModel load(const std::string& path);

private:
    struct Layer {
        std::size_t in, out, offset;
    };
    struct Forward;

    friend QuantileModel fit_quantile_model(const TrainingSet&, double, const TrainConfig&,
                                            TrainingLog*);

    Forward forward(const Matrix& z) const;  // z: normalized inputs
    Matrix normalize_inputs(const Matrix& x) const;
    Matrix denormalize(const Matrix& o) const;
    double loss_normalized(const Matrix& z, const Matrix& y, double tau) const;
    Vector gradient_normalized(const Matrix& z, const Matrix& y, double tau) const;

    Architecture architecture_;
    std::vector<std::size_t> hidden_;
    std::vector<std::size_t> layer_sizes_;
    std::vector<Layer> layers_;
    double tau_;
    Vector weights_;
    ColumnScaler in_, out_;
};

/// Mean over dimensions of max(tau * r, (tau - 1) * r) with r = target - pred.
double pinball_loss(std::span<const double> pred, std::span<const double> target, double tau);

/// Gradient of the mean pinball loss at `tau` (which overrides the model's
/// own level). A residual of exactly 0 contributes zero slope.
Vector gradient(const QuantileModel& model, const Matrix& x, const Matrix& y, double tau);

/// AdamW on the pinball loss. Scalers come from the training rows only.
/// Throws std::runtime_error naming the epoch when the loss turns non-finite.
QuantileModel fit_quantile_model(const TrainingSet& train, double tau, const TrainConfig& cfg,
                                 TrainingLog* log = nullptr);

/// Trains on the proper-training rows of `data`.
QuantileModel train_quantile_model(const Dataset& data, double tau, const TrainConfig& cfg,
                                   TrainingLog* log = nullptr);

/// Fraction of (row, output) pairs where upper < lower.
double crossing_rate(const Matrix& lower, const Matrix& upper);

}  // namespace cpsched
