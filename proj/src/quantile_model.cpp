#include "cpsched/quantile_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "cpsched/random.hpp"

namespace cpsched {

namespace {

constexpr double kScaleEps = 1e-12;

void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("quantile level must lie in (0, 1), got " +
                                    std::to_string(tau));
}

// Derivative of the pinball loss with respect to the prediction.
inline double pinball_slope(double residual, double tau) {
    if (residual > 0.0) return -tau;
    if (residual < 0.0) return 1.0 - tau;
    return 0.0;
}

inline double pinball(double residual, double tau) {
    return residual > 0.0 ? tau * residual : (tau - 1.0) * residual;
}

std::vector<double> to_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_json_vector(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string to_string(Architecture arch) { return arch == Architecture::Linear ? "linear" : "mlp"; }

Architecture architecture_from_string(const std::string& name) {
    if (name == "linear") return Architecture::Linear;
    if (name == "mlp") return Architecture::Mlp;
    throw std::invalid_argument("unknown architecture '" + name + "' (expected linear or mlp)");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("train config: learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("train config: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("train config: moment decay rates must lie in [0, 1)");
    if (architecture == Architecture::Mlp)
        for (std::size_t h : hidden_sizes)
            if (h == 0) throw std::invalid_argument("train config: hidden sizes must be >= 1");
}

ColumnScaler fit_input_scaler(const Matrix& x) {
    ColumnScaler s;
    s.offset = x.colwise().mean().transpose();
    s.scale = ((x.rowwise() - s.offset.transpose()).array().square().colwise().mean().sqrt())
                  .transpose();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
        if (s.scale[j] <= kScaleEps * (1.0 + std::abs(s.offset[j]))) s.scale[j] = 1.0;
    return s;
}

ColumnScaler fit_output_scaler(const Matrix& y) {
    ColumnScaler s = fit_input_scaler(y);
    const Vector raw =
        ((y.rowwise() - s.offset.transpose()).array().square().colwise().mean().sqrt()).transpose();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
        if (raw[j] <= kScaleEps * (1.0 + std::abs(s.offset[j]))) s.scale[j] = 0.0;
    return s;
}

struct QuantileModel::Forward {
    std::vector<Matrix> activations;  // input plus each hidden layer's output
    std::vector<Matrix> preactivations;
    Matrix output;  // normalized output
};

QuantileModel::QuantileModel(Architecture architecture, std::vector<std::size_t> hidden_sizes,
                             std::size_t input_dim, std::size_t output_dim, double tau)
    : architecture_(architecture), tau_(tau) {
    check_tau(tau);
    if (input_dim == 0 || output_dim == 0)
        throw std::invalid_argument("quantile model: input and output dims must be >= 1");
    if (architecture == Architecture::Mlp) {
        hidden_ = std::move(hidden_sizes);
        for (std::size_t h : hidden_)
            if (h == 0) throw std::invalid_argument("quantile model: hidden sizes must be >= 1");
    }
    layer_sizes_.push_back(input_dim);
    layer_sizes_.insert(layer_sizes_.end(), hidden_.begin(), hidden_.end());
    layer_sizes_.push_back(output_dim);

    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        layers_.push_back({layer_sizes_[l], layer_sizes_[l + 1], offset});
        offset += layer_sizes_[l] * layer_sizes_[l + 1] + layer_sizes_[l + 1];
    }
    weights_ = Vector::Zero(static_cast<Eigen::Index>(offset));
    in_ = {Vector::Zero(static_cast<Eigen::Index>(input_dim)),
           Vector::Ones(static_cast<Eigen::Index>(input_dim))};
    out_ = {Vector::Zero(static_cast<Eigen::Index>(output_dim)),
            Vector::Ones(static_cast<Eigen::Index>(output_dim))};
}

QuantileModel QuantileModel::linear(const Matrix& w, const Vector& b, double tau) {
    if (b.size() != w.rows())
        throw std::invalid_argument("linear model: bias length must equal weight rows");
    QuantileModel m(Architecture::Linear, {}, static_cast<std::size_t>(w.cols()),
                    static_cast<std::size_t>(w.rows()), tau);
    Vector flat(m.num_parameters());
    flat.head(w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
    flat.tail(b.size()) = b;
    m.set_weights(flat);
    return m;
}

void QuantileModel::set_weights(const Vector& w) {
    if (w.size() != weights_.size())
        throw std::invalid_argument("quantile model: expected " + std::to_string(weights_.size()) +
                                    " weights, got " + std::to_string(w.size()));
    if (!w.allFinite()) throw std::invalid_argument("quantile model: non-finite weight");
    weights_ = w;
}

void QuantileModel::set_scalers(ColumnScaler in, ColumnScaler out) {
    if (static_cast<std::size_t>(in.offset.size()) != input_dim() ||
        in.scale.size() != in.offset.size() ||
        static_cast<std::size_t>(out.offset.size()) != output_dim() ||
        out.scale.size() != out.offset.size())
        throw std::invalid_argument("quantile model: scaler shape mismatch");
    if ((in.scale.array() <= 0.0).any())
        throw std::invalid_argument("quantile model: input scales must be positive");
    if ((out.scale.array() < 0.0).any())
        throw std::invalid_argument("quantile model: output scales must be nonnegative");
    in_ = std::move(in);
    out_ = std::move(out);
}

Matrix QuantileModel::normalize_inputs(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim())
        throw std::invalid_argument("quantile model: expected " + std::to_string(input_dim()) +
                                    " features, got " + std::to_string(x.cols()));
    return ((x.rowwise() - in_.offset.transpose()).array().rowwise() /
            in_.scale.transpose().array())
        .matrix();
}

Matrix QuantileModel::denormalize(const Matrix& o) const {
    return ((o.array().rowwise() * out_.scale.transpose().array()).rowwise() +
            out_.offset.transpose().array())
        .matrix();
}

QuantileModel::Forward QuantileModel::forward(const Matrix& z) const {
    Forward f;
    f.activations.push_back(z);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& L = layers_[l];
        Eigen::Map<const Matrix> w(weights_.data() + L.offset, static_cast<Eigen::Index>(L.out),
                                   static_cast<Eigen::Index>(L.in));
        Eigen::Map<const Vector> b(weights_.data() + L.offset + L.in * L.out,
                                   static_cast<Eigen::Index>(L.out));
        Matrix pre = f.activations.back() * w.transpose();
        pre.rowwise() += b.transpose();
        if (l + 1 == layers_.size()) {
            f.output = std::move(pre);
        } else {
            f.activations.push_back(pre.cwiseMax(0.0));
            f.preactivations.push_back(std::move(pre));
        }
    }
    return f;
}

Matrix QuantileModel::predict(const Matrix& x) const {
    return denormalize(forward(normalize_inputs(x)).output);
}

std::vector<double> QuantileModel::predict(std::span<const double> x) const {
    if (x.size() != input_dim())
        throw std::invalid_argument("predict: expected " + std::to_string(input_dim()) +
                                    " features, got " + std::to_string(x.size()));
    Matrix row = Eigen::Map<const Matrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    const Matrix y = predict(row);
    return {y.data(), y.data() + y.size()};
}

double QuantileModel::loss_normalized(const Matrix& z, const Matrix& y, double tau) const {
    const Matrix pred = denormalize(forward(z).output);
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < y.cols(); ++j) total += pinball(y(i, j) - pred(i, j), tau);
    return total / double(y.size());
}

double QuantileModel::loss(const Matrix& x, const Matrix& y, double tau) const {
    check_tau(tau);
    if (x.rows() != y.rows() || static_cast<std::size_t>(y.cols()) != output_dim())
        throw std::invalid_argument("loss: batch shape mismatch");
    if (y.rows() == 0) throw std::invalid_argument("loss: empty batch");
    return loss_normalized(normalize_inputs(x), y, tau);
}

Vector QuantileModel::gradient_normalized(const Matrix& z, const Matrix& y, double tau) const {
    Forward f = forward(z);
    const Matrix pred = denormalize(f.output);
    const double inv = 1.0 / double(y.size());

    // dLoss / d(normalized output)
    Matrix delta(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < y.cols(); ++j)
            delta(i, j) = pinball_slope(y(i, j) - pred(i, j), tau) * out_.scale[j] * inv;

    Vector grad = Vector::Zero(weights_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& L = layers_[l];
        const Matrix& input = f.activations[l];
        Eigen::Map<Matrix> gw(grad.data() + L.offset, static_cast<Eigen::Index>(L.out),
                              static_cast<Eigen::Index>(L.in));
        Eigen::Map<Vector> gb(grad.data() + L.offset + L.in * L.out,
                              static_cast<Eigen::Index>(L.out));
        gw.noalias() = delta.transpose() * input;
        gb = delta.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::Map<const Matrix> w(weights_.data() + L.offset, static_cast<Eigen::Index>(L.out),
                                   static_cast<Eigen::Index>(L.in));
        Matrix back = delta * w;
        const Matrix& pre = f.preactivations[l - 1];
        delta = (pre.array() > 0.0).select(back, 0.0);
    }
    return grad;
}

Vector QuantileModel::gradient(const Matrix& x, const Matrix& y, double tau) const {
    check_tau(tau);
    if (x.rows() != y.rows() || static_cast<std::size_t>(y.cols()) != output_dim())
        throw std::invalid_argument("gradient: batch shape mismatch");
    if (y.rows() == 0) throw std::invalid_argument("gradient: empty batch");
    return gradient_normalized(normalize_inputs(x), y, tau);
}

Vector gradient(const QuantileModel& model, const Matrix& x, const Matrix& y, double tau) {
    return model.gradient(x, y, tau);
}

double pinball_loss(std::span<const double> pred, std::span<const double> target, double tau) {
    check_tau(tau);
    if (pred.size() != target.size())
        throw std::invalid_argument("pinball_loss: prediction has " + std::to_string(pred.size()) +
                                    " entries, target has " + std::to_string(target.size()));
    if (pred.empty()) throw std::invalid_argument("pinball_loss: empty vectors");
    double total = 0.0;
    for (std::size_t j = 0; j < pred.size(); ++j) {
        if (!std::isfinite(pred[j]) || !std::isfinite(target[j]))
            throw std::invalid_argument("pinball_loss: non-finite input");
        total += pinball(target[j] - pred[j], tau);
    }
    return total / double(pred.size());
}

nlohmann::json QuantileModel::to_json() const {
    return {
        {"format", "cpsched-quantile-model"},
        {"version", 1},
        {"architecture", to_string(architecture_)},
        {"hidden_sizes", hidden_},
        {"input_dim", input_dim()},
        {"output_dim", output_dim()},
        {"tau", tau_},
        {"input_offset", to_vector(in_.offset)},
        {"input_scale", to_vector(in_.scale)},
        {"output_offset", to_vector(out_.offset)},
        {"output_scale", to_vector(out_.scale)},
        {"weights", to_vector(weights_)},
    };
}

QuantileModel QuantileModel::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "cpsched-quantile-model" || j.value("version", 0) != 1)
        throw std::runtime_error("not a cpsched quantile model checkpoint (version 1)");
    QuantileModel m(architecture_from_string(j.at("architecture").get<std::string>()),
                    j.at("hidden_sizes").get<std::vector<std::size_t>>(),
                    j.at("input_dim").get<std::size_t>(), j.at("output_dim").get<std::size_t>(),
                    j.at("tau").get<double>());
    m.set_scalers({from_json_vector(j.at("input_offset")), from_json_vector(j.at("input_scale"))},
                  {from_json_vector(j.at("output_offset")), from_json_vector(j.at("output_scale"))});
    m.set_weights(from_json_vector(j.at("weights")));
    return m;
}

void QuantileModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model checkpoint " + path);
    out << to_json().dump(1) << '\n';
}

QuantileModel QuantileModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read model checkpoint " + path);
    return from_json(nlohmann::json::parse(in));
}

QuantileModel fit_quantile_model(const TrainingSet& train, double tau, const TrainConfig& cfg,
                                 TrainingLog* log) {
    cfg.validate();
    check_tau(tau);
    const Matrix& x = train.features;
    const Matrix& y = train.targets;
    if (x.rows() != y.rows()) throw std::invalid_argument("training set: row count mismatch");
    if (x.rows() == 0) throw std::invalid_argument("training set is empty");
    if (x.rows() < 2) throw std::invalid_argument("training set needs at least 2 rows");
    if (!x.allFinite() || !y.allFinite())
        throw std::invalid_argument("training set contains non-finite values");

    QuantileModel model(cfg.architecture, cfg.hidden_sizes, static_cast<std::size_t>(x.cols()),
                        static_cast<std::size_t>(y.cols()), tau);
    model.set_scalers(fit_input_scaler(x), fit_output_scaler(y));

    Rng rng(cfg.seed);
    Vector w = Vector::Zero(model.weights_.size());
    if (cfg.architecture == Architecture::Mlp) {
        for (std::size_t l = 0; l < model.layers_.size(); ++l) {
            const auto& L = model.layers_[l];
            const bool last = l + 1 == model.layers_.size();
            const double limit = last ? std::sqrt(6.0 / double(L.in + L.out))
                                      : std::sqrt(6.0 / double(L.in));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (std::size_t k = 0; k < L.in * L.out; ++k) w[Eigen::Index(L.offset + k)] = dist(rng);
        }
    }
    model.set_weights(w);

    const Matrix z = model.normalize_inputs(x);
    const auto n = static_cast<std::size_t>(x.rows());
    const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);

    TrainingLog local;
    local.initial_loss = model.loss_normalized(z, y, tau);

    Vector m = Vector::Zero(w.size()), v = Vector::Zero(w.size());
    double beta1_pow = 1.0, beta2_pow = 1.0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Matrix zb, yb;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (batch < n) std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            const std::span<const std::size_t> rows(order.data() + start, count);
            zb = select_rows(z, rows);
            yb = select_rows(y, rows);

            const double batch_loss = model.loss_normalized(zb, yb, tau);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch));
            epoch_loss += batch_loss;
            ++batches;

            const Vector g = model.gradient_normalized(zb, yb, tau);
            beta1_pow *= cfg.beta1;
            beta2_pow *= cfg.beta2;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
            const Vector m_hat = m / (1.0 - beta1_pow);
            const Vector v_hat = v / (1.0 - beta2_pow);
            Vector& wt = model.weights_;
            wt -= cfg.learning_rate *
                  (m_hat.array() / (v_hat.array().sqrt() + cfg.epsilon) +
                   cfg.weight_decay * wt.array())
                      .matrix();
            if (!wt.allFinite())
                throw std::runtime_error("training diverged: non-finite weights at epoch " +
                                         std::to_string(epoch));
        }
        local.epoch_loss.push_back(epoch_loss / double(batches));
    }
    local.final_loss = model.loss_normalized(z, y, tau);
    if (!std::isfinite(local.final_loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(cfg.epochs));
    if (log) *log = std::move(local);
    return model;
}

QuantileModel train_quantile_model(const Dataset& data, double tau, const TrainConfig& cfg,
                                   TrainingLog* log) {
    if (data.split.train.empty()) throw std::invalid_argument("proper training split is empty");
    return fit_quantile_model(training_view(data), tau, cfg, log);
}

double crossing_rate(const Matrix& lower, const Matrix& upper) {
    if (lower.rows() != upper.rows() || lower.cols() != upper.cols())
        throw std::invalid_argument("crossing_rate: shape mismatch");
    if (lower.size() == 0) return 0.0;
    return double((upper.array() < lower.array()).count()) / double(lower.size());
}

}  // namespace cpsched
