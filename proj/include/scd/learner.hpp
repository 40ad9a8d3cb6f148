#pragma once
/**
 * @brief Feedforward rectifier classifier trained with Adam on softmax
 * cross-entropy. Its last hidden layer is the embedding used for clustering.
 *
 * Architecture: input -> [dense + relu] x hidden_dims.size() -> dense -> softmax.
 * Convolutional front ends would slot in ahead of the first dense layer;
 * nothing downstream depends on the layer types.
 */
#include "scd/common.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace scd {

struct NetworkConfig {
    int input_dim = 1;
    std::vector<int> hidden_dims{128};
    int output_classes = 2;

    void validate() const {
        require(input_dim >= 1, "network: input_dim must be >= 1");
        require(!hidden_dims.empty(), "network: at least one hidden layer is required");
        for (int h : hidden_dims) require(h >= 1, "network: hidden dims must be >= 1");
        require(output_classes >= 2, "network: output_classes must be >= 2");
    }
    int embedding_dim() const { return hidden_dims.back(); }

    bool operator==(const NetworkConfig&) const = default;
};

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    int batch_size = 128;
    std::uint64_t seed = 0;

    void validate() const {
        require(learning_rate > 0.0, "adam: learning_rate must be > 0");
        require(beta1 >= 0.0 && beta1 < 1.0, "adam: beta1 must be in [0,1)");
        require(beta2 >= 0.0 && beta2 < 1.0, "adam: beta2 must be in [0,1)");
        require(epsilon > 0.0, "adam: epsilon must be > 0");
        require(batch_size >= 1, "adam: batch_size must be >= 1");
    }
};

struct DenseLayer {
    Matrix weights;  ///< fan_in x fan_out
    RowVector bias;

    bool operator==(const DenseLayer& o) const { return weights == o.weights && bias == o.bias; }
};

struct Model {
    NetworkConfig config;
    std::vector<DenseLayer> layers;  ///< hidden layers then the output layer
    std::vector<DenseLayer> first_moment;
    std::vector<DenseLayer> second_moment;
    std::uint64_t step = 0;              ///< applied Adam updates
    std::uint64_t epochs_completed = 0;  ///< drives the shuffle order

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    bool operator==(const Model&) const = default;
};

namespace detail {

inline DenseLayer he_layer(int fan_in, int fan_out, Rng& rng) {
    DenseLayer l{Matrix(fan_in, fan_out), RowVector::Zero(fan_out)};
    const double scale = std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = rng.normal() * scale;
    return l;
}

inline DenseLayer zeros_like(const DenseLayer& l) {
    return {Matrix::Zero(l.weights.rows(), l.weights.cols()), RowVector::Zero(l.bias.size())};
}

/// Row-wise softmax, clamped into the open interval (0, 1).
inline Matrix softmax(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
        p.row(r) = p.row(r).array().max(lo).min(hi);
    }
    return p;
}

}  // namespace detail

/// He-initialized weights (scale sqrt(2 / fan_in)), zero biases.
inline Model init_model(const NetworkConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Model m;
    m.config = cfg;
    int fan_in = cfg.input_dim;
    for (int h : cfg.hidden_dims) {
        m.layers.push_back(detail::he_layer(fan_in, h, rng));
        fan_in = h;
    }
    m.layers.push_back(detail::he_layer(fan_in, cfg.output_classes, rng));
    for (const auto& l : m.layers) {
        m.first_moment.push_back(detail::zeros_like(l));
        m.second_moment.push_back(detail::zeros_like(l));
    }
    return m;
}

namespace detail {

inline void check_width(const Model& m, const Matrix& x) {
    require(x.cols() == m.config.input_dim, "model: feature width " + std::to_string(x.cols()) +
                                                " does not match input_dim " + std::to_string(m.config.input_dim));
}

/// Activations of every hidden layer (post-relu).
inline std::vector<Matrix> hidden_activations(const Model& m, const Matrix& x) {
    std::vector<Matrix> acts;
    acts.reserve(m.layers.size() - 1);
    const Matrix* in = &x;
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
        Matrix z = (*in) * m.layers[l].weights;
        z.rowwise() += m.layers[l].bias;
        acts.push_back(z.cwiseMax(0.0));
        in = &acts.back();
    }
    return acts;
}

inline Matrix output_logits(const Model& m, const Matrix& last_hidden) {
    Matrix z = last_hidden * m.layers.back().weights;
    z.rowwise() += m.layers.back().bias;
    return z;
}

}  // namespace detail

inline Matrix predict_proba(const Model& model, const Matrix& features) {
    detail::check_width(model, features);
    const auto acts = detail::hidden_activations(model, features);
    return detail::softmax(detail::output_logits(model, acts.back()));
}

/// Last hidden layer activations (post-relu).
inline Matrix embed(const Model& model, const Matrix& features) {
    detail::check_width(model, features);
    return detail::hidden_activations(model, features).back();
}

/// Mean cross-entropy and its gradient for one batch.
struct LossAndGradient {
    double loss = 0.0;
    std::vector<DenseLayer> gradient;
};

inline LossAndGradient loss_and_gradient(const Model& model, const Matrix& x, std::span<const int> labels) {
    detail::check_width(model, x);
    require(static_cast<std::size_t>(x.rows()) == labels.size() && !labels.empty(),
            "loss: batch rows and labels differ or batch is empty");
    const auto batch = static_cast<double>(labels.size());
    const auto acts = detail::hidden_activations(model, x);
    Matrix probs = detail::softmax(detail::output_logits(model, acts.back()));

    LossAndGradient out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        require(y >= 0 && y < model.config.output_classes, "loss: label " + std::to_string(y) + " out of range");
        out.loss -= std::log(probs(eidx(i), y));
        probs(eidx(i), y) -= 1.0;
    }
    out.loss /= batch;

    Matrix delta = probs / batch;  // dL/dlogits
    out.gradient.resize(model.layers.size());
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const Matrix& input = l == 0 ? x : acts[l - 1];
        out.gradient[l].weights = input.transpose() * delta;
        out.gradient[l].bias = delta.colwise().sum();
        if (l > 0) {
            Matrix back = delta * model.layers[l].weights.transpose();
            delta = back.cwiseProduct((acts[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return out;
}

/// One Adam update with the given gradient.
inline void adam_step(Model& model, const std::vector<DenseLayer>& grad, const AdamConfig& adam) {
    ++model.step;
    const double t = static_cast<double>(model.step);
    const double c1 = 1.0 - std::pow(adam.beta1, t);
    const double c2 = 1.0 - std::pow(adam.beta2, t);
    auto update = [&](auto& w, auto& m, auto& v, const auto& g) {
        m = adam.beta1 * m + (1.0 - adam.beta1) * g;
        v = adam.beta2 * v + (1.0 - adam.beta2) * g.cwiseProduct(g);
        w.array() -= adam.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + adam.epsilon);
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        update(model.layers[l].weights, model.first_moment[l].weights, model.second_moment[l].weights,
               grad[l].weights);
        update(model.layers[l].bias, model.first_moment[l].bias, model.second_moment[l].bias, grad[l].bias);
    }
}

/**
 * Shuffled minibatch training. The order for each epoch is a function of
 * adam.seed and the model's epoch counter. Returns the mean loss per epoch.
 */
inline std::vector<double> train_epochs(Model& model, const Matrix& features, std::span<const int> labels,
                                        const AdamConfig& adam, int epochs) {
    adam.validate();
    require(epochs >= 0, "train: epochs must be >= 0");
    detail::check_width(model, features);
    require(static_cast<std::size_t>(features.rows()) == labels.size(), "train: feature rows and labels differ");
    for (int y : labels)
        require(y >= 0 && y < model.config.output_classes, "train: label " + std::to_string(y) + " out of range");

    std::vector<double> epoch_losses;
    if (labels.empty()) return epoch_losses;
    const std::size_t n = labels.size();
    const auto bs = static_cast<std::size_t>(adam.batch_size);
    for (int e = 0; e < epochs; ++e) {
        Rng rng(derive_seed(adam.seed, model.epochs_completed));
        IndexList order(n);
        for (Index i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);

        double total = 0.0;
        for (std::size_t start = 0, batch = 0; start < n; start += bs, ++batch) {
            const std::size_t end = std::min(n, start + bs);
            const std::span<const Index> rows(order.data() + start, end - start);
            const Matrix xb = take_rows(features, rows);
            std::vector<int> yb;
            yb.reserve(rows.size());
            for (Index r : rows) yb.push_back(labels[r]);
            auto lg = loss_and_gradient(model, xb, yb);
            if (!std::isfinite(lg.loss))
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(e) + ", batch " +
                                     std::to_string(batch));
            adam_step(model, lg.gradient, adam);
            total += lg.loss * static_cast<double>(rows.size());
        }
        ++model.epochs_completed;
        epoch_losses.push_back(total / static_cast<double>(n));
    }
    return epoch_losses;
}

/// Fraction of rows whose argmax probability matches the label.
inline double accuracy(const Model& model, const Matrix& features, std::span<const int> labels) {
    if (labels.empty()) return 0.0;
    const Matrix p = predict_proba(model, features);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Eigen::Index arg = 0;
        p.row(eidx(i)).maxCoeff(&arg);
        hit += arg == labels[i];
    }
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/**
 * Widen the output layer to `new_output_classes`. Hidden layers and the
 * existing output columns are untouched; new columns get fan-in scaled
 * weights, zero bias, and zero optimizer moments.
 */
inline void expand_outputs(Model& model, int new_output_classes, std::uint64_t seed) {
    const int old = model.config.output_classes;
    require(new_output_classes > old, "expand_outputs: cannot shrink or keep " + std::to_string(old) +
                                          " classes (requested " + std::to_string(new_output_classes) + ")");
    const int fan_in = model.config.embedding_dim();
    Rng rng(seed);
    const DenseLayer fresh = detail::he_layer(fan_in, new_output_classes - old, rng);

    auto widen = [&](DenseLayer& l, const DenseLayer& extra) {
        Matrix w(l.weights.rows(), new_output_classes);
        w << l.weights, extra.weights;
        RowVector b(new_output_classes);
        b << l.bias, extra.bias;
        l.weights = std::move(w);
        l.bias = std::move(b);
    };
    const DenseLayer zeros = detail::zeros_like(fresh);
    widen(model.layers.back(), fresh);
    widen(model.first_moment.back(), zeros);
    widen(model.second_moment.back(), zeros);
    model.config.output_classes = new_output_classes;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (all integers little-endian, reals IEEE-754 binary64 little-endian):
//   char[4]  "SCDM"
//   u32      version (= 1)
//   u32      input_dim
//   u32      number of hidden layers H
//   u32[H]   hidden widths
//   u32      output_classes
//   u64      step
//   u64      epochs_completed
//   for each layer (hidden layers, then output):
//     f64[fan_in*fan_out] weights (row-major), f64[fan_out] bias,
//     then first moment (weights, bias), then second moment (weights, bias)

namespace detail {

template <class T>
void put_le(std::ostream& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(b), std::end(b));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char b[sizeof(T)];
    const auto offset = static_cast<std::uint64_t>(in.tellg());
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw FormatError("checkpoint: truncated file", offset);
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(b), std::end(b));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    out.write("SCDM", 4);
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.input_dim));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.hidden_dims.size()));
    for (int h : model.config.hidden_dims) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.config.output_classes));
    detail::put_le<std::uint64_t>(out, model.step);
    detail::put_le<std::uint64_t>(out, model.epochs_completed);
    auto put_layer = [&](const DenseLayer& l) {
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) detail::put_le<double>(out, l.weights.data()[i]);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) detail::put_le<double>(out, l.bias(i));
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        put_layer(model.layers[l]);
        put_layer(model.first_moment[l]);
        put_layer(model.second_moment[l]);
    }
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "SCDM", 4) != 0) throw FormatError("checkpoint: bad magic", 0);
    const auto version = detail::get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version), 4);
    NetworkConfig cfg;
    cfg.input_dim = static_cast<int>(detail::get_le<std::uint32_t>(in));
    const auto n_hidden = detail::get_le<std::uint32_t>(in);
    if (n_hidden == 0 || n_hidden > 1024) throw FormatError("checkpoint: implausible hidden layer count", 12);
    cfg.hidden_dims.clear();
    for (std::uint32_t i = 0; i < n_hidden; ++i) cfg.hidden_dims.push_back(static_cast<int>(detail::get_le<std::uint32_t>(in)));
    cfg.output_classes = static_cast<int>(detail::get_le<std::uint32_t>(in));
    cfg.validate();

    Model m = init_model(cfg, 0);
    m.step = detail::get_le<std::uint64_t>(in);
    m.epochs_completed = detail::get_le<std::uint64_t>(in);
    auto get_layer = [&](DenseLayer& l) {
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = detail::get_le<double>(in);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = detail::get_le<double>(in);
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        get_layer(m.layers[l]);
        get_layer(m.first_moment[l]);
        get_layer(m.second_moment[l]);
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError("checkpoint: trailing bytes", static_cast<std::uint64_t>(in.tellg()));
    return m;
}

}  // namespace scd
