#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fieldcomp/errors.hpp"
#include "fieldcomp/geometry.hpp"
#include "fieldcomp/rng.hpp"
#include "fieldcomp/vec3.hpp"

namespace fieldcomp {

inline constexpr const char* kNinePointEncoding = "nine_point";
inline constexpr const char* kFourPointEncoding = "four_point";

// Per-dimension affine normalization x -> (x - mean) / scale.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> scale;  // strictly positive
};

// Fits per-dimension mean and sample std (divisor n-1). Dimensions with no
// spread (or a single sample) get scale 1 so the transform stays invertible.
inline Scaler fit_scaler(const std::vector<std::vector<double>>& data) {
    const std::size_t n = data.size();
    const std::size_t d = n ? data[0].size() : 0;
    Scaler s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    for (const auto& row : data)
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
    for (double& m : s.mean) m /= static_cast<double>(n);
    if (n > 1) {
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (const auto& row : data) {
                double c = row[j] - s.mean[j];
                acc += c * c;
            }
            double sd = std::sqrt(acc / static_cast<double>(n - 1));
            s.scale[j] = sd > 1e-12 ? sd : 1.0;
        }
    }
    return s;
}

inline std::vector<double> apply_scaler(const Scaler& s, const std::vector<double>& x) {
    if (s.mean.size() != x.size())
        throw DimensionMismatch("scaler dimension does not match vector length");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - s.mean[j]) / s.scale[j];
    return out;
}

inline std::vector<double> invert_scaler(const Scaler& s, const std::vector<double>& y) {
    if (s.mean.size() != y.size())
        throw DimensionMismatch("scaler dimension does not match vector length");
    std::vector<double> out(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) out[j] = y[j] * s.scale[j] + s.mean[j];
    return out;
}

// The do-nothing normalization (mean 0, scale 1); handy for hand-built nets.
inline Scaler identity_scaler(std::size_t d) {
    Scaler s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    return s;
}

// Fully connected tanh network with identity output, plus the input/output
// normalization it was trained with. weights[l] is layer_sizes[l] x
// layer_sizes[l+1], row-major (index [in * fan_out + out]).
struct MlpNetwork {
    std::vector<int> layer_sizes;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    Scaler input_scaler;
    Scaler output_scaler;
    std::string encoding;  // nine_point, four_point, or empty for raw vectors
};

// Adam optimizer state over a flat list of parameter blocks.
struct AdamState {
    int step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainingExample {
    std::vector<double> input;
    Vec3 target;
};

struct TrainingSet {
    std::vector<TrainingExample> examples;
    std::string encoding;  // nine_point or four_point ("" for raw test sets)
};

struct Hyperparams {
    std::vector<int> hidden{16};
    int epochs = 5000;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int plateau_epochs = 200;
    double plateau_rel = 1e-9;
};

struct TrainResult {
    MlpNetwork net;
    std::vector<double> loss_history;  // training loss at the start of each epoch
};

// Concatenates one point per beam, in beam order, into a 9-vector.
inline std::vector<double> encode_nine(const std::vector<PlanePoint>& points) {
    std::array<const PlanePoint*, 3> by_beam{};
    for (const PlanePoint& p : points) {
        validate_beam_id(p.beam_id);
        if (by_beam[p.beam_id - 1])
            throw DuplicateBeam("more than one point for beam " + std::to_string(p.beam_id));
        by_beam[p.beam_id - 1] = &p;
    }
    for (int b = 0; b < 3; ++b)
        if (!by_beam[b]) throw MissingBeam("no point for beam " + std::to_string(b + 1));
    std::vector<double> out;
    out.reserve(9);
    for (int b = 0; b < 3; ++b) {
        Vec3 p = by_beam[b]->point;
        out.push_back(p.x);
        out.push_back(p.y);
        out.push_back(p.z);
    }
    return out;
}

// One point plus the raw beam id as the fourth input.
inline std::vector<double> encode_four(const PlanePoint& point) {
    validate_beam_id(point.beam_id);
    return {point.point.x, point.point.y, point.point.z, static_cast<double>(point.beam_id)};
}

namespace detail {

// Runs the scaled input through the network, recording every layer's
// activation (activations[0] = scaled input, activations.back() = scaled
// output).
inline std::vector<std::vector<double>> forward_scaled(const MlpNetwork& net,
                                                       const std::vector<double>& scaled_input) {
    const std::size_t n_layers = net.weights.size();
    std::vector<std::vector<double>> activations;
    activations.reserve(n_layers + 1);
    activations.push_back(scaled_input);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t fan_in = static_cast<std::size_t>(net.layer_sizes[l]);
        const std::size_t fan_out = static_cast<std::size_t>(net.layer_sizes[l + 1]);
        std::vector<double> z = net.biases[l];
        const std::vector<double>& a = activations.back();
        for (std::size_t i = 0; i < fan_in; ++i) {
            double ai = a[i];
            const double* wrow = net.weights[l].data() + i * fan_out;
            for (std::size_t o = 0; o < fan_out; ++o) z[o] += ai * wrow[o];
        }
        if (l + 1 < n_layers)
            for (double& v : z) v = std::tanh(v);
        activations.push_back(std::move(z));
    }
    return activations;
}

inline void check_network_shapes(const MlpNetwork& net) {
    if (net.layer_sizes.size() < 2)
        throw ShapeMismatch("network must have at least an input and an output layer");
    if (net.weights.size() != net.layer_sizes.size() - 1 ||
        net.biases.size() != net.weights.size())
        throw ShapeMismatch("weight/bias block count does not match layer_sizes");
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        std::size_t fan_in = static_cast<std::size_t>(net.layer_sizes[l]);
        std::size_t fan_out = static_cast<std::size_t>(net.layer_sizes[l + 1]);
        if (net.weights[l].size() != fan_in * fan_out || net.biases[l].size() != fan_out)
            throw ShapeMismatch("weight block " + std::to_string(l) + " has the wrong shape");
    }
}

}  // namespace detail

// Inference in field units: scale, propagate, de-scale.
inline std::vector<double> forward(const MlpNetwork& net, const std::vector<double>& input) {
    detail::check_network_shapes(net);
    if (input.size() != static_cast<std::size_t>(net.layer_sizes.front()))
        throw DimensionMismatch("input length " + std::to_string(input.size()) +
                                " does not match network input size " +
                                std::to_string(net.layer_sizes.front()));
    auto activations = detail::forward_scaled(net, apply_scaler(net.input_scaler, input));
    return invert_scaler(net.output_scaler, activations.back());
}

// Gradients of the per-example loss 1/2 |output - target|^2 (scaled output
// space) with respect to every weight and bias.
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

struct BackpropResult {
    Gradients grads;
    double loss = 0.0;
};

inline BackpropResult backprop(const MlpNetwork& net, const std::vector<double>& input,
                               const std::vector<double>& target) {
    detail::check_network_shapes(net);
    if (input.size() != static_cast<std::size_t>(net.layer_sizes.front()))
        throw DimensionMismatch("input length does not match network input size");
    if (target.size() != static_cast<std::size_t>(net.layer_sizes.back()))
        throw DimensionMismatch("target length does not match network output size");

    auto activations = detail::forward_scaled(net, apply_scaler(net.input_scaler, input));
    std::vector<double> target_scaled = apply_scaler(net.output_scaler, target);

    const std::size_t n_layers = net.weights.size();
    std::vector<double> delta = activations.back();
    double loss = 0.0;
    for (std::size_t o = 0; o < delta.size(); ++o) {
        delta[o] -= target_scaled[o];
        loss += 0.5 * delta[o] * delta[o];
    }

    BackpropResult res;
    res.loss = loss;
    res.grads.weights.resize(n_layers);
    res.grads.biases.resize(n_layers);
    for (std::size_t li = n_layers; li-- > 0;) {
        const std::size_t fan_in = static_cast<std::size_t>(net.layer_sizes[li]);
        const std::size_t fan_out = static_cast<std::size_t>(net.layer_sizes[li + 1]);
        res.grads.biases[li] = delta;
        res.grads.weights[li].assign(fan_in * fan_out, 0.0);
        const std::vector<double>& a = activations[li];
        for (std::size_t i = 0; i < fan_in; ++i)
            for (std::size_t o = 0; o < fan_out; ++o)
                res.grads.weights[li][i * fan_out + o] = a[i] * delta[o];
        if (li > 0) {
            std::vector<double> prev(fan_in, 0.0);
            for (std::size_t i = 0; i < fan_in; ++i) {
                double acc = 0.0;
                const double* wrow = net.weights[li].data() + i * fan_out;
                for (std::size_t o = 0; o < fan_out; ++o) acc += wrow[o] * delta[o];
                // a[i] = tanh(z_i) for hidden layers, so tanh' = 1 - a^2.
                prev[i] = acc * (1.0 - a[i] * a[i]);
            }
            delta = std::move(prev);
        }
    }
    return res;
}

inline AdamState make_adam_state(const std::vector<std::vector<double>>& params, double lr = 1e-3,
                                 double beta1 = 0.9, double beta2 = 0.999,
                                 double epsilon = 1e-8) {
    AdamState st;
    st.lr = lr;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.epsilon = epsilon;
    st.first_moment.reserve(params.size());
    st.second_moment.reserve(params.size());
    for (const auto& block : params) {
        st.first_moment.emplace_back(block.size(), 0.0);
        st.second_moment.emplace_back(block.size(), 0.0);
    }
    return st;
}

// One Adam update with bias-corrected moments, applied in place to a flat
// list of parameter blocks.
inline void adam_step(std::vector<std::vector<double>>& params,
                      const std::vector<std::vector<double>>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw ShapeMismatch("adam_step block count mismatch");
    for (std::size_t b = 0; b < params.size(); ++b)
        if (params[b].size() != grads[b].size() ||
            params[b].size() != state.first_moment[b].size())
            throw ShapeMismatch("adam_step block " + std::to_string(b) + " shape mismatch");

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& m = state.first_moment[b];
        auto& v = state.second_moment[b];
        const auto& g = grads[b];
        auto& p = params[b];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

namespace detail {

inline std::size_t expected_input_size(const std::string& encoding) {
    if (encoding == kNinePointEncoding) return 9;
    if (encoding == kFourPointEncoding) return 4;
    return 0;  // raw: any consistent size
}

}  // namespace detail

// Full-batch Adam training. Scalers are fitted on the training data, weights
// are initialized by the seeded symmetric uniform scheme (limit
// sqrt(6/(fan_in+fan_out))), and training runs for hyper.epochs or until the
// relative loss improvement over plateau_epochs drops below plateau_rel.
// Deterministic given (training, hyper, seed).
inline TrainResult train(const TrainingSet& training, const Hyperparams& hyper,
                         std::uint64_t seed) {
    if (training.examples.empty()) throw EmptyTrainingSet("training set has no examples");
    const std::size_t n = training.examples.size();
    const std::size_t in_dim = training.examples[0].input.size();
    std::size_t expected = detail::expected_input_size(training.encoding);
    if (expected != 0 && in_dim != expected)
        throw EncodingMismatch("encoding " + training.encoding + " expects inputs of length " +
                               std::to_string(expected) + ", got " + std::to_string(in_dim));
    if (in_dim == 0) throw EncodingMismatch("training inputs are empty");
    std::vector<std::vector<double>> inputs, targets;
    inputs.reserve(n);
    targets.reserve(n);
    for (const TrainingExample& ex : training.examples) {
        if (ex.input.size() != in_dim)
            throw EncodingMismatch("training inputs have inconsistent lengths");
        if (!is_finite(ex.target) ||
            std::any_of(ex.input.begin(), ex.input.end(),
                        [](double v) { return !std::isfinite(v); }))
            throw NonFiniteData("training data contains non-finite values");
        inputs.push_back(ex.input);
        targets.push_back({ex.target.x, ex.target.y, ex.target.z});
    }

    MlpNetwork net;
    net.encoding = training.encoding;
    net.layer_sizes.push_back(static_cast<int>(in_dim));
    for (int h : hyper.hidden) {
        if (h < 1) throw InvalidConfig("hidden layer sizes must be >= 1");
        net.layer_sizes.push_back(h);
    }
    net.layer_sizes.push_back(3);
    net.input_scaler = fit_scaler(inputs);
    net.output_scaler = fit_scaler(targets);

    Rng rng(seed);
    const std::size_t n_layers = net.layer_sizes.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::size_t fan_in = static_cast<std::size_t>(net.layer_sizes[l]);
        std::size_t fan_out = static_cast<std::size_t>(net.layer_sizes[l + 1]);
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::vector<double> w(fan_in * fan_out);
        for (double& v : w) v = rng.uniform(-limit, limit);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }

    std::vector<std::vector<double>> scaled_inputs(n), scaled_targets(n);
    for (std::size_t e = 0; e < n; ++e) {
        scaled_inputs[e] = apply_scaler(net.input_scaler, inputs[e]);
        scaled_targets[e] = apply_scaler(net.output_scaler, targets[e]);
    }

    // Parameter blocks: weights first, then biases, so Adam sees one flat
    // list. Gradient blocks are laid out identically.
    std::vector<std::vector<double>> params;
    params.reserve(2 * n_layers);
    for (auto& w : net.weights) params.push_back(std::move(w));
    for (auto& b : net.biases) params.push_back(std::move(b));
    auto param_weights = [&](std::size_t l) -> std::vector<double>& { return params[l]; };
    auto param_biases = [&](std::size_t l) -> std::vector<double>& { return params[n_layers + l]; };

    AdamState adam =
        make_adam_state(params, hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.epsilon);
    std::vector<std::vector<double>> grads(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) grads[b].assign(params[b].size(), 0.0);

    TrainResult result;
    result.loss_history.reserve(static_cast<std::size_t>(hyper.epochs));

    std::vector<std::vector<double>> activations;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
        double loss = 0.0;

        for (std::size_t e = 0; e < n; ++e) {
            // Forward pass (inline rather than via backprop() so the network
            // blocks can stay moved-out into `params`).
            activations.clear();
            activations.push_back(scaled_inputs[e]);
            for (std::size_t l = 0; l < n_layers; ++l) {
                std::size_t fan_in = static_cast<std::size_t>(net.layer_sizes[l]);
                std::size_t fan_out = static_cast<std::size_t>(net.layer_sizes[l + 1]);
                std::vector<double> z = param_biases(l);
                const std::vector<double>& a = activations.back();
                for (std::size_t i = 0; i < fan_in; ++i) {
                    double ai = a[i];
                    const double* wrow = param_weights(l).data() + i * fan_out;
                    for (std::size_t o = 0; o < fan_out; ++o) z[o] += ai * wrow[o];
                }
                if (l + 1 < n_layers)
                    for (double& v : z) v = std::tanh(v);
                activations.push_back(std::move(z));
            }

            std::vector<double> delta = activations.back();
            for (std::size_t o = 0; o < delta.size(); ++o) {
                delta[o] -= scaled_targets[e][o];
                loss += 0.5 * delta[o] * delta[o];
            }

            for (std::size_t li = n_layers; li-- > 0;) {
                std::size_t fan_in = static_cast<std::size_t>(net.layer_sizes[li]);
                std::size_t fan_out = static_cast<std::size_t>(net.layer_sizes[li + 1]);
                const std::vector<double>& a = activations[li];
                auto& gw = grads[li];
                auto& gb = grads[n_layers + li];
                for (std::size_t o = 0; o < fan_out; ++o) gb[o] += delta[o];
                for (std::size_t i = 0; i < fan_in; ++i)
                    for (std::size_t o = 0; o < fan_out; ++o)
                        gw[i * fan_out + o] += a[i] * delta[o];
                if (li > 0) {
                    std::vector<double> prev(fan_in, 0.0);
                    for (std::size_t i = 0; i < fan_in; ++i) {
                        double acc = 0.0;
                        const double* wrow = param_weights(li).data() + i * fan_out;
                        for (std::size_t o = 0; o < fan_out; ++o) acc += wrow[o] * delta[o];
                        prev[i] = acc * (1.0 - a[i] * a[i]);
                    }
                    delta = std::move(prev);
                }
            }
        }

        loss /= static_cast<double>(n);
        for (auto& g : grads)
            for (double& v : g) v /= static_cast<double>(n);

        result.loss_history.push_back(loss);
        adam_step(params, grads, adam);

        std::size_t hist = result.loss_history.size();
        if (hist > static_cast<std::size_t>(hyper.plateau_epochs)) {
            double before = result.loss_history[hist - 1 - hyper.plateau_epochs];
            double now = result.loss_history[hist - 1];
            if (before > 0.0 && (before - now) / before < hyper.plateau_rel) break;
        }
    }

    for (std::size_t l = 0; l < n_layers; ++l) {
        net.weights[l] = std::move(params[l]);
        net.biases[l] = std::move(params[n_layers + l]);
    }
    result.net = std::move(net);
    return result;
}

// Encodes and forwards. Nine-point networks take one point per beam;
// four-point networks take exactly one point (multiple points mean multiple
// independent predictions -- the caller decides how to combine them).
inline Vec3 predict_ann(const MlpNetwork& net, const std::vector<PlanePoint>& points) {
    std::vector<double> out;
    if (net.encoding == kNinePointEncoding) {
        out = forward(net, encode_nine(points));
    } else if (net.encoding == kFourPointEncoding) {
        if (points.size() != 1)
            throw EncodingMismatch("four_point networks predict from exactly one point, got " +
                                   std::to_string(points.size()));
        out = forward(net, encode_four(points[0]));
    } else {
        throw EncodingMismatch("network has no point encoding; use forward() with raw vectors");
    }
    if (out.size() != 3) throw ShapeMismatch("prediction network must have 3 outputs");
    return {out[0], out[1], out[2]};
}

}  // namespace fieldcomp
