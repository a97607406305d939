#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "scadaguard/tensor.hpp"

namespace scadaguard {

/// Trainable tensor with an accumulated gradient of identical shape.
struct Parameter {
    std::string id;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string name, Tensor v)
        : id(std::move(name)), value(v), grad(Tensor::zeros(v.shape)) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

enum class Mode { Train, Infer };
enum class Activation { Relu, Tanh, Identity };

/// Per-layer batch-norm state: learned running statistics, one entry per
/// feature (channel for 3-D inputs).
struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;

    explicit BatchNormState(std::size_t features = 0)
        : running_mean(features, 0.0), running_var(features, 1.0) {}
};

using NodeId = std::int32_t;

/// Reverse-mode tape. Nodes are appended in topological order during the
/// forward pass; backward() walks them once in reverse. A tape belongs to
/// one logical training context; tensors it hands out are immutable values.
class Tape {
public:
    static constexpr double kBatchNormEps = 1e-5;
    static constexpr double kBatchNormMomentum = 0.99;

    // Leaves.
    NodeId constant(Tensor v);
    NodeId leaf(Parameter& p);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    std::size_t node_count() const { return nodes_.size(); }

    /// Fills node gradients for every node reachable from `loss` and
    /// accumulates into the bound Parameters' grad fields. `loss` must be
    /// scalar. Repeated calls without zeroing accumulate.
    void backward(NodeId loss);

    // Layers (the full menu used by the encoder/decoder).
    NodeId dense(NodeId input, Parameter& weights, Parameter& bias);
    NodeId conv1d(NodeId input, Parameter& kernels, Parameter& bias);
    NodeId maxpool1d(NodeId input, std::size_t pool_size);
    NodeId upscale1d(NodeId input, std::size_t factor);
    NodeId batchnorm(NodeId input, Parameter& gamma, Parameter& beta,
                     BatchNormState& state, Mode mode);
    NodeId activation(NodeId input, Activation kind);

    // Shape / arithmetic glue.
    NodeId reshape(NodeId input, std::vector<std::size_t> shape);
    NodeId slice_cols(NodeId input, std::size_t col_begin, std::size_t col_end);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    NodeId sum_all(NodeId a);
    NodeId mean_rows(NodeId row_values);  // [batch] -> scalar

    // VAE-specific composites.
    /// z = mu + exp(0.5*logvar) * noise; gradient flows to mu and logvar only.
    NodeId reparameterize(NodeId mu, NodeId logvar, const Tensor& noise);
    /// Per-row KL(N(mu, diag exp(logvar)) || N(0, I)): [batch, d] -> [batch].
    NodeId kl_diag_gaussian(NodeId mu, NodeId logvar);
    /// Per-row Gaussian log density of constant x under (mean, per-channel
    /// logvar): mean is [batch, ch, len], channel_logvar is [ch], broadcast
    /// over batch and time. Returns [batch].
    NodeId gaussian_log_density_channels(const Tensor& x, NodeId mean, NodeId channel_logvar);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> backward;  // empty for leaves
        Parameter* bound = nullptr;
    };

    NodeId push(Tensor value, std::function<void()> backward = {}, Parameter* bound = nullptr);

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

// Pure forward-only activation helpers shared with inference paths.
double apply_activation(double x, Activation kind);

}  // namespace scadaguard
