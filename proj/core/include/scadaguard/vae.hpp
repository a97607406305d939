#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scadaguard/autodiff.hpp"
#include "scadaguard/tensor.hpp"

namespace scadaguard {

struct ConvSpec {
    std::size_t filter_size = 3;
    std::size_t num_filters = 32;
};

struct VaeConfig {
    std::size_t channels = 43;
    std::size_t window_hours = 24;
    std::vector<ConvSpec> conv_specs{{3, 32}, {3, 64}, {3, 128}};
    std::size_t pool_size = 2;
    std::vector<std::size_t> dense_units{256, 128};
    std::size_t latent_dim = 16;
    std::uint64_t seed = 0;

    /// Throws ConfigError when window_hours is not divisible by
    /// pool_size^len(conv_specs) or latent_dim < 1.
    void validate() const;
    /// Temporal length after all encoder pooling stages.
    std::size_t pooled_length() const;
    /// Flattened feature count fed into the encoder dense stack.
    std::size_t flatten_dim() const;
};

struct GaussianLatent {
    Tensor mu;      // [batch, latent_dim]
    Tensor logvar;  // [batch, latent_dim]
};

struct Reconstruction {
    Tensor mean;            // [batch, channels, window_hours]
    Tensor channel_logvar;  // [channels], broadcast over batch and time
};

/// Per-channel z-score statistics fitted on training data.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Full parameter set of the encoder/decoder pair plus input normalization
/// and batch-norm running statistics. A model in infer mode is immutable
/// and safe to score from many threads.
struct VaeModel {
    VaeConfig config;
    std::vector<std::string> channel_names;
    NormStats norm_stats;
    std::map<std::string, Parameter> params;
    std::map<std::string, BatchNormState> bn_states;

    Parameter& param(const std::string& name);
    const Parameter& param(const std::string& name) const;
    Parameter& output_logvar() { return param("dec.out_logvar"); }

    std::vector<Parameter*> all_params();
    void zero_grads();
};

/// Builds a model with seeded uniform +-sqrt(6/(fan_in+fan_out)) weights,
/// zero biases, gamma=1/beta=0, zero output log-variance.
VaeModel make_vae_model(const VaeConfig& config);

struct LatentNodes {
    NodeId mu;
    NodeId logvar;
};

// Graph builders (training path).
LatentNodes encode_graph(VaeModel& model, Tape& tape, NodeId window, Mode mode);
NodeId decode_mean_graph(VaeModel& model, Tape& tape, NodeId z, Mode mode);

/// Mean-over-batch variational lower bound:
///   mean_b [ -KL(q(z|x_b) || N(0,I)) + log p(x_b | z_b) ],
/// with z_b drawn via the reparameterization using the supplied noise.
NodeId elbo_graph(VaeModel& model, Tape& tape, const Tensor& window_batch, const Tensor& noise,
                  Mode mode);

// Inference wrappers (no gradients retained).
GaussianLatent encode(VaeModel& model, const Tensor& window, Mode mode = Mode::Infer);
Reconstruction decode(VaeModel& model, const Tensor& z, Mode mode = Mode::Infer);
Tensor reparameterize_value(const GaussianLatent& latent, const Tensor& noise);

// Closed-form pieces (plain values, used by LRP and tests).
double kl_diag_gaussian_value(const std::vector<double>& mu, const std::vector<double>& logvar);
double gaussian_log_density_value(const std::vector<double>& x, const std::vector<double>& mean,
                                  const std::vector<double>& logvar);

struct LrpSampling {
    enum class Kind { PosteriorMode, MonteCarlo };
    Kind kind = Kind::PosteriorMode;
    std::size_t draws = 16;
    std::uint64_t seed = 0;

    static LrpSampling mode() { return {}; }
    static LrpSampling mc(std::size_t draws, std::uint64_t seed) {
        return {Kind::MonteCarlo, draws, seed};
    }
    std::string describe() const;
};

/// Log reconstruction probability of a single window [1, channels, hours]:
/// log p(x_hat = x | z) + log q(z | x), z at the posterior mode or averaged
/// over seeded Monte-Carlo draws. Window must already be normalized.
double lrp(VaeModel& model, const Tensor& window, const LrpSampling& sampling = {});

// Model file round trip (format: versioned binary, see model_io.cpp).
void save_model(const VaeModel& model, const std::string& path);
VaeModel load_model(const std::string& path);

}  // namespace scadaguard
