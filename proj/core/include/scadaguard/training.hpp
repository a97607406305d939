#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scadaguard/dataio.hpp"
#include "scadaguard/vae.hpp"

namespace scadaguard {

/// Adam optimizer state: per-parameter first/second moments and step count.
struct AdamState {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t t = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

/// One Adam step. Gradients are read from each parameter's grad field and
/// must be finite; a non-finite gradient refuses the step and names the
/// offending block. Values are updated in place.
void adam_step(std::vector<Parameter*> params, AdamState& state);

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 200;
    std::optional<double> grad_clip_norm = 5.0;
    std::optional<std::size_t> early_stop_patience;  // on validation ELBO

    void validate() const;  // batch_size >= 2 (batch norm)
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_elbo = 0.0;
    double valid_elbo = 0.0;  // NaN when no validation set
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;

    std::string to_table() const;
    std::string to_csv() const;
};

/// Jointly trains encoder and decoder by maximizing the ELBO with Adam.
/// Deterministic given the seed: shuffling and noise draws all derive from
/// it. Windows must already be normalized with the model's norm_stats.
/// A non-finite ELBO aborts with the last epoch's parameters restored.
TrainReport fit(VaeModel& model, const WindowBatch& train, const WindowBatch* valid,
                const TrainConfig& config, std::uint64_t seed);

/// Streaming update: `steps` Adam steps on only the new batch. Channel
/// normalization statistics are frozen so LRP scales stay comparable.
void online_update(VaeModel& model, const WindowBatch& new_batch, AdamState& state,
                   std::size_t steps, std::uint64_t seed);

}  // namespace scadaguard
