#include "scadaguard/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "scadaguard/errors.hpp"

namespace scadaguard {

void TrainConfig::validate() const {
    if (batch_size < 2) {
        throw ConfigError("train config: batch_size must be >= 2 (batch normalization)");
    }
    if (epochs == 0) throw ConfigError("train config: epochs must be >= 1");
    if (grad_clip_norm && *grad_clip_norm <= 0.0) {
        throw ConfigError("train config: grad_clip_norm must be positive");
    }
}

void adam_step(std::vector<Parameter*> params, AdamState& state) {
    for (Parameter* p : params) {
        if (!p->grad.all_finite()) {
            throw NumericError("adam: non-finite gradient in parameter block '" + p->id + "'");
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (Parameter* p : params) {
        auto mit = state.m.find(p->id);
        if (mit == state.m.end()) {
            mit = state.m.emplace(p->id, Tensor::zeros(p->value.shape)).first;
            state.v.emplace(p->id, Tensor::zeros(p->value.shape));
        }
        Tensor& m = mit->second;
        Tensor& v = state.v.at(p->id);
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad.data[i];
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g;
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p->value.data[i] -= state.alpha * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

namespace {

struct Checkpoint {
    std::map<std::string, Tensor> values;
    std::map<std::string, BatchNormState> bn;

    static Checkpoint take(const VaeModel& model) {
        Checkpoint cp;
        for (const auto& [name, p] : model.params) cp.values.emplace(name, p.value);
        cp.bn = model.bn_states;
        return cp;
    }
    void restore(VaeModel& model) const {
        for (auto& [name, p] : model.params) p.value = values.at(name);
        model.bn_states = bn;
    }
};

Tensor gather_batch(const WindowBatch& wb, const std::vector<std::size_t>& idx,
                    std::size_t begin, std::size_t count) {
    const std::size_t C = wb.windows.shape[1], W = wb.windows.shape[2];
    Tensor out = Tensor::zeros({count, C, W});
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t src = idx[begin + n];
        std::copy(wb.windows.data.begin() + static_cast<std::ptrdiff_t>(src * C * W),
                  wb.windows.data.begin() + static_cast<std::ptrdiff_t>((src + 1) * C * W),
                  out.data.begin() + static_cast<std::ptrdiff_t>(n * C * W));
    }
    return out;
}

Tensor draw_noise(std::mt19937_64& rng, std::size_t batch, std::size_t latent) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor n = Tensor::zeros({batch, latent});
    for (double& v : n.data) v = normal(rng);
    return n;
}

void clip_gradients(std::vector<Parameter*>& params, double max_norm) {
    double sq = 0.0;
    for (Parameter* p : params) {
        for (double g : p->grad.data) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (Parameter* p : params) {
            for (double& g : p->grad.data) g *= s;
        }
    }
}

std::string find_nonfinite_block(VaeModel& model) {
    for (auto& [name, p] : model.params) {
        if (!p.value.all_finite() || !p.grad.all_finite()) return name;
    }
    return "(none)";
}

/// One maximization step over the batch; returns the batch ELBO.
double train_step(VaeModel& model, const Tensor& batch, const Tensor& noise, AdamState& adam,
                  const TrainConfig& cfg) {
    model.zero_grads();
    Tape tape;
    NodeId elbo = elbo_graph(model, tape, batch, noise, Mode::Train);
    const double elbo_v = tape.value(elbo).data[0];
    if (!std::isfinite(elbo_v)) {
        throw NumericError("non-finite ELBO; suspect parameter block '" +
                           find_nonfinite_block(model) + "'");
    }
    tape.backward(elbo);
    std::vector<Parameter*> params = model.all_params();
    // Maximizing the lower bound: Adam consumes g = -dELBO/dparam.
    for (Parameter* p : params) {
        for (double& g : p->grad.data) g = -g;
    }
    if (cfg.grad_clip_norm) clip_gradients(params, *cfg.grad_clip_norm);
    adam_step(params, adam);
    return elbo_v;
}

double eval_elbo(VaeModel& model, const WindowBatch& wb, std::size_t batch_size) {
    std::vector<std::size_t> idx(wb.count());
    std::iota(idx.begin(), idx.end(), 0);
    double acc = 0.0;
    std::size_t nb = 0;
    for (std::size_t b = 0; b < wb.count(); b += batch_size) {
        const std::size_t count = std::min(batch_size, wb.count() - b);
        Tensor batch = gather_batch(wb, idx, b, count);
        Tensor noise = Tensor::zeros({count, model.config.latent_dim});
        Tape tape;
        NodeId elbo = elbo_graph(model, tape, batch, noise, Mode::Infer);
        acc += tape.value(elbo).data[0];
        ++nb;
    }
    return nb ? acc / static_cast<double>(nb) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TrainReport fit(VaeModel& model, const WindowBatch& train, const WindowBatch* valid,
                const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    if (train.count() < 2) {
        throw DataError("fit: need at least 2 training windows, got " +
                        std::to_string(train.count()));
    }
    std::mt19937_64 rng(seed);
    AdamState adam;
    TrainReport report;
    Checkpoint last_good = Checkpoint::take(model);
    double best_valid = -std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    std::vector<std::size_t> idx(train.count());
    std::iota(idx.begin(), idx.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(idx.begin(), idx.end(), rng);
        double elbo_acc = 0.0;
        std::size_t nb = 0;
        try {
            for (std::size_t b = 0; b < train.count(); b += config.batch_size) {
                const std::size_t count = std::min(config.batch_size, train.count() - b);
                if (count < 2) continue;  // batch norm needs >= 2 rows
                Tensor batch = gather_batch(train, idx, b, count);
                Tensor noise = draw_noise(rng, count, model.config.latent_dim);
                elbo_acc += train_step(model, batch, noise, adam, config);
                ++nb;
            }
        } catch (const NumericError&) {
            last_good.restore(model);
            throw;
        }

        EpochStats es;
        es.epoch = epoch;
        es.mean_elbo = nb ? elbo_acc / static_cast<double>(nb) : 0.0;
        es.valid_elbo = valid ? eval_elbo(model, *valid, config.batch_size)
                              : std::numeric_limits<double>::quiet_NaN();
        es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(es);
        last_good = Checkpoint::take(model);

        if (valid && config.early_stop_patience) {
            if (es.valid_elbo > best_valid) {
                best_valid = es.valid_elbo;
                stale = 0;
            } else if (++stale >= *config.early_stop_patience) {
                break;
            }
        }
    }
    return report;
}

void online_update(VaeModel& model, const WindowBatch& new_batch, AdamState& state,
                   std::size_t steps, std::uint64_t seed) {
    if (steps == 0) return;
    if (new_batch.count() < 2) {
        throw DataError("online_update: need at least 2 windows, got " +
                        std::to_string(new_batch.count()));
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(new_batch.count());
    std::iota(idx.begin(), idx.end(), 0);
    TrainConfig cfg;
    cfg.batch_size = std::max<std::size_t>(2, new_batch.count());
    for (std::size_t s = 0; s < steps; ++s) {
        Tensor batch = gather_batch(new_batch, idx, 0, new_batch.count());
        Tensor noise = draw_noise(rng, new_batch.count(), model.config.latent_dim);
        train_step(model, batch, noise, state, cfg);
    }
}

std::string TrainReport::to_table() const {
    std::ostringstream os;
    os << "epoch  mean_elbo        valid_elbo       seconds\n";
    for (const auto& e : epochs) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-6zu %-16.6f %-16.6f %.3f\n", e.epoch, e.mean_elbo,
                      e.valid_elbo, e.seconds);
        os << buf;
    }
    return os.str();
}

std::string TrainReport::to_csv() const {
    std::ostringstream os;
    os << "epoch,mean_elbo,valid_elbo,seconds\n";
    for (const auto& e : epochs) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.3f\n", e.epoch, e.mean_elbo,
                      e.valid_elbo, e.seconds);
        os << buf;
    }
    return os.str();
}

}  // namespace scadaguard
