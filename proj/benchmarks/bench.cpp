// Microbenchmarks for the hot paths: convolution forward, one ELBO training
// step, and LRP scoring of a single window.

#include <random>

#include "benchmark/benchmark.h"
#include "scadaguard/training.hpp"
#include "scadaguard/vae.hpp"

using namespace scadaguard;

namespace {

VaeConfig default_config(std::size_t channels) {
    VaeConfig cfg;
    cfg.channels = channels;
    cfg.seed = 1;
    return cfg;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = n(rng);
    return t;
}

void bm_conv1d_forward(benchmark::State& state) {
    Parameter kernels("k", random_tensor({32, 43, 3}, 2));
    Parameter bias("b", Tensor::zeros({32}));
    Tensor x = random_tensor({64, 43, 24}, 3);
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(tape.value(tape.conv1d(tape.constant(x), kernels, bias)));
    }
}
BENCHMARK(bm_conv1d_forward)->Unit(benchmark::kMillisecond);

void bm_elbo_train_step(benchmark::State& state) {
    VaeModel model = make_vae_model(default_config(10));
    Tensor batch = random_tensor({64, 10, 24}, 4);
    Tensor noise = random_tensor({64, 16}, 5);
    AdamState adam;
    for (auto _ : state) {
        Tape tape;
        NodeId elbo = elbo_graph(model, tape, batch, noise, Mode::Train);
        model.zero_grads();
        tape.backward(tape.scale(elbo, -1.0));
        adam_step(model.all_params(), adam);
    }
}
BENCHMARK(bm_elbo_train_step)->Unit(benchmark::kMillisecond);

void bm_lrp_score_window(benchmark::State& state) {
    VaeModel model = make_vae_model(default_config(10));
    Tensor window = random_tensor({1, 10, 24}, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lrp(model, window));
    }
}
BENCHMARK(bm_lrp_score_window)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
