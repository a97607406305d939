#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "scadaguard/errors.hpp"
#include "scadaguard/gradcheck.hpp"
#include "scadaguard/vae.hpp"

using namespace scadaguard;
namespace fs = std::filesystem;

namespace {

// Small architecture: cheap enough for finite differences over every block.
VaeConfig tiny_config(std::uint64_t seed = 1) {
    VaeConfig cfg;
    cfg.channels = 2;
    cfg.window_hours = 4;
    cfg.conv_specs = {{3, 2}};
    cfg.pool_size = 2;
    cfg.dense_units = {4};
    cfg.latent_dim = 2;
    cfg.seed = seed;
    return cfg;
}

Tensor random_windows(std::size_t batch, const VaeConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor t = Tensor::zeros({batch, cfg.channels, cfg.window_hours});
    for (double& v : t.data) v = n(rng);
    return t;
}

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config validation") {
    VaeConfig cfg;  // default: 43ch, 24h, 3 conv stages, pool 2
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.pooled_length() == 3);
    CHECK(cfg.flatten_dim() == 3 * 128);

    VaeConfig bad = cfg;
    bad.window_hours = 20;  // 20 / 2^3 does not divide
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    VaeConfig bad2 = cfg;
    bad2.latent_dim = 0;
    CHECK_THROWS_AS(bad2.validate(), ConfigError);
}

TEST_CASE("initialization: seeded, bounded, zero biases") {
    VaeConfig cfg = tiny_config(9);
    VaeModel a = make_vae_model(cfg);
    VaeModel b = make_vae_model(cfg);
    for (const auto& [name, p] : a.params) {
        CHECK(p.value.data == b.params.at(name).value.data);  // same seed, bit-identical
    }
    cfg.seed = 10;
    VaeModel c = make_vae_model(cfg);
    CHECK(a.param("enc.conv0.w").value.data != c.param("enc.conv0.w").value.data);

    // Glorot bound on the first conv: fan_in = 2*3, fan_out = 2*3.
    const double bound = std::sqrt(6.0 / (2.0 * 3 + 2.0 * 3));
    for (double v : a.param("enc.conv0.w").value.data) {
        CHECK(std::abs(v) <= bound);
    }
    for (double v : a.param("enc.conv0.b").value.data) CHECK(v == 0.0);
    for (double v : a.param("enc.bn_conv0.gamma").value.data) CHECK(v == 1.0);
    for (double v : a.param("enc.bn_conv0.beta").value.data) CHECK(v == 0.0);
    for (double v : a.output_logvar().value.data) CHECK(v == 0.0);
}

TEST_CASE("encode: zero window gives standard-normal posterior on a fresh model") {
    VaeModel m = make_vae_model(tiny_config());
    Tensor zero = Tensor::zeros({1, 2, 4});
    GaussianLatent lat = encode(m, zero, Mode::Infer);
    CHECK(lat.mu.shape == std::vector<std::size_t>{1, 2});
    for (double v : lat.mu.data) CHECK(v == 0.0);
    for (double v : lat.logvar.data) CHECK(v == 0.0);
}

TEST_CASE("encode/decode shapes and infer-mode determinism") {
    VaeConfig cfg = tiny_config();
    VaeModel m = make_vae_model(cfg);
    Tensor x = random_windows(3, cfg, 99);
    GaussianLatent a = encode(m, x);
    GaussianLatent b = encode(m, x);
    CHECK(a.mu.shape == std::vector<std::size_t>{3, 2});
    CHECK(a.mu.data == b.mu.data);
    CHECK(a.logvar.data == b.logvar.data);

    Tensor z = Tensor::zeros({3, 2});
    Reconstruction ra = decode(m, z);
    Reconstruction rb = decode(m, z);
    CHECK(ra.mean.shape == std::vector<std::size_t>{3, 2, 4});
    CHECK(ra.channel_logvar.shape == std::vector<std::size_t>{2});
    CHECK(ra.mean.data == rb.mean.data);
}

TEST_CASE("closed forms: KL and Gaussian log density") {
    CHECK(kl_diag_gaussian_value({0}, {0}) == 0.0);
    CHECK(kl_diag_gaussian_value({1}, {0}) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(kl_diag_gaussian_value({0}, {1}) ==
          doctest::Approx(0.5 * (std::exp(1.0) - 2.0)).epsilon(1e-14));

    const double at_mode = -0.5 * std::log(2.0 * 3.141592653589793);
    CHECK(gaussian_log_density_value({0}, {0}, {0}) == doctest::Approx(at_mode).epsilon(1e-14));
    CHECK(gaussian_log_density_value({1}, {0}, {0}) ==
          doctest::Approx(at_mode - 0.5).epsilon(1e-14));
    // additivity over independent dims
    CHECK(gaussian_log_density_value({0, 0, 0}, {0, 0, 0}, {0, 0, 0}) ==
          doctest::Approx(3.0 * at_mode).epsilon(1e-14));
}

TEST_CASE("elbo gradient passes finite differences with frozen noise") {
    VaeConfig cfg = tiny_config(3);
    VaeModel m = make_vae_model(cfg);
    // Batch of 8: with only two rows batch norm maps any weights to +-1, so
    // the weight gradients degenerate to the epsilon scale and the relative
    // comparison drowns in round-off.
    Tensor batch = random_windows(8, cfg, 5);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor noise = Tensor::zeros({8, cfg.latent_dim});
    for (double& v : noise.data) v = n(rng);

    // Reset running stats per evaluation so the loss stays a pure function
    // of the parameters.
    const auto bn0 = m.bn_states;
    auto eval = [&]() {
        Tape t;
        m.bn_states = bn0;
        return t.value(elbo_graph(m, t, batch, noise, Mode::Train)).data[0];
    };
    for (Parameter* p : m.all_params()) p->zero_grad();
    {
        Tape t;
        m.bn_states = bn0;
        t.backward(elbo_graph(m, t, batch, noise, Mode::Train));
    }

    // Element-wise central differences. Biases feeding a batch-norm layer
    // (and shift directions the next normalization cancels) leave the loss
    // exactly invariant: both sides of the comparison are pure round-off
    // there, so those elements are held to an absolute noise bound instead
    // of the relative one.
    const double h = 1e-5;
    double worst = 0.0;
    for (Parameter* p : m.all_params()) {
        for (std::size_t j = 0; j < p->value.size(); ++j) {
            const double orig = p->value.data[j];
            p->value.data[j] = orig + h;
            const double fp = eval();
            p->value.data[j] = orig - h;
            const double fm = eval();
            p->value.data[j] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = p->grad.data[j];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (std::abs(a) < 1e-10) {
                CHECK(std::abs(numeric) < 1e-5);  // invariant direction: round-off only
            } else {
                worst = std::max(worst, rel);
            }
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("lrp: mode sampling is deterministic and matches the toy closed form") {
    VaeConfig cfg = tiny_config();
    VaeModel m = make_vae_model(cfg);
    Tensor x = random_windows(1, cfg, 21);
    const double a = lrp(m, x);
    const double b = lrp(m, x);
    CHECK(a == b);

    // Fresh model on a zero window: mu=0, logvar=0, decoder mean is some
    // value; with out_logvar = 0 the posterior term is exactly the
    // latent-dim standard normal mode density.
    Tensor zero = Tensor::zeros({1, 2, 4});
    GaussianLatent lat = encode(m, zero);
    Reconstruction rec = decode(m, Tensor::zeros({1, 2}));
    double recon = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 4; ++t) {
            recon += gaussian_log_density_value({0.0}, {rec.mean.at(0, c, t)}, {0.0});
        }
    const double posterior = gaussian_log_density_value({0, 0}, {0, 0}, {0, 0});
    CHECK(lrp(m, zero) == doctest::Approx(recon + posterior).epsilon(1e-12));
}

TEST_CASE("lrp: monte-carlo is seeded and tightens with more draws") {
    VaeConfig cfg = tiny_config();
    VaeModel m = make_vae_model(cfg);
    Tensor x = random_windows(1, cfg, 33);
    CHECK(lrp(m, x, LrpSampling::mc(8, 4)) == lrp(m, x, LrpSampling::mc(8, 4)));
    CHECK(lrp(m, x, LrpSampling::mc(8, 4)) != lrp(m, x, LrpSampling::mc(8, 5)));

    // Sample std over re-seeds shrinks as L grows.
    auto spread = [&](std::size_t L) {
        double mean = 0.0, sq = 0.0;
        const int R = 12;
        for (int r = 0; r < R; ++r) {
            const double v = lrp(m, x, LrpSampling::mc(L, 100 + static_cast<std::uint64_t>(r)));
            mean += v;
            sq += v * v;
        }
        mean /= R;
        return std::sqrt(std::max(0.0, sq / R - mean * mean));
    };
    const double s1 = spread(1), s16 = spread(16), s256 = spread(256);
    CHECK(s16 < s1);
    CHECK(s256 < s16);
}

TEST_CASE("model file round trip") {
    VaeConfig cfg = tiny_config(77);
    VaeModel m = make_vae_model(cfg);
    m.channel_names = {"A", "B"};
    m.norm_stats.mean = {1.0, 2.0};
    m.norm_stats.std = {0.5, 0.25};
    // Perturb running stats so the round trip covers them too.
    m.bn_states.at("enc.bn_conv0").running_mean[0] = 0.125;

    const std::string path = temp_path("sg_model_roundtrip.bin");
    save_model(m, path);
    VaeModel r = load_model(path);

    CHECK(r.config.channels == cfg.channels);
    CHECK(r.config.window_hours == cfg.window_hours);
    CHECK(r.config.dense_units == cfg.dense_units);
    CHECK(r.config.latent_dim == cfg.latent_dim);
    CHECK(r.config.seed == cfg.seed);
    CHECK(r.channel_names == m.channel_names);
    CHECK(r.norm_stats.mean == m.norm_stats.mean);
    CHECK(r.norm_stats.std == m.norm_stats.std);
    for (const auto& [name, p] : m.params) {
        CHECK(r.params.at(name).value.data == p.value.data);
    }
    CHECK(r.bn_states.at("enc.bn_conv0").running_mean[0] == 0.125);

    // LRP invariant under serialization.
    Tensor x = random_windows(1, cfg, 55);
    CHECK(std::abs(lrp(m, x) - lrp(r, x)) <= 1e-12);

    // Saving the loaded model reproduces the file bitwise.
    const std::string path2 = temp_path("sg_model_roundtrip2.bin");
    save_model(r, path2);
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("model file corruption is rejected, never half-loaded") {
    VaeModel m = make_vae_model(tiny_config());
    const std::string path = temp_path("sg_model_corrupt.bin");
    save_model(m, path);
    const std::string bytes = slurp(path);

    auto write_bytes = [&](const std::string& b) {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os << b;
    };

    SUBCASE("truncation") {
        write_bytes(bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("truncated"), IoError);
    }
    SUBCASE("bad magic") {
        std::string b = bytes;
        b[0] = 'X';
        write_bytes(b);
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("magic"), IoError);
    }
    SUBCASE("unsupported version") {
        std::string b = bytes;
        b[4] = 9;
        write_bytes(b);
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("version"), IoError);
    }
    SUBCASE("unknown block name") {
        std::string b = bytes;
        const auto pos = b.find("enc.conv0.w");
        REQUIRE(pos != std::string::npos);
        b[pos + 4] = 'X';  // enc.Xonv0.w
        write_bytes(b);
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("unknown block"), IoError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_model(temp_path("sg_no_such_model.bin")), IoError);
    }
    std::remove(path.c_str());
}
