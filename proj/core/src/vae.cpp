#include "scadaguard/vae.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <sstream>

#include "scadaguard/errors.hpp"

namespace scadaguard {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

void VaeConfig::validate() const {
    if (channels == 0 || window_hours == 0) {
        throw ConfigError("vae config: channels and window_hours must be positive");
    }
    if (latent_dim < 1) throw ConfigError("vae config: latent_dim must be >= 1");
    if (pool_size < 1) throw ConfigError("vae config: pool_size must be >= 1");
    std::size_t len = window_hours;
    for (std::size_t i = 0; i < conv_specs.size(); ++i) {
        if (conv_specs[i].filter_size % 2 == 0) {
            throw ConfigError("vae config: conv stage " + std::to_string(i) +
                              " has even filter size " +
                              std::to_string(conv_specs[i].filter_size));
        }
        if (len % pool_size != 0) {
            throw ConfigError("vae config: window_hours " + std::to_string(window_hours) +
                              " not divisible by pool_size^" + std::to_string(i + 1));
        }
        len /= pool_size;
    }
    if (dense_units.empty()) throw ConfigError("vae config: dense_units must be non-empty");
}

std::size_t VaeConfig::pooled_length() const {
    std::size_t len = window_hours;
    for (std::size_t i = 0; i < conv_specs.size(); ++i) len /= pool_size;
    return len;
}

std::size_t VaeConfig::flatten_dim() const {
    return conv_specs.empty() ? channels * window_hours
                              : conv_specs.back().num_filters * pooled_length();
}

Parameter& VaeModel::param(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw NumericError("unknown parameter block: " + name);
    return it->second;
}

const Parameter& VaeModel::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw NumericError("unknown parameter block: " + name);
    return it->second;
}

std::vector<Parameter*> VaeModel::all_params() {
    std::vector<Parameter*> out;
    out.reserve(params.size());
    for (auto& [name, p] : params) out.push_back(&p);
    return out;
}

void VaeModel::zero_grads() {
    for (auto& [name, p] : params) p.zero_grad();
}

namespace {

struct Initializer {
    std::mt19937_64 rng;

    explicit Initializer(std::uint64_t seed) : rng(seed) {}

    Tensor glorot(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Tensor t = Tensor::zeros(std::move(shape));
        for (double& v : t.data) v = dist(rng);
        return t;
    }
};

void add_dense(VaeModel& m, Initializer& init, const std::string& name, std::size_t in,
               std::size_t out) {
    m.params.emplace(name + ".w", Parameter(name + ".w", init.glorot({in, out}, in, out)));
    m.params.emplace(name + ".b", Parameter(name + ".b", Tensor::zeros({out})));
}

void add_conv(VaeModel& m, Initializer& init, const std::string& name, std::size_t cin,
              std::size_t cout, std::size_t s) {
    m.params.emplace(name + ".w",
                     Parameter(name + ".w", init.glorot({cout, cin, s}, cin * s, cout * s)));
    m.params.emplace(name + ".b", Parameter(name + ".b", Tensor::zeros({cout})));
}

void add_bn(VaeModel& m, const std::string& name, std::size_t features) {
    m.params.emplace(name + ".gamma",
                     Parameter(name + ".gamma", Tensor::full({features}, 1.0)));
    m.params.emplace(name + ".beta", Parameter(name + ".beta", Tensor::zeros({features})));
    m.bn_states.emplace(name, BatchNormState(features));
}

}  // namespace

VaeModel make_vae_model(const VaeConfig& config) {
    config.validate();
    VaeModel m;
    m.config = config;
    Initializer init(config.seed);

    const std::size_t n = config.conv_specs.size();
    // Encoder conv stages.
    std::size_t cin = config.channels;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cs = config.conv_specs[i];
        add_conv(m, init, "enc.conv" + std::to_string(i), cin, cs.num_filters, cs.filter_size);
        add_bn(m, "enc.bn_conv" + std::to_string(i), cs.num_filters);
        cin = cs.num_filters;
    }
    // Encoder dense stack.
    std::size_t prev = config.flatten_dim();
    for (std::size_t j = 0; j < config.dense_units.size(); ++j) {
        add_dense(m, init, "enc.dense" + std::to_string(j), prev, config.dense_units[j]);
        add_bn(m, "enc.bn_dense" + std::to_string(j), config.dense_units[j]);
        prev = config.dense_units[j];
    }
    add_dense(m, init, "enc.head", prev, 2 * config.latent_dim);

    // Decoder dense stack (mirror).
    prev = config.latent_dim;
    std::size_t stage = 0;
    for (std::size_t j = config.dense_units.size(); j-- > 0; ++stage) {
        add_dense(m, init, "dec.dense" + std::to_string(stage), prev, config.dense_units[j]);
        add_bn(m, "dec.bn_dense" + std::to_string(stage), config.dense_units[j]);
        prev = config.dense_units[j];
    }
    add_dense(m, init, "dec.dense" + std::to_string(stage), prev, config.flatten_dim());
    add_bn(m, "dec.bn_dense" + std::to_string(stage), config.flatten_dim());

    // Decoder conv stages, mirroring encoder stage k: C_{k+1} -> C_k.
    for (std::size_t k = n; k-- > 0;) {
        const std::size_t from = config.conv_specs[k].num_filters;
        const std::size_t to = k == 0 ? config.channels : config.conv_specs[k - 1].num_filters;
        const std::size_t s = config.conv_specs[k].filter_size;
        add_conv(m, init, "dec.conv" + std::to_string(k), from, to, s);
        if (k != 0) add_bn(m, "dec.bn_conv" + std::to_string(k), to);
    }

    m.params.emplace("dec.out_logvar",
                     Parameter("dec.out_logvar", Tensor::zeros({config.channels})));

    m.norm_stats.mean.assign(config.channels, 0.0);
    m.norm_stats.std.assign(config.channels, 1.0);
    m.channel_names.resize(config.channels);
    for (std::size_t c = 0; c < config.channels; ++c) {
        m.channel_names[c] = "ch" + std::to_string(c);
    }
    return m;
}

LatentNodes encode_graph(VaeModel& model, Tape& tape, NodeId window, Mode mode) {
    const VaeConfig& cfg = model.config;
    // Copy the shape: pushing nodes below may reallocate the tape's storage.
    const std::vector<std::size_t> xshape = tape.value(window).shape;
    if (xshape.size() != 3 || xshape[1] != cfg.channels || xshape[2] != cfg.window_hours) {
        throw NumericError("encode: window " + shape_to_string(xshape) +
                           " does not match config [B," + std::to_string(cfg.channels) + "," +
                           std::to_string(cfg.window_hours) + "]");
    }
    const std::size_t batch = xshape[0];
    NodeId h = window;
    for (std::size_t i = 0; i < cfg.conv_specs.size(); ++i) {
        const std::string ci = std::to_string(i);
        h = tape.conv1d(h, model.param("enc.conv" + ci + ".w"),
                        model.param("enc.conv" + ci + ".b"));
        h = tape.batchnorm(h, model.param("enc.bn_conv" + ci + ".gamma"),
                           model.param("enc.bn_conv" + ci + ".beta"),
                           model.bn_states.at("enc.bn_conv" + ci), mode);
        h = tape.activation(h, Activation::Relu);
        h = tape.maxpool1d(h, cfg.pool_size);
    }
    h = tape.reshape(h, {batch, cfg.flatten_dim()});
    for (std::size_t j = 0; j < cfg.dense_units.size(); ++j) {
        const std::string cj = std::to_string(j);
        h = tape.dense(h, model.param("enc.dense" + cj + ".w"),
                       model.param("enc.dense" + cj + ".b"));
        h = tape.batchnorm(h, model.param("enc.bn_dense" + cj + ".gamma"),
                           model.param("enc.bn_dense" + cj + ".beta"),
                           model.bn_states.at("enc.bn_dense" + cj), mode);
        h = tape.activation(h, Activation::Relu);
    }
    h = tape.dense(h, model.param("enc.head.w"), model.param("enc.head.b"));
    return LatentNodes{tape.slice_cols(h, 0, cfg.latent_dim),
                       tape.slice_cols(h, cfg.latent_dim, 2 * cfg.latent_dim)};
}

NodeId decode_mean_graph(VaeModel& model, Tape& tape, NodeId z, Mode mode) {
    const VaeConfig& cfg = model.config;
    const std::vector<std::size_t> zshape = tape.value(z).shape;
    if (zshape.size() != 2 || zshape[1] != cfg.latent_dim) {
        throw NumericError("decode: z " + shape_to_string(zshape) + " does not match latent_dim " +
                           std::to_string(cfg.latent_dim));
    }
    const std::size_t batch = zshape[0];
    NodeId h = z;
    const std::size_t n_dense = cfg.dense_units.size() + 1;
    for (std::size_t j = 0; j < n_dense; ++j) {
        const std::string cj = std::to_string(j);
        h = tape.dense(h, model.param("dec.dense" + cj + ".w"),
                       model.param("dec.dense" + cj + ".b"));
        h = tape.batchnorm(h, model.param("dec.bn_dense" + cj + ".gamma"),
                           model.param("dec.bn_dense" + cj + ".beta"),
                           model.bn_states.at("dec.bn_dense" + cj), mode);
        h = tape.activation(h, Activation::Relu);
    }
    const std::size_t n = cfg.conv_specs.size();
    if (n > 0) {
        h = tape.reshape(h, {batch, cfg.conv_specs.back().num_filters, cfg.pooled_length()});
        for (std::size_t k = n; k-- > 0;) {
            const std::string ck = std::to_string(k);
            h = tape.upscale1d(h, cfg.pool_size);
            h = tape.conv1d(h, model.param("dec.conv" + ck + ".w"),
                            model.param("dec.conv" + ck + ".b"));
            if (k != 0) {
                h = tape.batchnorm(h, model.param("dec.bn_conv" + ck + ".gamma"),
                                   model.param("dec.bn_conv" + ck + ".beta"),
                                   model.bn_states.at("dec.bn_conv" + ck), mode);
                h = tape.activation(h, Activation::Relu);
            }
        }
    } else {
        h = tape.reshape(h, {batch, cfg.channels, cfg.window_hours});
    }
    return h;
}

NodeId elbo_graph(VaeModel& model, Tape& tape, const Tensor& window_batch, const Tensor& noise,
                  Mode mode) {
    if (mode == Mode::Train && window_batch.shape[0] < 2) {
        throw NumericError("elbo: train mode requires batch >= 2 (batch normalization)");
    }
    NodeId x = tape.constant(window_batch);
    LatentNodes latent = encode_graph(model, tape, x, mode);
    NodeId kl = tape.kl_diag_gaussian(latent.mu, latent.logvar);
    NodeId z = tape.reparameterize(latent.mu, latent.logvar, noise);
    NodeId mean = decode_mean_graph(model, tape, z, mode);
    NodeId lv = tape.leaf(model.output_logvar());
    NodeId recon = tape.gaussian_log_density_channels(window_batch, mean, lv);
    NodeId per_row = tape.sub(recon, kl);
    return tape.mean_rows(per_row);
}

GaussianLatent encode(VaeModel& model, const Tensor& window, Mode mode) {
    Tape tape;
    NodeId x = tape.constant(window);
    LatentNodes nodes = encode_graph(model, tape, x, mode);
    return GaussianLatent{tape.value(nodes.mu), tape.value(nodes.logvar)};
}

Reconstruction decode(VaeModel& model, const Tensor& z, Mode mode) {
    Tape tape;
    NodeId zn = tape.constant(z);
    NodeId mean = decode_mean_graph(model, tape, zn, mode);
    return Reconstruction{tape.value(mean), model.output_logvar().value};
}

Tensor reparameterize_value(const GaussianLatent& latent, const Tensor& noise) {
    if (!latent.mu.same_shape(noise)) {
        throw NumericError("reparameterize: noise " + noise.shape_str() + " vs mu " +
                           latent.mu.shape_str());
    }
    Tensor z = latent.mu;
    for (std::size_t i = 0; i < z.size(); ++i) {
        z.data[i] += std::exp(0.5 * latent.logvar.data[i]) * noise.data[i];
    }
    return z;
}

double kl_diag_gaussian_value(const std::vector<double>& mu, const std::vector<double>& logvar) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        acc += mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
    }
    return 0.5 * acc;
}

double gaussian_log_density_value(const std::vector<double>& x, const std::vector<double>& mean,
                                  const std::vector<double>& logvar) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - mean[i];
        acc += -0.5 * (kLog2Pi + logvar[i] + d * d * std::exp(-logvar[i]));
    }
    return acc;
}

std::string LrpSampling::describe() const {
    if (kind == Kind::PosteriorMode) return "mode";
    std::ostringstream os;
    os << "mc(L=" << draws << ",seed=" << seed << ")";
    return os.str();
}

namespace {

double lrp_for_z(VaeModel& model, const Tensor& window, const GaussianLatent& latent,
                 const Tensor& z) {
    Tape tape;
    NodeId zn = tape.constant(z);
    NodeId mean_node = decode_mean_graph(model, tape, zn, Mode::Infer);
    const Tensor& mean = tape.value(mean_node);
    const std::vector<double>& out_lv = model.output_logvar().value.data;

    const std::size_t C = model.config.channels, W = model.config.window_hours;
    double recon = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        const double lv = out_lv[c];
        const double inv_var = std::exp(-lv);
        for (std::size_t t = 0; t < W; ++t) {
            const double d = window.at(0, c, t) - mean.at(0, c, t);
            recon += -0.5 * (kLog2Pi + lv + d * d * inv_var);
        }
    }
    const double posterior =
        gaussian_log_density_value(z.data, latent.mu.data, latent.logvar.data);
    return recon + posterior;
}

}  // namespace

double lrp(VaeModel& model, const Tensor& window, const LrpSampling& sampling) {
    if (window.rank() != 3 || window.shape[0] != 1) {
        throw NumericError("lrp: expected a single window [1, channels, hours], got " +
                           window.shape_str());
    }
    for (double v : window.data) {
        if (std::abs(v) > 50.0) {
            std::cerr << "warning: lrp input value " << v
                      << " looks unnormalized (|x| > 50 in normalized units)\n";
            break;
        }
    }
    GaussianLatent latent = encode(model, window, Mode::Infer);
    if (sampling.kind == LrpSampling::Kind::PosteriorMode) {
        return lrp_for_z(model, window, latent, latent.mu);
    }
    std::mt19937_64 rng(sampling.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double acc = 0.0;
    for (std::size_t l = 0; l < sampling.draws; ++l) {
        Tensor noise = Tensor::zeros(latent.mu.shape);
        for (double& v : noise.data) v = normal(rng);
        acc += lrp_for_z(model, window, latent, reparameterize_value(latent, noise));
    }
    return acc / static_cast<double>(sampling.draws);
}

}  // namespace scadaguard
