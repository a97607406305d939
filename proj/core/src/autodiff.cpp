#include "scadaguard/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "scadaguard/errors.hpp"

namespace scadaguard {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)
}

double apply_activation(double x, Activation kind) {
    switch (kind) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Identity: return x;
    }
    return x;
}

NodeId Tape::push(Tensor value, std::function<void()> backward, Parameter* bound) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backward), bound});
    Node& n = nodes_.back();
    n.grad = Tensor::zeros(n.value.shape);
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Tensor v) { return push(std::move(v)); }

NodeId Tape::leaf(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return it->second;
    NodeId id = push(p.value, {}, &p);
    param_nodes_.emplace(&p, id);
    return id;
}

void Tape::backward(NodeId loss) {
    if (nodes_[loss].value.size() != 1) {
        throw NumericError("backward requires a scalar loss, got shape " +
                           nodes_[loss].value.shape_str());
    }
    for (Node& n : nodes_) {
        std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    }
    nodes_[loss].grad.data[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (nodes_[i].backward) nodes_[i].backward();
    }
    for (auto& [param, id] : param_nodes_) {
        Parameter* p = nodes_[id].bound;
        const Tensor& g = nodes_[id].grad;
        for (std::size_t k = 0; k < g.size(); ++k) p->grad.data[k] += g.data[k];
    }
}

NodeId Tape::dense(NodeId input, Parameter& weights, Parameter& bias) {
    NodeId w = leaf(weights);
    NodeId b = leaf(bias);
    const Tensor& x = value(input);
    const Tensor& W = value(w);
    const Tensor& bv = value(b);
    if (x.rank() != 2 || W.rank() != 2 || x.shape[1] != W.shape[0]) {
        throw NumericError("dense: input " + x.shape_str() + " incompatible with weights " +
                           W.shape_str());
    }
    if (bv.rank() != 1 || bv.shape[0] != W.shape[1]) {
        throw NumericError("dense: bias " + bv.shape_str() + " incompatible with weights " +
                           W.shape_str());
    }
    const std::size_t B = x.shape[0], I = x.shape[1], O = W.shape[1];
    Tensor y = Tensor::zeros({B, O});
    for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t i = 0; i < I; ++i) {
            const double xv = x.at(r, i);
            for (std::size_t j = 0; j < O; ++j) y.at(r, j) += xv * W.at(i, j);
        }
        for (std::size_t j = 0; j < O; ++j) y.at(r, j) += bv.data[j];
    }
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, input, w, b, out, B, I, O]() {
        const Tensor& g = nodes_[out].grad;
        const Tensor& xv = nodes_[input].value;
        const Tensor& Wv = nodes_[w].value;
        Tensor& gx = nodes_[input].grad;
        Tensor& gW = nodes_[w].grad;
        Tensor& gb = nodes_[b].grad;
        for (std::size_t r = 0; r < B; ++r) {
            for (std::size_t j = 0; j < O; ++j) {
                const double gv = g.at(r, j);
                gb.data[j] += gv;
                for (std::size_t i = 0; i < I; ++i) {
                    gx.at(r, i) += gv * Wv.at(i, j);
                    gW.at(i, j) += gv * xv.at(r, i);
                }
            }
        }
    };
    return out;
}

NodeId Tape::conv1d(NodeId input, Parameter& kernels, Parameter& bias) {
    NodeId k = leaf(kernels);
    NodeId b = leaf(bias);
    const Tensor& x = value(input);
    const Tensor& K = value(k);
    const Tensor& bv = value(b);
    if (x.rank() != 3 || K.rank() != 3) {
        throw NumericError("conv1d: expected 3-D input and kernels, got " + x.shape_str() +
                           " and " + K.shape_str());
    }
    const std::size_t B = x.shape[0], Cin = x.shape[1], L = x.shape[2];
    const std::size_t Cout = K.shape[0], S = K.shape[2];
    if (K.shape[1] != Cin) {
        throw NumericError("conv1d: kernel channels " + K.shape_str() +
                           " do not match input " + x.shape_str());
    }
    if (S % 2 == 0) {
        throw ConfigError("conv1d: even filter size " + std::to_string(S) +
                          " rejected (symmetric padding requires odd size)");
    }
    if (L < S) {
        throw NumericError("conv1d: input length " + std::to_string(L) +
                           " shorter than filter size " + std::to_string(S));
    }
    if (bv.rank() != 1 || bv.shape[0] != Cout) {
        throw NumericError("conv1d: bias " + bv.shape_str() + " incompatible with kernels " +
                           K.shape_str());
    }
    const std::size_t P = (S - 1) / 2;
    Tensor y = Tensor::zeros({B, Cout, L});
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t co = 0; co < Cout; ++co)
            for (std::size_t t = 0; t < L; ++t) {
                double acc = bv.data[co];
                for (std::size_t ci = 0; ci < Cin; ++ci)
                    for (std::size_t s = 0; s < S; ++s) {
                        const std::ptrdiff_t u =
                            static_cast<std::ptrdiff_t>(t + s) - static_cast<std::ptrdiff_t>(P);
                        if (u < 0 || u >= static_cast<std::ptrdiff_t>(L)) continue;
                        acc += x.at(bi, ci, static_cast<std::size_t>(u)) * K.at(co, ci, s);
                    }
                y.at(bi, co, t) = acc;
            }
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, input, k, b, out, B, Cin, Cout, L, S, P]() {
        const Tensor& g = nodes_[out].grad;
        const Tensor& xv = nodes_[input].value;
        const Tensor& Kv = nodes_[k].value;
        Tensor& gx = nodes_[input].grad;
        Tensor& gK = nodes_[k].grad;
        Tensor& gb = nodes_[b].grad;
        for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t co = 0; co < Cout; ++co)
                for (std::size_t t = 0; t < L; ++t) {
                    const double gv = g.at(bi, co, t);
                    gb.data[co] += gv;
                    for (std::size_t ci = 0; ci < Cin; ++ci)
                        for (std::size_t s = 0; s < S; ++s) {
                            const std::ptrdiff_t u = static_cast<std::ptrdiff_t>(t + s) -
                                                     static_cast<std::ptrdiff_t>(P);
                            if (u < 0 || u >= static_cast<std::ptrdiff_t>(L)) continue;
                            gx.at(bi, ci, static_cast<std::size_t>(u)) += gv * Kv.at(co, ci, s);
                            gK.at(co, ci, s) += gv * xv.at(bi, ci, static_cast<std::size_t>(u));
                        }
                }
    };
    return out;
}

NodeId Tape::maxpool1d(NodeId input, std::size_t pool_size) {
    const Tensor& x = value(input);
    if (x.rank() != 3) {
        throw NumericError("maxpool1d: expected 3-D input, got " + x.shape_str());
    }
    const std::size_t B = x.shape[0], C = x.shape[1], L = x.shape[2];
    if (pool_size == 0 || L % pool_size != 0) {
        throw ConfigError("maxpool1d: length " + std::to_string(L) +
                          " not divisible by pool size " + std::to_string(pool_size));
    }
    const std::size_t Lo = L / pool_size;
    Tensor y = Tensor::zeros({B, C, Lo});
    std::vector<std::size_t> argmax(B * C * Lo);
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < Lo; ++t) {
                std::size_t best = t * pool_size;
                double bestv = x.at(bi, c, best);
                for (std::size_t j = 1; j < pool_size; ++j) {
                    const double v = x.at(bi, c, t * pool_size + j);
                    if (v > bestv) {  // strict: ties keep the lowest index
                        bestv = v;
                        best = t * pool_size + j;
                    }
                }
                y.at(bi, c, t) = bestv;
                argmax[(bi * C + c) * Lo + t] = best;
            }
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, input, out, B, C, Lo, argmax = std::move(argmax)]() {
        const Tensor& g = nodes_[out].grad;
        Tensor& gx = nodes_[input].grad;
        for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < Lo; ++t)
                    gx.at(bi, c, argmax[(bi * C + c) * Lo + t]) += g.at(bi, c, t);
    };
    return out;
}

NodeId Tape::upscale1d(NodeId input, std::size_t factor) {
    const Tensor& x = value(input);
    if (x.rank() != 3) {
        throw NumericError("upscale1d: expected 3-D input, got " + x.shape_str());
    }
    if (factor == 0) throw ConfigError("upscale1d: factor must be >= 1");
    const std::size_t B = x.shape[0], C = x.shape[1], L = x.shape[2];
    Tensor y = Tensor::zeros({B, C, L * factor});
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < L; ++t) {
                const double v = x.at(bi, c, t);
                for (std::size_t j = 0; j < factor; ++j) y.at(bi, c, t * factor + j) = v;
            }
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, input, out, B, C, L, factor]() {
        const Tensor& g = nodes_[out].grad;
        Tensor& gx = nodes_[input].grad;
        for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < L; ++t) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < factor; ++j) acc += g.at(bi, c, t * factor + j);
                    gx.at(bi, c, t) += acc;
                }
    };
    return out;
}

NodeId Tape::batchnorm(NodeId input, Parameter& gamma, Parameter& beta, BatchNormState& state,
                       Mode mode) {
    NodeId gn = leaf(gamma);
    NodeId bn = leaf(beta);
    const Tensor& x = value(input);
    if (x.rank() != 2 && x.rank() != 3) {
        throw NumericError("batchnorm: expected 2-D or 3-D input, got " + x.shape_str());
    }
    const std::size_t B = x.shape[0];
    const std::size_t F = x.shape[1];  // features for 2-D, channels for 3-D
    const std::size_t L = x.rank() == 3 ? x.shape[2] : 1;
    const std::size_t N = B * L;  // normalization group size per feature
    if (gamma.value.size() != F || beta.value.size() != F || state.running_mean.size() != F) {
        throw NumericError("batchnorm: parameter/state size does not match features " +
                           std::to_string(F));
    }
    if (mode == Mode::Train && B < 2) {
        throw NumericError("batchnorm: train mode requires batch >= 2, got " +
                           std::to_string(B));
    }
    auto idx = [F, L](std::size_t bi, std::size_t f, std::size_t t) {
        return (bi * F + f) * L + t;
    };

    std::vector<double> mean(F), invstd(F);
    if (mode == Mode::Train) {
        for (std::size_t f = 0; f < F; ++f) {
            double m = 0.0;
            for (std::size_t bi = 0; bi < B; ++bi)
                for (std::size_t t = 0; t < L; ++t) m += x.data[idx(bi, f, t)];
            m /= static_cast<double>(N);
            double v = 0.0;
            for (std::size_t bi = 0; bi < B; ++bi)
                for (std::size_t t = 0; t < L; ++t) {
                    const double d = x.data[idx(bi, f, t)] - m;
                    v += d * d;
                }
            v /= static_cast<double>(N);  // biased variance
            mean[f] = m;
            invstd[f] = 1.0 / std::sqrt(v + kBatchNormEps);
            state.running_mean[f] = kBatchNormMomentum * state.running_mean[f] +
                                    (1.0 - kBatchNormMomentum) * m;
            state.running_var[f] =
                kBatchNormMomentum * state.running_var[f] + (1.0 - kBatchNormMomentum) * v;
        }
    } else {
        for (std::size_t f = 0; f < F; ++f) {
            mean[f] = state.running_mean[f];
            invstd[f] = 1.0 / std::sqrt(state.running_var[f] + kBatchNormEps);
        }
    }

    Tensor y = Tensor::zeros(x.shape);
    std::vector<double> xhat(x.size());
    const Tensor& gv = value(gn);
    const Tensor& bv = value(bn);
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < L; ++t) {
                const std::size_t i = idx(bi, f, t);
                xhat[i] = (x.data[i] - mean[f]) * invstd[f];
                y.data[i] = gv.data[f] * xhat[i] + bv.data[f];
            }

    NodeId out = push(std::move(y));
    const bool train = mode == Mode::Train;
    nodes_[out].backward = [this, input, gn, bn, out, B, F, L, N, train, idx,
                            invstd = std::move(invstd), xhat = std::move(xhat)]() {
        const Tensor& g = nodes_[out].grad;
        const Tensor& gamma_v = nodes_[gn].value;
        Tensor& gx = nodes_[input].grad;
        Tensor& ggamma = nodes_[gn].grad;
        Tensor& gbeta = nodes_[bn].grad;
        for (std::size_t f = 0; f < F; ++f) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t bi = 0; bi < B; ++bi)
                for (std::size_t t = 0; t < L; ++t) {
                    const std::size_t i = idx(bi, f, t);
                    sum_g += g.data[i];
                    sum_gx += g.data[i] * xhat[i];
                }
            ggamma.data[f] += sum_gx;
            gbeta.data[f] += sum_g;
            const double gscale = gamma_v.data[f] * invstd[f];
            if (train) {
                const double n = static_cast<double>(N);
                for (std::size_t bi = 0; bi < B; ++bi)
                    for (std::size_t t = 0; t < L; ++t) {
                        const std::size_t i = idx(bi, f, t);
                        gx.data[i] +=
                            gscale * (g.data[i] - sum_g / n - xhat[i] * sum_gx / n);
                    }
            } else {
                for (std::size_t bi = 0; bi < B; ++bi)
                    for (std::size_t t = 0; t < L; ++t) {
                        const std::size_t i = idx(bi, f, t);
                        gx.data[i] += gscale * g.data[i];
                    }
            }
        }
    };
    return out;
}

NodeId Tape::activation(NodeId input, Activation kind) {
    const Tensor& x = value(input);
    Tensor y = x;
    for (double& v : y.data) v = apply_activation(v, kind);
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, input, out, kind]() {
        const Tensor& g = nodes_[out].grad;
        const Tensor& xv = nodes_[input].value;
        const Tensor& yv = nodes_[out].value;
        Tensor& gx = nodes_[input].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double d = 1.0;
            switch (kind) {
                case Activation::Relu: d = xv.data[i] > 0.0 ? 1.0 : 0.0; break;
                case Activation::Tanh: d = 1.0 - yv.data[i] * yv.data[i]; break;
                case Activation::Identity: d = 1.0; break;
            }
            gx.data[i] += g.data[i] * d;
        }
    };
    return out;
}

NodeId Tape::reshape(NodeId input, std::vector<std::size_t> shape) {
    const Tensor& x = value(input);
    if (shape_product(shape) != x.size()) {
        throw NumericError("reshape: cannot reshape " + x.shape_str() + " to " +
                           shape_to_string(shape));
    }
    Tensor y(std::move(shape), x.data);
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, input, out]() {
        const Tensor& g = nodes_[out].grad;
        Tensor& gx = nodes_[input].grad;
        for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    };
    return out;
}

NodeId Tape::slice_cols(NodeId input, std::size_t col_begin, std::size_t col_end) {
    const Tensor& x = value(input);
    if (x.rank() != 2 || col_end > x.shape[1] || col_begin >= col_end) {
        throw NumericError("slice_cols: invalid slice [" + std::to_string(col_begin) + "," +
                           std::to_string(col_end) + ") of " + x.shape_str());
    }
    const std::size_t B = x.shape[0], W = col_end - col_begin;
    Tensor y = Tensor::zeros({B, W});
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t j = 0; j < W; ++j) y.at(r, j) = x.at(r, col_begin + j);
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, input, out, B, W, col_begin]() {
        const Tensor& g = nodes_[out].grad;
        Tensor& gx = nodes_[input].grad;
        for (std::size_t r = 0; r < B; ++r)
            for (std::size_t j = 0; j < W; ++j) gx.at(r, col_begin + j) += g.at(r, j);
    };
    return out;
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& xa = value(a);
    const Tensor& xb = value(b);
    if (!xa.same_shape(xb)) {
        throw NumericError("add: shape mismatch " + xa.shape_str() + " vs " + xb.shape_str());
    }
    Tensor y = xa;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += xb.data[i];
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, a, b, out]() {
        const Tensor& g = nodes_[out].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            nodes_[a].grad.data[i] += g.data[i];
            nodes_[b].grad.data[i] += g.data[i];
        }
    };
    return out;
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Tensor& xa = value(a);
    const Tensor& xb = value(b);
    if (!xa.same_shape(xb)) {
        throw NumericError("sub: shape mismatch " + xa.shape_str() + " vs " + xb.shape_str());
    }
    Tensor y = xa;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] -= xb.data[i];
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, a, b, out]() {
        const Tensor& g = nodes_[out].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            nodes_[a].grad.data[i] += g.data[i];
            nodes_[b].grad.data[i] -= g.data[i];
        }
    };
    return out;
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& xa = value(a);
    const Tensor& xb = value(b);
    if (!xa.same_shape(xb)) {
        throw NumericError("mul: shape mismatch " + xa.shape_str() + " vs " + xb.shape_str());
    }
    Tensor y = xa;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= xb.data[i];
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, a, b, out]() {
        const Tensor& g = nodes_[out].grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            nodes_[a].grad.data[i] += g.data[i] * nodes_[b].value.data[i];
            nodes_[b].grad.data[i] += g.data[i] * nodes_[a].value.data[i];
        }
    };
    return out;
}

NodeId Tape::scale(NodeId a, double factor) {
    Tensor y = value(a);
    for (double& v : y.data) v *= factor;
    NodeId out = push(std::move(y));
    nodes_[out].backward = [this, a, out, factor]() {
        const Tensor& g = nodes_[out].grad;
        for (std::size_t i = 0; i < g.size(); ++i) nodes_[a].grad.data[i] += g.data[i] * factor;
    };
    return out;
}

NodeId Tape::sum_all(NodeId a) {
    const Tensor& x = value(a);
    double s = 0.0;
    for (double v : x.data) s += v;
    NodeId out = push(Tensor::scalar(s));
    nodes_[out].backward = [this, a, out]() {
        const double g = nodes_[out].grad.data[0];
        for (double& gv : nodes_[a].grad.data) gv += g;
    };
    return out;
}

NodeId Tape::mean_rows(NodeId row_values) {
    const Tensor& x = value(row_values);
    if (x.rank() != 1) {
        throw NumericError("mean_rows: expected 1-D per-row values, got " + x.shape_str());
    }
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x.data) s += v;
    NodeId out = push(Tensor::scalar(s / n));
    nodes_[out].backward = [this, row_values, out, n]() {
        const double g = nodes_[out].grad.data[0] / n;
        for (double& gv : nodes_[row_values].grad.data) gv += g;
    };
    return out;
}

NodeId Tape::reparameterize(NodeId mu, NodeId logvar, const Tensor& noise) {
    const Tensor& m = value(mu);
    const Tensor& lv = value(logvar);
    if (!m.same_shape(lv) || !m.same_shape(noise)) {
        throw NumericError("reparameterize: shape mismatch mu " + m.shape_str() + " logvar " +
                           lv.shape_str() + " noise " + noise.shape_str());
    }
    Tensor z = m;
    for (std::size_t i = 0; i < z.size(); ++i)
        z.data[i] += std::exp(0.5 * lv.data[i]) * noise.data[i];
    NodeId out = push(std::move(z));
    nodes_[out].backward = [this, mu, logvar, out, noise]() {
        const Tensor& g = nodes_[out].grad;
        const Tensor& lv = nodes_[logvar].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
            nodes_[mu].grad.data[i] += g.data[i];
            nodes_[logvar].grad.data[i] +=
                g.data[i] * 0.5 * std::exp(0.5 * lv.data[i]) * noise.data[i];
        }
    };
    return out;
}

NodeId Tape::kl_diag_gaussian(NodeId mu, NodeId logvar) {
    const Tensor& m = value(mu);
    const Tensor& lv = value(logvar);
    if (!m.same_shape(lv) || m.rank() != 2) {
        throw NumericError("kl_diag_gaussian: expected matching [batch, d] tensors, got " +
                           m.shape_str() + " and " + lv.shape_str());
    }
    if (!m.all_finite() || !lv.all_finite()) {
        throw NumericError("kl_diag_gaussian: non-finite latent statistics");
    }
    const std::size_t B = m.shape[0], D = m.shape[1];
    Tensor kl = Tensor::zeros({B});
    for (std::size_t r = 0; r < B; ++r) {
        double acc = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            const double mv = m.at(r, d), lvv = lv.at(r, d);
            acc += mv * mv + std::exp(lvv) - 1.0 - lvv;
        }
        kl.data[r] = 0.5 * acc;
    }
    NodeId out = push(std::move(kl));
    nodes_[out].backward = [this, mu, logvar, out, B, D]() {
        const Tensor& g = nodes_[out].grad;
        const Tensor& mv = nodes_[mu].value;
        const Tensor& lvv = nodes_[logvar].value;
        for (std::size_t r = 0; r < B; ++r) {
            const double gr = g.data[r];
            for (std::size_t d = 0; d < D; ++d) {
                nodes_[mu].grad.at(r, d) += gr * mv.at(r, d);
                nodes_[logvar].grad.at(r, d) += gr * 0.5 * (std::exp(lvv.at(r, d)) - 1.0);
            }
        }
    };
    return out;
}

NodeId Tape::gaussian_log_density_channels(const Tensor& x, NodeId mean, NodeId channel_logvar) {
    const Tensor& m = value(mean);
    const Tensor& lv = value(channel_logvar);
    if (m.rank() != 3 || !m.same_shape(x)) {
        throw NumericError("gaussian_log_density: x " + x.shape_str() + " vs mean " +
                           m.shape_str());
    }
    if (lv.rank() != 1 || lv.shape[0] != m.shape[1]) {
        throw NumericError("gaussian_log_density: channel logvar " + lv.shape_str() +
                           " does not match mean " + m.shape_str());
    }
    const std::size_t B = m.shape[0], C = m.shape[1], L = m.shape[2];
    Tensor out_v = Tensor::zeros({B});
    for (std::size_t bi = 0; bi < B; ++bi) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double lvc = lv.data[c];
            const double inv_var = std::exp(-lvc);
            for (std::size_t t = 0; t < L; ++t) {
                const double d = x.at(bi, c, t) - m.at(bi, c, t);
                acc += -0.5 * (kLog2Pi + lvc + d * d * inv_var);
            }
        }
        out_v.data[bi] = acc;
    }
    NodeId out = push(std::move(out_v));
    nodes_[out].backward = [this, mean, channel_logvar, out, x, B, C, L]() {
        const Tensor& g = nodes_[out].grad;
        const Tensor& mv = nodes_[mean].value;
        const Tensor& lvv = nodes_[channel_logvar].value;
        Tensor& gm = nodes_[mean].grad;
        Tensor& glv = nodes_[channel_logvar].grad;
        for (std::size_t bi = 0; bi < B; ++bi) {
            const double gb = g.data[bi];
            for (std::size_t c = 0; c < C; ++c) {
                const double inv_var = std::exp(-lvv.data[c]);
                for (std::size_t t = 0; t < L; ++t) {
                    const double d = x.at(bi, c, t) - mv.at(bi, c, t);
                    gm.at(bi, c, t) += gb * d * inv_var;
                    glv.data[c] += gb * (-0.5) * (1.0 - d * d * inv_var);
                }
            }
        }
    };
    return out;
}

}  // namespace scadaguard
