#include "slafc/neuralnet.hpp"

#include <algorithm>
#include <cmath>

#include "slafc/rng.hpp"
#include "slafc/slaloss.hpp"

namespace slafc {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out(B x H) += a(B x C) * w(C x H); all row-major.
void addmm(std::vector<double>& out, const double* a, std::size_t batch, std::size_t c_dim,
           const std::vector<double>& w, std::size_t h_dim, std::size_t a_stride) {
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = a + b * a_stride;
        double* out_row = out.data() + b * h_dim;
        for (std::size_t c = 0; c < c_dim; ++c) {
            const double v = row[c];
            if (v == 0.0) continue;
            const double* w_row = w.data() + c * h_dim;
            for (std::size_t h = 0; h < h_dim; ++h) out_row[h] += v * w_row[h];
        }
    }
}

} // namespace

void NetConfig::validate() const {
    if (group_channels.empty()) fail(Errc::ConfigError, "at least one input group required");
    for (int c : group_channels) {
        if (c < 1) fail(Errc::ConfigError, "input channels must be >= 1");
    }
    if (hidden < 1) fail(Errc::ConfigError, "hidden units must be >= 1");
    if (window < 1) fail(Errc::ConfigError, "window must be >= 1");
}

std::size_t ModelParams::parameter_count() const {
    std::size_t count = 0;
    visit_params(*this, [&](double) { ++count; });
    return count;
}

ModelParams init_params(const NetConfig& config) {
    config.validate();
    const int H = config.hidden;

    ModelParams params;
    params.lstm.resize(config.groups());
    for (int g = 0; g < config.groups(); ++g) {
        const int C = config.group_channels[g];
        auto& layer = params.lstm[g];
        const double wx_bound = std::sqrt(6.0 / (C + H));
        const double wh_bound = std::sqrt(6.0 / (H + H));
        for (int gate = 0; gate < kGateCount; ++gate) {
            Rng rng(mix_key(mix_key(stream_key(config.seed, "init-lstm"),
                                    static_cast<std::uint64_t>(g)),
                            static_cast<std::uint64_t>(gate)));
            layer.wx[gate].resize(static_cast<std::size_t>(C) * H);
            for (auto& w : layer.wx[gate]) w = rng.uniform(-wx_bound, wx_bound);
            layer.wh[gate].resize(static_cast<std::size_t>(H) * H);
            for (auto& w : layer.wh[gate]) w = rng.uniform(-wh_bound, wh_bound);
            layer.b[gate].assign(H, gate == kGateForget ? 1.0 : 0.0);
        }
    }

    const int width = config.concat_width();
    const double head_bound = std::sqrt(6.0 / (width + 1));
    params.head.resize(config.heads());
    for (int k = 0; k < config.heads(); ++k) {
        Rng rng(mix_key(stream_key(config.seed, "init-head"), static_cast<std::uint64_t>(k)));
        auto& head = params.head[k];
        head.w.resize(width);
        for (auto& w : head.w) w = rng.uniform(-head_bound, head_bound);
        head.b = 0.0;
    }
    return params;
}

std::vector<double> forward(const NetConfig& config, const ModelParams& params,
                            const std::vector<Tensor3>& group_inputs, ForwardCache* cache) {
    if (static_cast<int>(group_inputs.size()) != config.groups()) {
        fail(Errc::ShapeMismatch, "expected " + std::to_string(config.groups()) +
                                      " input groups, got " +
                                      std::to_string(group_inputs.size()));
    }
    if (static_cast<int>(params.lstm.size()) != config.groups() ||
        static_cast<int>(params.head.size()) != config.heads()) {
        fail(Errc::ShapeMismatch, "parameter shape does not match the configuration");
    }
    const std::size_t batch = group_inputs.front().n;
    const std::size_t H = static_cast<std::size_t>(config.hidden);
    const std::size_t u = static_cast<std::size_t>(config.window);

    for (int g = 0; g < config.groups(); ++g) {
        const auto& inputs = group_inputs[g];
        if (inputs.n != batch || inputs.rows != u ||
            inputs.cols != static_cast<std::size_t>(config.group_channels[g])) {
            fail(Errc::ShapeMismatch, "input tensor for group " + std::to_string(g) +
                                          " does not match the configuration");
        }
    }

    const bool keep = cache != nullptr;
    const std::size_t width = H * config.groups();
    std::vector<double> concat_local;
    std::vector<double>* concat = &concat_local;
    if (keep) {
        cache->groups.assign(config.groups(), {});
        cache->batch = batch;
        concat = &cache->concat;
    }
    concat->assign(batch * width, 0.0);

    std::array<std::vector<double>, kGateCount> pre;
    std::vector<double> h_prev, c_prev, h_cur, c_cur;
    for (int g = 0; g < config.groups(); ++g) {
        const auto& inputs = group_inputs[g];
        const auto& layer = params.lstm[g];
        const std::size_t C = inputs.cols;
        ForwardCache::GroupCache* gc = keep ? &cache->groups[g] : nullptr;
        if (keep) {
            gc->inputs = inputs;
            for (int gate = 0; gate < kGateCount; ++gate) gc->gate[gate].resize(u);
            gc->cell.resize(u);
            gc->hidden.resize(u);
        }

        h_prev.assign(batch * H, 0.0);
        c_prev.assign(batch * H, 0.0);

        for (std::size_t t = 0; t < u; ++t) {
            for (int gate = 0; gate < kGateCount; ++gate) {
                pre[gate].assign(batch * H, 0.0);
                for (std::size_t b = 0; b < batch; ++b) {
                    double* row = pre[gate].data() + b * H;
                    const double* bias = layer.b[gate].data();
                    for (std::size_t h = 0; h < H; ++h) row[h] = bias[h];
                }
                addmm(pre[gate], inputs.v.data() + t * C, batch, C, layer.wx[gate], H,
                      u * C);
                addmm(pre[gate], h_prev.data(), batch, H, layer.wh[gate], H, H);
            }

            h_cur.resize(batch * H);
            c_cur.resize(batch * H);
            for (std::size_t j = 0; j < batch * H; ++j) {
                const double i_v = sigmoid(pre[kGateInput][j]);
                const double f_v = sigmoid(pre[kGateForget][j]);
                const double g_v = std::tanh(pre[kGateCell][j]);
                const double o_v = sigmoid(pre[kGateOutput][j]);
                const double c_v = f_v * c_prev[j] + i_v * g_v;
                c_cur[j] = c_v;
                h_cur[j] = o_v * std::tanh(c_v);
                pre[kGateInput][j] = i_v;
                pre[kGateForget][j] = f_v;
                pre[kGateCell][j] = g_v;
                pre[kGateOutput][j] = o_v;
            }
            if (keep) {
                for (int gate = 0; gate < kGateCount; ++gate) gc->gate[gate][t] = pre[gate];
                gc->cell[t] = c_cur;
                gc->hidden[t] = h_cur;
            }
            h_prev.swap(h_cur);
            c_prev.swap(c_cur);
        }

        // Final hidden state into this group's concatenation block.
        for (std::size_t b = 0; b < batch; ++b) {
            std::copy_n(h_prev.data() + b * H, H, concat->data() + b * width + g * H);
        }
    }

    std::vector<double> preds(batch * config.heads(), 0.0);
    for (int k = 0; k < config.heads(); ++k) {
        const auto& head = params.head[k];
        for (std::size_t b = 0; b < batch; ++b) {
            double acc = head.b;
            const double* row = concat->data() + b * width;
            for (std::size_t j = 0; j < width; ++j) acc += row[j] * head.w[j];
            preds[b * config.heads() + k] = acc;
        }
    }
    return preds;
}

ModelParams backward(const NetConfig& config, const ModelParams& params,
                     const ForwardCache& cache, const std::vector<double>& dloss_dpred) {
    const std::size_t batch = cache.batch;
    const std::size_t H = static_cast<std::size_t>(config.hidden);
    const std::size_t u = static_cast<std::size_t>(config.window);
    const std::size_t K = static_cast<std::size_t>(config.heads());
    const std::size_t width = H * config.groups();

    if (dloss_dpred.size() != batch * K) {
        fail(Errc::ShapeMismatch, "dloss_dpred must be batch x heads");
    }
    if (cache.groups.size() != static_cast<std::size_t>(config.groups())) {
        fail(Errc::ShapeMismatch, "cache does not match the configuration");
    }

    ModelParams grads;
    grads.lstm.resize(config.groups());
    grads.head.resize(K);

    // Heads: affine in the concatenated final hidden state.
    std::vector<double> dconcat(batch * width, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        auto& hg = grads.head[k];
        hg.w.assign(width, 0.0);
        hg.b = 0.0;
        const auto& head = params.head[k];
        for (std::size_t b = 0; b < batch; ++b) {
            const double d = dloss_dpred[b * K + k];
            if (d == 0.0) continue;
            hg.b += d;
            const double* concat_row = cache.concat.data() + b * width;
            double* dconcat_row = dconcat.data() + b * width;
            for (std::size_t j = 0; j < width; ++j) {
                hg.w[j] += d * concat_row[j];
                dconcat_row[j] += d * head.w[j];
            }
        }
    }

    // BPTT per group.
    for (int g = 0; g < config.groups(); ++g) {
        const auto& gc = cache.groups[g];
        const auto& layer = params.lstm[g];
        const Tensor3& inputs = gc.inputs;
        const std::size_t C = inputs.cols;

        auto& lg = grads.lstm[g];
        for (int gate = 0; gate < kGateCount; ++gate) {
            lg.wx[gate].assign(C * H, 0.0);
            lg.wh[gate].assign(H * H, 0.0);
            lg.b[gate].assign(H, 0.0);
        }

        std::vector<double> dh(batch * H, 0.0);
        std::vector<double> dc(batch * H, 0.0);
        std::array<std::vector<double>, kGateCount> dz;
        for (auto& v : dz) v.resize(batch * H);

        // Seed dh with this group's slice of the concatenation gradient.
        for (std::size_t b = 0; b < batch; ++b) {
            std::copy_n(dconcat.data() + b * width + g * H, H, dh.data() + b * H);
        }

        for (std::size_t t = u; t-- > 0;) {
            const auto& i_t = gc.gate[kGateInput][t];
            const auto& f_t = gc.gate[kGateForget][t];
            const auto& g_t = gc.gate[kGateCell][t];
            const auto& o_t = gc.gate[kGateOutput][t];
            const auto& c_t = gc.cell[t];
            const std::vector<double>* c_prev = t > 0 ? &gc.cell[t - 1] : nullptr;
            const std::vector<double>* h_prev = t > 0 ? &gc.hidden[t - 1] : nullptr;

            for (std::size_t j = 0; j < batch * H; ++j) {
                const double tanh_c = std::tanh(c_t[j]);
                const double d_o = dh[j] * tanh_c;
                dz[kGateOutput][j] = d_o * o_t[j] * (1.0 - o_t[j]);
                dc[j] += dh[j] * o_t[j] * (1.0 - tanh_c * tanh_c);
                const double d_i = dc[j] * g_t[j];
                dz[kGateInput][j] = d_i * i_t[j] * (1.0 - i_t[j]);
                const double d_g = dc[j] * i_t[j];
                dz[kGateCell][j] = d_g * (1.0 - g_t[j] * g_t[j]);
                const double cp = c_prev != nullptr ? (*c_prev)[j] : 0.0;
                const double d_f = dc[j] * cp;
                dz[kGateForget][j] = d_f * f_t[j] * (1.0 - f_t[j]);
                dc[j] *= f_t[j]; // becomes dc_{t-1}
            }

            for (int gate = 0; gate < kGateCount; ++gate) {
                const auto& z = dz[gate];
                for (std::size_t b = 0; b < batch; ++b) {
                    const double* z_row = z.data() + b * H;
                    const double* x_row = inputs.v.data() + (b * u + t) * C;
                    for (std::size_t h = 0; h < H; ++h) lg.b[gate][h] += z_row[h];
                    for (std::size_t c = 0; c < C; ++c) {
                        const double x = x_row[c];
                        if (x == 0.0) continue;
                        double* wrow = lg.wx[gate].data() + c * H;
                        for (std::size_t h = 0; h < H; ++h) wrow[h] += x * z_row[h];
                    }
                    if (h_prev != nullptr) {
                        const double* hp_row = h_prev->data() + b * H;
                        for (std::size_t j = 0; j < H; ++j) {
                            const double hp = hp_row[j];
                            if (hp == 0.0) continue;
                            double* wrow = lg.wh[gate].data() + j * H;
                            for (std::size_t h = 0; h < H; ++h) wrow[h] += hp * z_row[h];
                        }
                    }
                }
            }

            // dh_{t-1} via the recurrent weights.
            std::fill(dh.begin(), dh.end(), 0.0);
            if (t > 0) {
                for (int gate = 0; gate < kGateCount; ++gate) {
                    const auto& z = dz[gate];
                    const auto& wh = layer.wh[gate];
                    for (std::size_t b = 0; b < batch; ++b) {
                        const double* z_row = z.data() + b * H;
                        double* dh_row = dh.data() + b * H;
                        for (std::size_t j = 0; j < H; ++j) {
                            const double* w_row = wh.data() + j * H;
                            double acc = 0.0;
                            for (std::size_t h = 0; h < H; ++h) acc += z_row[h] * w_row[h];
                            dh_row[j] += acc;
                        }
                    }
                }
            }
        }
    }
    return grads;
}

void optimizer_step(const NetConfig& config, ModelParams& params, const ModelParams& grads,
                    OptState& state, double lr) {
    (void)config;
    std::vector<double> flat;
    flat.reserve(params.parameter_count());
    visit_params(grads, [&](double g) { flat.push_back(g); });
    for (double g : flat) {
        if (!std::isfinite(g)) fail(Errc::NonFiniteGradient, "gradient entry is not finite");
    }
    if (state.m.empty()) {
        state.m.assign(flat.size(), 0.0);
        state.v.assign(flat.size(), 0.0);
    }
    if (state.m.size() != flat.size()) {
        fail(Errc::ShapeMismatch, "optimizer state does not match the parameter count");
    }

    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    state.step += 1;
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));

    std::size_t idx = 0;
    visit_params(params, [&](double& p) {
        const double g = flat[idx];
        state.m[idx] = kBeta1 * state.m[idx] + (1.0 - kBeta1) * g;
        state.v[idx] = kBeta2 * state.v[idx] + (1.0 - kBeta2) * g * g;
        const double m_hat = state.m[idx] / bias1;
        const double v_hat = state.v[idx] / bias2;
        p -= lr * m_hat / (std::sqrt(v_hat) + kEps);
        ++idx;
    });
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

namespace {

struct GradCheckProblem {
    std::vector<Tensor3> inputs;
    std::vector<double> targets; // B x K
};

GradCheckProblem make_problem(const NetConfig& config, int sample_count) {
    GradCheckProblem problem;
    Rng rx(stream_key(config.seed, "gradcheck-x"));
    Rng ry(stream_key(config.seed, "gradcheck-y"));
    problem.inputs.resize(config.groups());
    for (int g = 0; g < config.groups(); ++g) {
        auto& tensor = problem.inputs[g];
        tensor.resize(sample_count, config.window, config.group_channels[g]);
        for (auto& v : tensor.v) v = rx.normal();
    }
    problem.targets.resize(static_cast<std::size_t>(sample_count) * config.heads());
    for (auto& v : problem.targets) v = ry.normal();
    return problem;
}

double masked_loss(const NetConfig& config, const ModelParams& params,
                   const GradCheckProblem& problem, const std::vector<char>& mask,
                   std::size_t retained, double weight) {
    const auto preds = forward(config, params, problem.inputs, nullptr);
    const LossSpec spec{LossKind::WMae, weight, 1.0};
    double total = 0.0;
    for (std::size_t j = 0; j < preds.size(); ++j) {
        if (!mask[j]) continue;
        total += loss_value(spec, preds[j] - problem.targets[j]);
    }
    return total / static_cast<double>(retained);
}

} // namespace

double grad_check(const NetConfig& config, double loss_weight, int sample_count) {
    constexpr double kEpsilon = 1e-5;
    constexpr double kKinkMargin = 1e-6;

    ModelParams params = init_params(config);
    const GradCheckProblem problem = make_problem(config, sample_count);

    ForwardCache cache;
    const auto preds = forward(config, params, problem.inputs, &cache);

    // Freeze the retained-sample mask at the base point so both sides of the
    // comparison integrate the same (differentiable) piece of the loss.
    std::vector<char> mask(preds.size(), 0);
    std::size_t retained = 0;
    for (std::size_t j = 0; j < preds.size(); ++j) {
        if (std::abs(preds[j] - problem.targets[j]) > kKinkMargin) {
            mask[j] = 1;
            ++retained;
        }
    }
    if (retained == 0) return 0.0;

    const LossSpec spec{LossKind::WMae, loss_weight, 1.0};
    std::vector<double> dpred(preds.size(), 0.0);
    for (std::size_t j = 0; j < preds.size(); ++j) {
        if (!mask[j]) continue;
        dpred[j] = loss_grad(spec, preds[j] - problem.targets[j]) / static_cast<double>(retained);
    }
    const ModelParams analytic = backward(config, params, cache, dpred);

    std::vector<double> analytic_flat;
    analytic_flat.reserve(params.parameter_count());
    visit_params(analytic, [&](double g) { analytic_flat.push_back(g); });

    double max_rel = 0.0;
    std::size_t idx = 0;
    visit_params(params, [&](double& p) {
        const double saved = p;
        p = saved + kEpsilon;
        const double up = masked_loss(config, params, problem, mask, retained, loss_weight);
        p = saved - kEpsilon;
        const double down = masked_loss(config, params, problem, mask, retained, loss_weight);
        p = saved;
        const double numeric = (up - down) / (2.0 * kEpsilon);
        const double ga = analytic_flat[idx];
        const double scale = std::max({std::abs(ga), std::abs(numeric), 1e-3});
        max_rel = std::max(max_rel, std::abs(ga - numeric) / scale);
        ++idx;
    });
    return max_rel;
}

} // namespace slafc
