#ifndef SLAFC_NEURALNET_HPP
#define SLAFC_NEURALNET_HPP

#include <cstdint>
#include <vector>

#include "slafc/features.hpp"

namespace slafc {

// Gate order used everywhere: input, forget, cell candidate, output.
inline constexpr int kGateCount = 4;
inline constexpr int kGateInput = 0;
inline constexpr int kGateForget = 1;
inline constexpr int kGateCell = 2;
inline constexpr int kGateOutput = 3;

// Network shape. One LSTM per input group; every dense head reads the
// concatenation of all groups' final hidden states. Single-cell models are
// the one-group, one-head case. Channel counts may differ per group because
// feature selection is per cell/slice.
struct NetConfig {
    std::vector<int> group_channels; // C per group
    int hidden = 32;                 // H
    int window = 24;                 // u
    std::uint64_t seed = 0;

    int groups() const { return static_cast<int>(group_channels.size()); }
    int heads() const { return groups(); }
    int concat_width() const { return groups() * hidden; }

    void validate() const; // throws Error(ConfigError)
};

struct LstmParams {
    // Row-major weights: wx[g] is C x H, wh[g] is H x H, b[g] is H.
    std::array<std::vector<double>, kGateCount> wx;
    std::array<std::vector<double>, kGateCount> wh;
    std::array<std::vector<double>, kGateCount> b;
};

struct HeadParams {
    std::vector<double> w; // concat_width
    double b = 0.0;
};

struct ModelParams {
    std::vector<LstmParams> lstm; // one per group
    std::vector<HeadParams> head; // one per head

    std::size_t parameter_count() const;
};

// Activations recorded by forward() so backward() can reproduce exact
// gradients. Per group, per timestep, batch-major H-vectors.
struct ForwardCache {
    struct GroupCache {
        // [t][b*H + h]; gates are post-activation.
        std::vector<std::vector<double>> gate[kGateCount];
        std::vector<std::vector<double>> cell;    // c_t
        std::vector<std::vector<double>> hidden;  // h_t
        Tensor3 inputs;                           // owned copy of the batch
    };
    std::vector<GroupCache> groups;
    std::vector<double> concat; // B x (G*H) final hidden concatenation
    std::size_t batch = 0;
};

// Adam accumulators, flat in parameter-visit order.
struct OptState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
};

// ---------------------------------------------------------------------------

// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases except the
// forget gate bias which starts at 1. Deterministic per seed.
ModelParams init_params(const NetConfig& config);

// LSTM recurrence over `window` steps from zero initial state, then affine
// heads on the concatenated final hidden states. One tensor per group, each
// B x window x C_g. Returns B x K predictions (sample-major).
std::vector<double> forward(const NetConfig& config, const ModelParams& params,
                            const std::vector<Tensor3>& group_inputs, ForwardCache* cache);

// Exact reverse-mode gradients of the predictions contracted with
// dloss_dpred (B x K, sample-major).
ModelParams backward(const NetConfig& config, const ModelParams& params,
                     const ForwardCache& cache, const std::vector<double>& dloss_dpred);

// Adam update, decay 0.9/0.999, epsilon 1e-8. Throws Error(NonFiniteGradient)
// when any gradient entry is not finite.
void optimizer_step(const NetConfig& config, ModelParams& params, const ModelParams& grads,
                    OptState& state, double lr);

// Visits every parameter in a fixed order (the flat order used by OptState).
// F is invoked as f(double&) / f(double) depending on constness.
template <typename Params, typename F>
void visit_params(Params&& params, F&& f) {
    for (auto&& layer : params.lstm) {
        for (int g = 0; g < kGateCount; ++g) {
            for (auto&& x : layer.wx[g]) f(x);
            for (auto&& x : layer.wh[g]) f(x);
            for (auto&& x : layer.b[g]) f(x);
        }
    }
    for (auto&& head : params.head) {
        for (auto&& x : head.w) f(x);
        f(head.b);
    }
}

// Compares analytic gradients of a mean weighted-MAE loss on a random batch
// against central differences (epsilon 1e-5), returning the max relative
// error. Samples whose error sits within 1e-6 of the loss kink are excluded
// from both sides of the comparison.
double grad_check(const NetConfig& config, double loss_weight, int sample_count);

} // namespace slafc

#endif // SLAFC_NEURALNET_HPP
