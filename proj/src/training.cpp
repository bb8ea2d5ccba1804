#include "sclmetric/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "sclmetric/errors.hpp"
#include "sclmetric/mining.hpp"
#include "sclmetric/rng.hpp"

namespace sclmetric {

const char* loss_name(LossKind k) noexcept {
    switch (k) {
        case LossKind::Scl: return "scl";
        case LossKind::Cl: return "cl";
        case LossKind::Tl: return "tl";
    }
    return "?";
}

LossKind parse_loss(const std::string& s) {
    if (s == "scl") return LossKind::Scl;
    if (s == "cl") return LossKind::Cl;
    if (s == "tl") return LossKind::Tl;
    throw ConfigError("unknown loss '" + s + "' (expected scl, cl or tl)");
}

AdamState AdamState::for_model(const ModelParams& params) {
    AdamState s;
    s.m = ParamGrads::zeros_like(params);
    s.v = ParamGrads::zeros_like(params);
    return s;
}

namespace {

void check_shapes(const ModelParams& params, const ParamGrads& grads) {
    if (grads.layers.size() != params.layers.size())
        throw DimensionError("gradient layer count does not match the model");
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        if (grads.layers[l].weights.size() != params.layers[l].weights.size() ||
            grads.layers[l].bias.size() != params.layers[l].bias.size())
            throw DimensionError("gradient shape mismatch in layer " + std::to_string(l));
}

struct AdamCoefficients {
    double beta1, beta2, epsilon, lr, correction1, correction2;

    void apply(double& theta, double& m, double& v, double g) const {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        theta -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
    }
};

}  // namespace

void adam_step(ModelParams& params, const ParamGrads& grads, AdamState& state, double lr,
               const FreezeMask& freeze) {
    check_shapes(params, grads);
    check_shapes(params, state.m);
    check_shapes(params, state.v);
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const AdamCoefficients k{state.beta1,
                             state.beta2,
                             state.epsilon,
                             lr,
                             1.0 - std::pow(state.beta1, t),
                             1.0 - std::pow(state.beta2, t)};
    for (std::size_t l = freeze.frozen_layer_count; l < params.layers.size(); ++l) {
        Layer& L = params.layers[l];
        const LayerGrad& g = grads.layers[l];
        LayerGrad& m = state.m.layers[l];
        LayerGrad& v = state.v.layers[l];
        for (std::size_t i = 0; i < L.weights.size(); ++i)
            k.apply(L.weights[i], m.weights[i], v.weights[i], g.weights[i]);
        for (std::size_t i = 0; i < L.bias.size(); ++i)
            k.apply(L.bias[i], m.bias[i], v.bias[i], g.bias[i]);
    }
}

void sgd_step(ModelParams& params, const ParamGrads& grads, double lr, const FreezeMask& freeze) {
    check_shapes(params, grads);
    for (std::size_t l = freeze.frozen_layer_count; l < params.layers.size(); ++l) {
        Layer& L = params.layers[l];
        const LayerGrad& g = grads.layers[l];
        for (std::size_t i = 0; i < L.weights.size(); ++i) L.weights[i] -= lr * g.weights[i];
        for (std::size_t i = 0; i < L.bias.size(); ++i) L.bias[i] -= lr * g.bias[i];
    }
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("train.learning_rate must be finite and >= 0");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
    if (per_subject < 1) throw ConfigError("train.per_subject must be >= 1");
    if (embedding_dim == 0) throw ConfigError("train.embedding_dim must be >= 1");
    for (auto h : hidden)
        if (h == 0) throw ConfigError("train.hidden sizes must be >= 1");
    if (freeze_layers > hidden.size() + 1)
        throw ConfigError("train.freeze_layers exceeds the number of layers");
    scl.validate();
    if (!(cl_margin > 0.0)) throw ConfigError("train.cl_margin must be > 0");
    if (!(tl_margin > 0.0)) throw ConfigError("train.tl_margin must be > 0");
}

TrainConfig TrainConfig::finetune_regime() { return TrainConfig{}; }

TrainConfig TrainConfig::synthetic_regime() {
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 300;
    cfg.freeze_layers = 0;
    return cfg;
}

std::vector<std::size_t> model_dims(std::size_t input_dim, const TrainConfig& cfg) {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(cfg.embedding_dim);
    return dims;
}

std::string TrainLog::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,sum_loss,mean_genuine,mean_imposter,seconds\n";
    for (const auto& e : epochs)
        out << e.epoch << ',' << e.sum_loss << ',' << e.mean_genuine << ',' << e.mean_imposter
            << ',' << e.seconds << '\n';
    return out.str();
}

namespace {

constexpr std::uint64_t kStreamInit = 0x1d1f;
constexpr std::uint64_t kStreamGenuine = 1;
constexpr std::uint64_t kStreamImposter = 2;
constexpr std::uint64_t kStreamBatches = 3;

/// Running sums for one epoch.
struct EpochTally {
    double sum = 0.0;
    double genuine = 0.0;
    double imposter = 0.0;
    std::size_t n_genuine = 0;
    std::size_t n_imposter = 0;
};

void require_finite(double v, int epoch) {
    if (!std::isfinite(v))
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) +
                           "; lower the learning rate or check the input data");
}

/// Forward every slot, evaluate the loss on the embeddings and push the slot
/// gradients back through the network.
class StepContext {
public:
    StepContext(const ModelParams& m, const FreezeMask& freeze)
        : m_(m), freeze_(freeze), grads_(ParamGrads::zeros_like(m)) {}

    double scl(const SampleSet& s, const SclConfig& cfg) {
        const ForwardTrace ta = forward(m_, s.a->embedding);
        const ForwardTrace tb = forward(m_, s.b->embedding);
        ForwardTrace tc;
        if (s.has_c()) tc = forward(m_, s.c->embedding);
        const LossValue lv = scl_set_loss(s.label, ta.output, tb.output,
                                          s.has_c() ? Vec(tc.output) : Vec{}, cfg);
        backward(m_, ta, lv.grad_a, freeze_, grads_);
        backward(m_, tb, lv.grad_b, freeze_, grads_);
        if (s.has_c()) backward(m_, tc, lv.grad_c, freeze_, grads_);
        return lv.value;
    }

    double cl(const ContrastivePair& p, double margin) {
        const ForwardTrace t1 = forward(m_, p.first->embedding);
        const ForwardTrace t2 = forward(m_, p.second->embedding);
        const LossValue lv = contrastive_loss(t1.output, t2.output, p.label, margin);
        backward(m_, t1, lv.grad_a, freeze_, grads_);
        backward(m_, t2, lv.grad_b, freeze_, grads_);
        return lv.value;
    }

    double tl(const Triplet& t, double margin) {
        const ForwardTrace ta = forward(m_, t.anchor->embedding);
        const ForwardTrace tp = forward(m_, t.positive->embedding);
        const ForwardTrace tn = forward(m_, t.negative->embedding);
        const LossValue lv = triplet_loss(ta.output, tp.output, tn.output, margin);
        backward(m_, ta, lv.grad_a, freeze_, grads_);
        backward(m_, tp, lv.grad_b, freeze_, grads_);
        backward(m_, tn, lv.grad_c, freeze_, grads_);
        return lv.value;
    }

    ParamGrads& grads() { return grads_; }

private:
    const ModelParams& m_;
    const FreezeMask& freeze_;
    ParamGrads grads_;
};

template <class T, class LossFn>
void run_batches(const std::vector<BatchOf<T>>& batches, ModelParams& params, AdamState& adam,
                 const TrainConfig& cfg, const FreezeMask& freeze, EpochTally& tally, int epoch,
                 LossFn&& loss_of) {
    for (const auto& batch : batches) {
        StepContext ctx(params, freeze);
        for (const auto& item : batch.genuine) {
            const double v = loss_of(ctx, item);
            require_finite(v, epoch);
            tally.sum += v;
            tally.genuine += v;
            ++tally.n_genuine;
        }
        for (const auto& item : batch.imposter) {
            const double v = loss_of(ctx, item);
            require_finite(v, epoch);
            tally.sum += v;
            tally.imposter += v;
            ++tally.n_imposter;
        }
        if (cfg.reduction == Reduction::Mean && batch.size() > 0)
            ctx.grads().scale(1.0 / static_cast<double>(batch.size()));
        if (cfg.optimizer == OptimizerKind::Adam)
            adam_step(params, ctx.grads(), adam, cfg.learning_rate, freeze);
        else
            sgd_step(params, ctx.grads(), cfg.learning_rate, freeze);
    }
}

double mean_or_zero(double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; }

}  // namespace

ModelParams initial_model(const std::vector<std::size_t>& dims, std::uint64_t train_seed) {
    return init_model(dims, derive_seed(train_seed, kStreamInit));
}

TrainResult train(const Dataset& ds_train, const TrainConfig& cfg) {
    cfg.validate();
    return train_from(ds_train, initial_model(model_dims(ds_train.dimension(), cfg), cfg.seed), cfg);
}

TrainResult train_from(const Dataset& ds_train, ModelParams init, const TrainConfig& cfg) {
    cfg.validate();
    init.validate();
    if (init.input_dim() != ds_train.dimension())
        throw DimensionError("model input dim " + std::to_string(init.input_dim()) +
                             " does not match dataset dim " + std::to_string(ds_train.dimension()));
    if (cfg.freeze_layers > init.layers.size())
        throw ConfigError("train.freeze_layers exceeds the number of layers");

    TrainResult result;
    result.initial = init;
    ModelParams params = std::move(init);
    AdamState adam = AdamState::for_model(params);
    const FreezeMask freeze{cfg.freeze_layers};

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const std::uint64_t es = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
        EpochTally tally;

        switch (cfg.loss) {
            case LossKind::Scl: {
                auto g = build_genuine_sets(ds_train, cfg.per_subject, derive_seed(es, kStreamGenuine));
                auto m = build_imposter_sets(ds_train, cfg.per_subject, derive_seed(es, kStreamImposter));
                auto batches = make_batches(std::move(g.items), std::move(m.items), cfg.batch_size,
                                            derive_seed(es, kStreamBatches));
                run_batches(batches, params, adam, cfg, freeze, tally, epoch,
                            [&](StepContext& ctx, const SampleSet& s) { return ctx.scl(s, cfg.scl); });
                break;
            }
            case LossKind::Cl: {
                auto pairs = build_cl_pairs(ds_train, cfg.per_subject, derive_seed(es, kStreamGenuine));
                std::vector<ContrastivePair> genuine, imposter;
                for (const auto& p : pairs.items) (p.label == 0 ? genuine : imposter).push_back(p);
                auto batches = make_batches(std::move(genuine), std::move(imposter), cfg.batch_size,
                                            derive_seed(es, kStreamBatches));
                run_batches(batches, params, adam, cfg, freeze, tally, epoch,
                            [&](StepContext& ctx, const ContrastivePair& p) {
                                return ctx.cl(p, cfg.cl_margin);
                            });
                break;
            }
            case LossKind::Tl: {
                // 2·per_subject triplets: same items per epoch as sets and pairs.
                auto t = build_triplets(ds_train, 2 * cfg.per_subject, derive_seed(es, kStreamGenuine));
                auto batches = make_batches(std::move(t.items), std::vector<Triplet>{}, cfg.batch_size,
                                            derive_seed(es, kStreamBatches));
                run_batches(batches, params, adam, cfg, freeze, tally, epoch,
                            [&](StepContext& ctx, const Triplet& tr) { return ctx.tl(tr, cfg.tl_margin); });
                tally.imposter = tally.genuine;
                tally.n_imposter = tally.n_genuine;
                break;
            }
        }

        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
        result.log.epochs.push_back({epoch, tally.sum, mean_or_zero(tally.genuine, tally.n_genuine),
                                     mean_or_zero(tally.imposter, tally.n_imposter), elapsed.count()});
    }
    result.params = std::move(params);
    return result;
}

}  // namespace sclmetric
