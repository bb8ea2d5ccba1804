#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sclmetric/dataset.hpp"
#include "sclmetric/losses.hpp"
#include "sclmetric/model.hpp"

namespace sclmetric {

enum class LossKind { Scl, Cl, Tl };
enum class OptimizerKind { Adam, Sgd };

const char* loss_name(LossKind k) noexcept;  // "scl" | "cl" | "tl"
LossKind parse_loss(const std::string& s);   // throws ConfigError

struct AdamState {
    ParamGrads m;
    ParamGrads v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_model(const ModelParams& params);
};

/// One bias-corrected Adam update. Layers covered by `freeze` are skipped
/// entirely, so their parameters and moment accumulators stay bitwise fixed.
void adam_step(ModelParams& params, const ParamGrads& grads, AdamState& state, double lr,
               const FreezeMask& freeze = {});

void sgd_step(ModelParams& params, const ParamGrads& grads, double lr,
              const FreezeMask& freeze = {});

struct TrainConfig {
    LossKind loss = LossKind::Scl;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 3e-6;
    int epochs = 30;
    int batch_size = 50;
    SclConfig scl{};
    double cl_margin = 2.0;
    double tl_margin = 0.4;
    int per_subject = 4;  // sets (or pairs/triplets) mined per subject per epoch
    std::uint64_t seed = 42;
    std::size_t freeze_layers = 1;
    std::vector<std::size_t> hidden{32};
    std::size_t embedding_dim = 16;
    Reduction reduction = Reduction::Sum;

    void validate() const;  // throws ConfigError

    /// lr 3e-6, 30 epochs, batch 50, first layer frozen.
    static TrainConfig finetune_regime();
    /// lr 1e-3, 300 epochs, nothing frozen.
    static TrainConfig synthetic_regime();
};

/// Layer sizes for a dataset of the given input dimension.
std::vector<std::size_t> model_dims(std::size_t input_dim, const TrainConfig& cfg);

struct EpochLog {
    int epoch = 0;  // 1-based
    double sum_loss = 0.0;
    double mean_genuine = 0.0;   // scl: genuine sets; cl: genuine pairs; tl: all triplets
    double mean_imposter = 0.0;  // scl: imposter sets; cl: imposter pairs; tl: all triplets
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;

    /// epoch,sum_loss,mean_genuine,mean_imposter,seconds
    std::string to_csv() const;
};

struct TrainResult {
    ModelParams initial;
    ModelParams params;
    TrainLog log;
};

/// The untrained model `train` starts from for a given training seed.
ModelParams initial_model(const std::vector<std::size_t>& dims, std::uint64_t train_seed);

/// Initializes a model from cfg.seed and trains it; see train_from.
TrainResult train(const Dataset& ds_train, const TrainConfig& cfg);

/// Each epoch re-mines sets with a seed derived from (cfg.seed, epoch), deals
/// them into batches and takes one optimizer step per batch on the summed batch
/// loss. Throws NumericError if a loss turns non-finite.
TrainResult train_from(const Dataset& ds_train, ModelParams init, const TrainConfig& cfg);

}  // namespace sclmetric
