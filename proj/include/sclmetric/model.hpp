#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sclmetric/dataset.hpp"

namespace sclmetric {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1 };

/// Fully connected layer; `weights` is out×in, row-major.
struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> bias;
    Activation activation = Activation::Identity;

    double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
    double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }

    bool operator==(const Layer&) const = default;
};

/// Parameters of the embedding network: a chain of layers whose final
/// activation is the identity.
struct ModelParams {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }

    void validate() const;  // throws DataError on a broken chain
    bool operator==(const ModelParams&) const = default;
};

/// Layers with index < frozen_layer_count receive no updates.
struct FreezeMask {
    std::size_t frozen_layer_count = 0;

    bool frozen(std::size_t layer) const noexcept { return layer < frozen_layer_count; }
};

/// dims = [input, hidden..., output]; hidden layers use ReLU, the last layer is
/// linear. Weights ~ U(−s, s), s = sqrt(6 / (fan_in + fan_out)); zero biases.
ModelParams init_model(const std::vector<std::size_t>& dims, std::uint64_t seed);

/// Square identity map (single linear layer), handy for evaluating raw features.
ModelParams identity_model(std::size_t dim);

struct ForwardTrace {
    std::vector<Embedding> inputs;          // input to each layer
    std::vector<Embedding> pre_activations; // affine output of each layer
    Embedding output;
};

ForwardTrace forward(const ModelParams& m, Vec x);
Embedding embed(const ModelParams& m, Vec x);

/// Parameter gradients laid out like the model's layers.
struct LayerGrad {
    std::vector<double> weights;
    std::vector<double> bias;
};

struct ParamGrads {
    std::vector<LayerGrad> layers;

    static ParamGrads zeros_like(const ModelParams& m);
    void add(const ParamGrads& other);
    void scale(double factor);
};

/// Backpropagates `grad_out` (∂L/∂output) through the network, accumulating into
/// `acc`. Frozen layers are left untouched (their gradients stay exactly zero).
void backward(const ModelParams& m, const ForwardTrace& trace, Vec grad_out,
              const FreezeMask& freeze, ParamGrads& acc);

ParamGrads backward(const ModelParams& m, const ForwardTrace& trace, Vec grad_out,
                    const FreezeMask& freeze);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian binary layout:
//   magic     8 bytes  "SCLMCKPT"
//   version   u32      (kCheckpointVersion)
//   n_layers  u32
//   per layer: in u32, out u32, activation u8,
//              weights out·in f64 (row-major), bias out f64
//   metadata: epoch u64, seed u64, loss_name (u32 length + bytes),
//             frozen_layers u32, history_len u32, history f64...
//   end marker 4 bytes "END\0"

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    std::uint64_t epoch = 0;
    std::uint64_t seed = 0;
    std::string loss_name;
    std::uint32_t frozen_layers = 0;
    std::vector<double> loss_history;

    bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
    ModelParams params;
    CheckpointMeta meta;
};

std::string serialize_checkpoint(const ModelParams& m, const CheckpointMeta& meta);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelParams& m, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sclmetric
