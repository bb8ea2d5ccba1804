#include "sclmetric/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sclmetric/errors.hpp"
#include "sclmetric/rng.hpp"

namespace sclmetric {

void ModelParams::validate() const {
    if (layers.empty()) throw DataError("model has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& L = layers[l];
        if (L.in == 0 || L.out == 0) throw DataError("layer " + std::to_string(l) + " has a zero dim");
        if (L.weights.size() != L.in * L.out || L.bias.size() != L.out)
            throw DataError("layer " + std::to_string(l) + " storage does not match its shape");
        if (l > 0 && layers[l - 1].out != L.in)
            throw DataError("layer " + std::to_string(l) + " input does not chain");
    }
    if (layers.back().activation != Activation::Identity)
        throw DataError("final layer must be linear");
}

ModelParams init_model(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw ConfigError("model needs at least input and output dims");
    for (auto d : dims)
        if (d == 0) throw ConfigError("model dims must be positive");
    Rng rng(seed);
    ModelParams m;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer L;
        L.in = dims[l];
        L.out = dims[l + 1];
        L.activation = l + 2 == dims.size() ? Activation::Identity : Activation::Relu;
        const double s = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
        std::uniform_real_distribution<double> u(-s, s);
        L.weights.resize(L.in * L.out);
        for (auto& w : L.weights) w = u(rng);
        L.bias.assign(L.out, 0.0);
        m.layers.push_back(std::move(L));
    }
    return m;
}

ModelParams identity_model(std::size_t dim) {
    if (dim == 0) throw ConfigError("identity model needs a positive dim");
    Layer L;
    L.in = L.out = dim;
    L.weights.assign(dim * dim, 0.0);
    for (std::size_t k = 0; k < dim; ++k) L.w(k, k) = 1.0;
    L.bias.assign(dim, 0.0);
    ModelParams m;
    m.layers.push_back(std::move(L));
    return m;
}

ForwardTrace forward(const ModelParams& m, Vec x) {
    if (x.size() != m.input_dim())
        throw DimensionError("model expects input of length " + std::to_string(m.input_dim()) +
                             ", got " + std::to_string(x.size()));
    ForwardTrace t;
    t.inputs.reserve(m.layers.size());
    t.pre_activations.reserve(m.layers.size());
    Embedding cur(x.begin(), x.end());
    for (const Layer& L : m.layers) {
        Embedding z(L.bias);
        for (std::size_t r = 0; r < L.out; ++r) {
            const double* row = L.weights.data() + r * L.in;
            double acc = 0.0;
            for (std::size_t c = 0; c < L.in; ++c) acc += row[c] * cur[c];
            z[r] += acc;
        }
        Embedding a = z;
        if (L.activation == Activation::Relu)
            for (auto& v : a) v = v > 0.0 ? v : 0.0;
        t.inputs.push_back(std::move(cur));
        t.pre_activations.push_back(std::move(z));
        cur = std::move(a);
    }
    t.output = std::move(cur);
    return t;
}

Embedding embed(const ModelParams& m, Vec x) { return forward(m, x).output; }

ParamGrads ParamGrads::zeros_like(const ModelParams& m) {
    ParamGrads g;
    for (const Layer& L : m.layers)
        g.layers.push_back({std::vector<double>(L.weights.size(), 0.0), std::vector<double>(L.out, 0.0)});
    return g;
}

void ParamGrads::add(const ParamGrads& other) {
    if (other.layers.size() != layers.size()) throw DimensionError("gradient layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& dst = layers[l];
        const auto& src = other.layers[l];
        if (src.weights.size() != dst.weights.size() || src.bias.size() != dst.bias.size())
            throw DimensionError("gradient shape mismatch in layer " + std::to_string(l));
        for (std::size_t k = 0; k < dst.weights.size(); ++k) dst.weights[k] += src.weights[k];
        for (std::size_t k = 0; k < dst.bias.size(); ++k) dst.bias[k] += src.bias[k];
    }
}

void ParamGrads::scale(double factor) {
    for (auto& L : layers) {
        for (auto& v : L.weights) v *= factor;
        for (auto& v : L.bias) v *= factor;
    }
}

void backward(const ModelParams& m, const ForwardTrace& trace, Vec grad_out,
              const FreezeMask& freeze, ParamGrads& acc) {
    const std::size_t n = m.layers.size();
    if (trace.inputs.size() != n || trace.pre_activations.size() != n)
        throw DataError("forward trace does not match the model");
    if (acc.layers.size() != n) throw DimensionError("gradient accumulator does not match the model");
    if (grad_out.size() != m.output_dim())
        throw DimensionError("output gradient has length " + std::to_string(grad_out.size()) +
                             ", model output is " + std::to_string(m.output_dim()));

    Embedding delta(grad_out.begin(), grad_out.end());  // ∂L/∂(activation output)
    for (std::size_t l = n; l-- > freeze.frozen_layer_count;) {
        const Layer& L = m.layers[l];
        const Embedding& z = trace.pre_activations[l];
        const Embedding& x = trace.inputs[l];
        if (z.size() != L.out || x.size() != L.in)
            throw DataError("forward trace shape does not match layer " + std::to_string(l));
        if (L.activation == Activation::Relu)
            for (std::size_t r = 0; r < L.out; ++r)
                if (!(z[r] > 0.0)) delta[r] = 0.0;

        LayerGrad& g = acc.layers[l];
        for (std::size_t r = 0; r < L.out; ++r) {
            g.bias[r] += delta[r];
            double* row = g.weights.data() + r * L.in;
            for (std::size_t c = 0; c < L.in; ++c) row[c] += delta[r] * x[c];
        }
        if (l == freeze.frozen_layer_count) break;  // nothing trainable further down
        Embedding prev(L.in, 0.0);
        for (std::size_t r = 0; r < L.out; ++r) {
            const double* row = L.weights.data() + r * L.in;
            for (std::size_t c = 0; c < L.in; ++c) prev[c] += row[c] * delta[r];
        }
        delta = std::move(prev);
    }
}

ParamGrads backward(const ModelParams& m, const ForwardTrace& trace, Vec grad_out,
                    const FreezeMask& freeze) {
    ParamGrads g = ParamGrads::zeros_like(m);
    backward(m, trace, grad_out, freeze, g);
    return g;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'C', 'L', 'M', 'C', 'K', 'P', 'T'};
constexpr char kEnd[4] = {'E', 'N', 'D', '\0'};

class Writer {
public:
    void bytes(const char* p, std::size_t n) { buf_.append(p, n); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void u64(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(const std::string& s) : s_(s) {}

    void bytes(char* out, std::size_t n) {
        need(n);
        std::memcpy(out, s_.data() + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(s_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(u8()) << (8 * k);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(u8()) << (8 * k);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t remaining() const { return s_.size() - pos_; }

    void need(std::size_t n) const {
        if (remaining() < n) throw CheckpointError("corrupt checkpoint: truncated");
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelParams& m, const CheckpointMeta& meta) {
    m.validate();
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(m.layers.size()));
    for (const Layer& L : m.layers) {
        w.u32(static_cast<std::uint32_t>(L.in));
        w.u32(static_cast<std::uint32_t>(L.out));
        w.u8(static_cast<std::uint8_t>(L.activation));
        for (double v : L.weights) w.f64(v);
        for (double v : L.bias) w.f64(v);
    }
    w.u64(meta.epoch);
    w.u64(meta.seed);
    w.u32(static_cast<std::uint32_t>(meta.loss_name.size()));
    w.bytes(meta.loss_name.data(), meta.loss_name.size());
    w.u32(meta.frozen_layers);
    w.u32(static_cast<std::uint32_t>(meta.loss_history.size()));
    for (double v : meta.loss_history) w.f64(v);
    w.bytes(kEnd, sizeof(kEnd));
    return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("corrupt checkpoint: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw CheckpointVersionError("unsupported checkpoint version " + std::to_string(version) +
                                     " (expected " + std::to_string(kCheckpointVersion) + ")");
    Checkpoint ck;
    const std::uint32_t n_layers = r.u32();
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        Layer L;
        L.in = r.u32();
        L.out = r.u32();
        const std::uint8_t act = r.u8();
        if (act > 1) throw CheckpointError("corrupt checkpoint: unknown activation");
        L.activation = static_cast<Activation>(act);
        // Guard the allocation against garbage shapes before reserving memory.
        if (L.in * L.out + L.out > r.remaining() / sizeof(double))
            throw CheckpointError("corrupt checkpoint: truncated");
        L.weights.resize(L.in * L.out);
        for (auto& v : L.weights) v = r.f64();
        L.bias.resize(L.out);
        for (auto& v : L.bias) v = r.f64();
        ck.params.layers.push_back(std::move(L));
    }
    ck.meta.epoch = r.u64();
    ck.meta.seed = r.u64();
    const std::uint32_t name_len = r.u32();
    r.need(name_len);
    ck.meta.loss_name.resize(name_len);
    r.bytes(ck.meta.loss_name.data(), name_len);
    ck.meta.frozen_layers = r.u32();
    const std::uint32_t hist = r.u32();
    r.need(static_cast<std::size_t>(hist) * sizeof(double));
    ck.meta.loss_history.resize(hist);
    for (auto& v : ck.meta.loss_history) v = r.f64();
    char end[4];
    r.bytes(end, sizeof(end));
    if (std::memcmp(end, kEnd, sizeof(kEnd)) != 0 || r.remaining() != 0)
        throw CheckpointError("corrupt checkpoint: bad trailer");
    try {
        ck.params.validate();
    } catch (const DataError& e) {
        throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    }
    return ck;
}

void save_checkpoint(const ModelParams& m, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(m, meta);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str());
}

}  // namespace sclmetric
