#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "sclmetric/errors.hpp"
#include "sclmetric/losses.hpp"
#include "sclmetric/model.hpp"

using namespace sclmetric;

namespace {

/// Plain nested-loop evaluator used as a second opinion on forward().
Embedding reference_forward(const ModelParams& m, Embedding x) {
    for (const auto& l : m.layers) {
        Embedding y(l.out);
        for (std::size_t r = 0; r < l.out; ++r) {
            double acc = l.bias[r];
            for (std::size_t c = 0; c < l.in; ++c) acc += l.weights[r * l.in + c] * x[c];
            y[r] = l.activation == Activation::Relu ? std::max(acc, 0.0) : acc;
        }
        x = std::move(y);
    }
    return x;
}

CheckpointMeta some_meta() { return {12, 99, "scl", 1, {3.5, 2.25, 1.0}}; }

}  // namespace

TEST(Init, ShapesBoundsAndDeterminism) {
    const ModelParams m = init_model({4, 8, 3}, 5);
    ASSERT_EQ(m.layers.size(), 2u);
    EXPECT_EQ(m.layers[0].out, 8u);
    EXPECT_EQ(m.layers[0].in, 4u);
    EXPECT_EQ(m.layers[1].out, 3u);
    EXPECT_EQ(m.layers[1].in, 8u);
    EXPECT_EQ(m.layers[0].weights.size(), 32u);
    EXPECT_EQ(m.layers[0].activation, Activation::Relu);
    EXPECT_EQ(m.layers[1].activation, Activation::Identity);
    EXPECT_EQ(init_model({4, 8, 3}, 5), m);
    EXPECT_NE(init_model({4, 8, 3}, 6), m);
    for (const auto& l : m.layers) {
        const double s = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        for (double w : l.weights) EXPECT_LE(std::abs(w), s);
        for (double b : l.bias) EXPECT_EQ(b, 0.0);
    }
    EXPECT_THROW(init_model({4}, 0), ConfigError);
    EXPECT_THROW(init_model({4, 0, 2}, 0), ConfigError);
}

TEST(Forward, IdentityLayerPassesInputThrough) {
    const Embedding x{1.5, -2, 0.25};
    EXPECT_EQ(embed(identity_model(3), x), x);
}

TEST(Forward, ReluOnNegativePreActivationsIsZero) {
    ModelParams m = identity_model(3);
    m.layers[0].activation = Activation::Relu;
    const auto trace = forward(m, Embedding{-1, -2, -3});
    EXPECT_EQ(trace.output, (Embedding{0, 0, 0}));
    EXPECT_EQ(trace.pre_activations[0], (Embedding{-1, -2, -3}));
}

TEST(Forward, MatchesReferenceEvaluator) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        ModelParams m = init_model({6, 9, 7, 4}, t);
        for (auto& l : m.layers)
            for (auto& b : l.bias) b = oracle::random_vec(rng, 1)[0];
        const Embedding x = oracle::random_vec(rng, 6);
        const Embedding got = embed(m, x), want = reference_forward(m, x);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
    }
    EXPECT_THROW(embed(init_model({3, 2}, 0), Embedding{1, 2}), DimensionError);
}

TEST(Backward, IdentityLayerAnalytic) {
    const Embedding x{1, 2, 3}, g{0.5, -1, 2};
    const ModelParams m = identity_model(3);
    const ParamGrads grads = backward(m, forward(m, x), g, FreezeMask{});
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(grads.layers[0].weights[r * 3 + c], g[r] * x[c]);
    EXPECT_EQ(grads.layers[0].bias, g);
}

TEST(Backward, FrozenLayersGetExactlyZero) {
    const ModelParams m = init_model({4, 6, 5, 3}, 1);
    const Embedding x{1, -1, 0.5, 2}, g{1, 2, 3};
    const ParamGrads all_frozen = backward(m, forward(m, x), g, FreezeMask{3});
    for (const auto& l : all_frozen.layers) {
        for (double w : l.weights) EXPECT_EQ(w, 0.0);
        for (double b : l.bias) EXPECT_EQ(b, 0.0);
    }
    const ParamGrads prefix = backward(m, forward(m, x), g, FreezeMask{2});
    for (std::size_t l = 0; l < 2; ++l)
        for (double w : prefix.layers[l].weights) EXPECT_EQ(w, 0.0);
    const ParamGrads free = backward(m, forward(m, x), g, FreezeMask{});
    EXPECT_EQ(prefix.layers[2].weights, free.layers[2].weights);
}

TEST(Backward, SclBatchThroughNetworkMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    ModelParams m = init_model({8, 10, 6}, 4);
    for (auto& l : m.layers)
        for (auto& b : l.bias) b = 0.1 * oracle::random_vec(rng, 1)[0];
    std::vector<Embedding> xs;
    for (int k = 0; k < 6; ++k) xs.push_back(oracle::random_vec(rng, 8));
    const SclConfig cfg{2.0, 3.1};
    struct S {
        SetLabel y;
        int a, b, c;
    };
    const std::vector<S> sets{{SetLabel::Genuine, 0, 1, 2}, {SetLabel::Imposter, 3, 1, 4}, {SetLabel::Imposter, 5, 2, -1}};

    auto loss = [&](const ModelParams& p) {
        double total = 0.0;
        for (const auto& s : sets) {
            const Embedding c = s.c < 0 ? Embedding{} : embed(p, xs[s.c]);
            total += scl_set_loss(s.y, embed(p, xs[s.a]), embed(p, xs[s.b]), c, cfg).value;
        }
        return total;
    };
    ParamGrads acc = ParamGrads::zeros_like(m);
    for (const auto& s : sets) {
        const auto ta = forward(m, xs[s.a]), tb = forward(m, xs[s.b]);
        const auto tc = s.c < 0 ? ForwardTrace{} : forward(m, xs[s.c]);
        const auto l = scl_set_loss(s.y, ta.output, tb.output, tc.output, cfg);
        backward(m, ta, l.grad_a, {}, acc);
        backward(m, tb, l.grad_b, {}, acc);
        if (s.c >= 0) backward(m, tc, l.grad_c, {}, acc);
    }
    const Embedding analytic = oracle::flatten(acc);
    Embedding numeric;
    ModelParams probe = m;
    for (double* slot : oracle::parameter_slots(probe)) {
        const double keep = *slot;
        *slot = keep + 1e-5;
        const double up = loss(probe);
        *slot = keep - 1e-5;
        const double down = loss(probe);
        *slot = keep;
        numeric.push_back((up - down) / 2e-5);
    }
    EXPECT_LT(oracle::rel_error(analytic, numeric), 1e-4);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const ModelParams m = init_model({5, 7, 3}, 8);
    const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(m, some_meta()));
    EXPECT_EQ(back.params, m);
    EXPECT_EQ(back.meta, some_meta());

    const auto path = std::filesystem::temp_directory_path() / "sclmetric_ckpt.bin";
    save_checkpoint(m, some_meta(), path);
    EXPECT_EQ(load_checkpoint(path).params, m);
    std::filesystem::remove(path);
}

TEST(Checkpoint, LayoutStartsWithMagicAndVersion) {
    const std::string bytes = serialize_checkpoint(identity_model(2), some_meta());
    EXPECT_EQ(bytes.substr(0, 8), "SCLMCKPT");
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 8, 4);
    EXPECT_EQ(version, kCheckpointVersion);
    EXPECT_EQ(bytes.substr(bytes.size() - 4), std::string("END\0", 4));
}

TEST(Checkpoint, TruncatedFileIsCorrupt) {
    const std::string bytes = serialize_checkpoint(init_model({3, 4, 2}, 1), some_meta());
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1})
        EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut)), CheckpointError) << cut;
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint(bad), CheckpointError);
}

TEST(Checkpoint, VersionBumpIsAVersionError) {
    std::string bytes = serialize_checkpoint(identity_model(2), some_meta());
    const std::uint32_t next = kCheckpointVersion + 1;
    std::memcpy(bytes.data() + 8, &next, 4);
    EXPECT_THROW(deserialize_checkpoint(bytes), CheckpointVersionError);
}
