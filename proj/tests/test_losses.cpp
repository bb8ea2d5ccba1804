#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sclmetric/errors.hpp"
#include "sclmetric/losses.hpp"

using namespace sclmetric;
using oracle::fd_gradient;
using oracle::rel_error;

namespace {

const SclConfig kMargins{2.0, 3.1};

bool all_zero(const Embedding& g) {
    for (double x : g)
        if (x != 0.0) return false;
    return true;
}

Embedding shifted(const Embedding& v, const Embedding& t) {
    Embedding out(v);
    for (std::size_t k = 0; k < v.size(); ++k) out[k] += t[k];
    return out;
}

}  // namespace

TEST(Distance, Examples) {
    EXPECT_EQ(squared_euclidean(Embedding{0, 0}, Embedding{3, 4}), 25.0);
    EXPECT_EQ(squared_euclidean(Embedding{1, 2, 3}, Embedding{1, 2, 3}), 0.0);
    EXPECT_EQ(squared_euclidean(Embedding{1, 2, 3}, Embedding{2, 0, 3}), 5.0);
    EXPECT_EQ(euclidean(Embedding{0, 0}, Embedding{3, 4}), 5.0);
    EXPECT_THROW(squared_euclidean(Embedding{1}, Embedding{1, 2}), DimensionError);
}

TEST(Intra, CoincidentIsZero) {
    const Embedding a{1.5, -2};
    const auto l = scl_intra_loss(a, a, a);
    EXPECT_EQ(l.value, 0.0);
    EXPECT_TRUE(all_zero(l.grad_a) && all_zero(l.grad_b) && all_zero(l.grad_c));
}

TEST(Intra, HandExample) {
    const auto l = scl_intra_loss(Embedding{0, 0}, Embedding{1, 0}, Embedding{1, 1});
    EXPECT_EQ(l.value, 2.0);
    EXPECT_EQ(l.grad_a, (Embedding{-2, 0}));
    EXPECT_EQ(l.grad_b, (Embedding{2, -2}));
    EXPECT_EQ(l.grad_c, (Embedding{0, 2}));
}

TEST(Intra, DegenerateSetDropsSecondPair) {
    const auto l = scl_intra_loss(Embedding{0, 0}, Embedding{1, 0});
    EXPECT_EQ(l.value, 1.0);
    EXPECT_EQ(l.grad_b, (Embedding{2, 0}));
    EXPECT_TRUE(l.grad_c.empty());
}

TEST(Intra, ZeroOnlyWhenAllCoincide) {
    EXPECT_GT(scl_intra_loss(Embedding{0}, Embedding{0}, Embedding{1e-9}).value, 0.0);
    EXPECT_GT(scl_intra_loss(Embedding{1e-9}, Embedding{0}, Embedding{0}).value, 0.0);
}

TEST(Intra, FiniteDifferences8d) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        const Embedding a = oracle::random_vec(rng, 8), b = oracle::random_vec(rng, 8), c = oracle::random_vec(rng, 8);
        const auto l = scl_intra_loss(a, b, c);
        EXPECT_LT(rel_error(l.grad_a, fd_gradient([&](const Embedding& x) { return scl_intra_loss(x, b, c).value; }, a)), 1e-6);
        EXPECT_LT(rel_error(l.grad_b, fd_gradient([&](const Embedding& x) { return scl_intra_loss(a, x, c).value; }, b)), 1e-6);
        EXPECT_LT(rel_error(l.grad_c, fd_gradient([&](const Embedding& x) { return scl_intra_loss(a, b, x).value; }, c)), 1e-6);
    }
}

TEST(Inter, CoincidentEqualsMarginSum) {
    const Embedding a{0.3, 0.3, -1};
    EXPECT_EQ(scl_inter_loss(a, a, a, kMargins).value, 2.0 + 3.1);
    EXPECT_EQ(scl_inter_loss(a, a, a, kMargins).value, 5.1);
}

TEST(Inter, BothHingesInactive) {
    const auto l = scl_inter_loss(Embedding{0, 0}, Embedding{2, 0}, Embedding{2, 3}, kMargins);  // 4 and 9
    EXPECT_EQ(l.value, 0.0);
    EXPECT_TRUE(all_zero(l.grad_a) && all_zero(l.grad_b) && all_zero(l.grad_c));
}

TEST(Inter, OneActiveHinge) {
    const auto l = scl_inter_loss(Embedding{0, 0}, Embedding{1, 0}, Embedding{1, 2}, kMargins);  // 1 and 4
    EXPECT_EQ(l.value, 1.0);
    EXPECT_EQ(l.grad_a, (Embedding{2, 0}));   // -2(a-b)
    EXPECT_EQ(l.grad_b, (Embedding{-2, 0}));  // -2(b-a), second hinge flat
    EXPECT_EQ(l.grad_c, (Embedding{0, 0}));
}

TEST(Inter, HingeAtExactMarginIsInactive) {
    const auto l = scl_inter_loss(Embedding{0}, Embedding{1}, Embedding{3}, SclConfig{1.0, 4.0});  // 1 and 4
    EXPECT_EQ(l.value, 0.0);
    EXPECT_TRUE(all_zero(l.grad_a) && all_zero(l.grad_b) && all_zero(l.grad_c));
}

TEST(Inter, RejectsNonPositiveMargins) {
    const Embedding a{0};
    EXPECT_THROW(scl_inter_loss(a, a, a, SclConfig{0.0, 1.0}), ConfigError);
    EXPECT_THROW(scl_inter_loss(a, a, a, SclConfig{1.0, -1.0}), ConfigError);
}

TEST(SetLoss, LabelSelectsComponentExactly) {
    std::mt19937_64 rng(3);
    const Embedding a = oracle::random_vec(rng, 5), b = oracle::random_vec(rng, 5), c = oracle::random_vec(rng, 5);
    const auto g = scl_set_loss(SetLabel::Genuine, a, b, c, kMargins);
    const auto intra = scl_intra_loss(a, b, c);
    EXPECT_EQ(g.value, intra.value);
    EXPECT_EQ(g.grad_a, intra.grad_a);
    EXPECT_EQ(g.grad_c, intra.grad_c);
    const auto i = scl_set_loss(SetLabel::Imposter, a, b, c, kMargins);
    const auto inter = scl_inter_loss(a, b, c, kMargins);
    EXPECT_EQ(i.value, inter.value);
    EXPECT_EQ(i.grad_b, inter.grad_b);
}

TEST(SetLoss, GenuineIgnoresMargins) {
    std::mt19937_64 rng(4);
    const Embedding a = oracle::random_vec(rng, 5), b = oracle::random_vec(rng, 5), c = oracle::random_vec(rng, 5);
    const double base = scl_set_loss(SetLabel::Genuine, a, b, c, kMargins).value;
    for (double m : {0.01, 1.0, 50.0, 1e6})
        EXPECT_EQ(scl_set_loss(SetLabel::Genuine, a, b, c, SclConfig{m, m * 2}).value, base);
}

TEST(SetLoss, BatchIsSumOfSets) {
    std::vector<Sample> pool;
    std::mt19937_64 rng(5);
    for (int k = 0; k < 9; ++k)
        pool.push_back({k / 3, k % 3 == 0 ? Subclass::NonInjured : Subclass::Injured, k, oracle::random_vec(rng, 4)});
    std::vector<SampleSet> sets{{SetLabel::Genuine, &pool[0], &pool[1], &pool[2]},
                                {SetLabel::Imposter, &pool[3], &pool[7], &pool[4]},
                                {SetLabel::Genuine, &pool[6], &pool[7], nullptr}};
    double expected = 0.0;
    for (const auto& s : sets) expected += scl_set_loss(s, kMargins).value;
    EXPECT_EQ(scl_batch_loss(sets, kMargins), expected);
    EXPECT_EQ(scl_batch_loss(sets, kMargins, Reduction::Mean), expected / 3.0);
}

TEST(Contrastive, Examples) {
    EXPECT_EQ(contrastive_loss(Embedding{1, 1}, Embedding{1, 1}, 0, 2.0).value, 0.0);
    const auto far = contrastive_loss(Embedding{0, 0}, Embedding{3, 0}, 1, 2.0);
    EXPECT_EQ(far.value, 0.0);
    EXPECT_TRUE(all_zero(far.grad_a) && all_zero(far.grad_b));
    EXPECT_EQ(contrastive_loss(Embedding{0, 0}, Embedding{1, 0}, 1, 2.0).value, 0.5);
    EXPECT_EQ(contrastive_loss(Embedding{0, 0}, Embedding{3, 4}, 0, 2.0).value, 12.5);
}

TEST(Contrastive, CoincidentImposterHasZeroGradient) {
    const auto l = contrastive_loss(Embedding{1, 2}, Embedding{1, 2}, 1, 2.0);
    EXPECT_EQ(l.value, 2.0);
    EXPECT_TRUE(all_zero(l.grad_a) && all_zero(l.grad_b));
}

TEST(Contrastive, RejectsBadArguments) {
    EXPECT_THROW(contrastive_loss(Embedding{0}, Embedding{1}, 2, 2.0), ConfigError);
    EXPECT_THROW(contrastive_loss(Embedding{0}, Embedding{1}, 1, 0.0), ConfigError);
    EXPECT_THROW(contrastive_loss(Embedding{0}, Embedding{1, 2}, 1, 1.0), DimensionError);
}

TEST(Triplet, Examples) {
    std::mt19937_64 rng(6);
    const Embedding a = oracle::random_vec(rng, 4), p = oracle::random_vec(rng, 4);
    EXPECT_DOUBLE_EQ(triplet_loss(a, p, p, 0.4).value, 0.4);
    const auto inactive = triplet_loss(Embedding{0}, Embedding{0}, Embedding{1}, 0.4);
    EXPECT_EQ(inactive.value, 0.0);
    EXPECT_TRUE(all_zero(inactive.grad_a) && all_zero(inactive.grad_b) && all_zero(inactive.grad_c));
    EXPECT_THROW(triplet_loss(a, p, p, -0.1), ConfigError);
}

TEST(Triplet, FiniteDifferences) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
        const Embedding a = oracle::random_vec(rng, 6), p = oracle::random_vec(rng, 6), n = oracle::random_vec(rng, 6);
        const double m = 4.0;
        const auto l = triplet_loss(a, p, n, m);
        if (l.value == 0.0) continue;
        EXPECT_LT(rel_error(l.grad_a, fd_gradient([&](const Embedding& x) { return triplet_loss(x, p, n, m).value; }, a)), 1e-6);
        EXPECT_LT(rel_error(l.grad_b, fd_gradient([&](const Embedding& x) { return triplet_loss(a, x, n, m).value; }, p)), 1e-6);
        EXPECT_LT(rel_error(l.grad_c, fd_gradient([&](const Embedding& x) { return triplet_loss(a, p, x, m).value; }, n)), 1e-6);
    }
}

TEST(Properties, NonNegativeAndTranslationInvariant) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 200; ++t) {
        const Embedding a = oracle::random_vec(rng, 3), b = oracle::random_vec(rng, 3), c = oracle::random_vec(rng, 3);
        const Embedding s = oracle::random_vec(rng, 3, 5.0);
        const Embedding as = shifted(a, s), bs = shifted(b, s), cs = shifted(c, s);
        const double values[] = {scl_intra_loss(a, b, c).value, scl_inter_loss(a, b, c, kMargins).value,
                                 contrastive_loss(a, b, 0, 2).value, contrastive_loss(a, b, 1, 2).value,
                                 triplet_loss(a, b, c, 0.4).value};
        const double moved[] = {scl_intra_loss(as, bs, cs).value, scl_inter_loss(as, bs, cs, kMargins).value,
                                contrastive_loss(as, bs, 0, 2).value, contrastive_loss(as, bs, 1, 2).value,
                                triplet_loss(as, bs, cs, 0.4).value};
        for (int k = 0; k < 5; ++k) {
            EXPECT_GE(values[k], 0.0);
            EXPECT_NEAR(values[k], moved[k], 1e-9 * (1.0 + values[k]));
        }
    }
}

TEST(Properties, HingeFlatnessOnRandomInactiveInputs) {
    std::mt19937_64 rng(9);
    int checked = 0;
    for (int t = 0; t < 500; ++t) {
        const Embedding a = oracle::random_vec(rng, 3, 2.0), b = oracle::random_vec(rng, 3, 2.0),
                        c = oracle::random_vec(rng, 3, 2.0);
        const auto inter = scl_inter_loss(a, b, c, kMargins);
        if (squared_euclidean(a, b) >= 2.0 && squared_euclidean(b, c) >= 3.1) {
            EXPECT_EQ(inter.value, 0.0);
            EXPECT_TRUE(all_zero(inter.grad_a) && all_zero(inter.grad_b) && all_zero(inter.grad_c));
            ++checked;
        }
        const auto cl = contrastive_loss(a, b, 1, 2.0);
        if (euclidean(a, b) >= 2.0) EXPECT_TRUE(cl.value == 0.0 && all_zero(cl.grad_a) && all_zero(cl.grad_b));
        const auto tl = triplet_loss(a, b, c, 0.4);
        if (squared_euclidean(a, b) - squared_euclidean(a, c) + 0.4 <= 0.0)
            EXPECT_TRUE(tl.value == 0.0 && all_zero(tl.grad_a) && all_zero(tl.grad_b) && all_zero(tl.grad_c));
    }
    EXPECT_GT(checked, 50);
}
