#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "sclmetric/dataset.hpp"
#include "sclmetric/errors.hpp"

using namespace sclmetric;

namespace {

Sample sample(int id, Subclass sc, int idx, Embedding e) { return {id, sc, idx, std::move(e)}; }

Dataset subjects_with(int n, int n_non_injured, int n_injured, std::size_t d = 2) {
    std::vector<SubjectRecord> recs;
    for (int id = 0; id < n; ++id) {
        SubjectRecord r{id, {}, {}};
        for (int k = 0; k < n_non_injured; ++k)
            r.non_injured.push_back(sample(id, Subclass::NonInjured, k, Embedding(d, id + 0.1 * k)));
        for (int k = 0; k < n_injured; ++k)
            r.injured.push_back(sample(id, Subclass::Injured, k, Embedding(d, -id - 0.1 * k)));
        recs.push_back(std::move(r));
    }
    return Dataset(d, std::move(recs));
}

}  // namespace

TEST(Dataset, CanonicalOrderMakesConstructionOrderIrrelevant) {
    SubjectRecord a{2, {sample(2, Subclass::NonInjured, 1, {1, 1}), sample(2, Subclass::NonInjured, 0, {0, 0})}, {}};
    SubjectRecord b{0, {}, {sample(0, Subclass::Injured, 0, {3, 3})}};
    Dataset x(2, {a, b});
    Dataset y(2, {b, a});
    EXPECT_EQ(x, y);
    EXPECT_EQ(x.subject_ids(), (std::vector<int>{0, 2}));
    EXPECT_EQ(x.subjects()[1].non_injured[0].sample_index, 0);
}

TEST(Dataset, RejectsBrokenInvariants) {
    EXPECT_THROW(Dataset(2, {{0, {sample(0, Subclass::NonInjured, 0, {1, 2, 3})}, {}}}), DimensionError);
    EXPECT_THROW(Dataset(2, {{0, {}, {}}, {0, {}, {}}}), DataError);
    EXPECT_THROW(Dataset(1, {{0, {sample(1, Subclass::NonInjured, 0, {1})}, {}}}), DataError);
    EXPECT_THROW(Dataset(1, {{0, {sample(0, Subclass::Injured, 0, {1})}, {}}}), DataError);
    EXPECT_THROW(Dataset(1, {{0, {sample(0, Subclass::NonInjured, 0, {1}), sample(0, Subclass::NonInjured, 0, {2})}, {}}}),
                 DataError);
    EXPECT_THROW(Dataset(1, {{0, {sample(0, Subclass::NonInjured, 0, {NAN})}, {}}}), DataError);
}

TEST(Synthetic, CountsMatchConfig) {
    SynthConfig cfg;
    cfg.n_subjects = 10;
    cfg.n_non_injured = 3;
    cfg.n_injured = 4;
    const Dataset ds = generate_synthetic(cfg);
    EXPECT_EQ(ds.subject_count(), 10u);
    EXPECT_EQ(ds.non_injured_count(), 30u);
    EXPECT_EQ(ds.injured_count(), 40u);
    EXPECT_EQ(ds.dimension(), 16u);
}

TEST(Synthetic, SameSeedIsBitIdentical) {
    SynthConfig cfg;
    cfg.seed = 7;
    EXPECT_EQ(generate_synthetic(cfg), generate_synthetic(cfg));
    SynthConfig other = cfg;
    other.seed = 8;
    EXPECT_NE(generate_synthetic(cfg), generate_synthetic(other));
}

TEST(Synthetic, ZeroShiftMakesSubclassesIdenticallyDistributed) {
    SynthConfig cfg;
    cfg.n_subjects = 3;
    cfg.dim = 4;
    cfg.n_non_injured = 3000;
    cfg.n_injured = 3000;
    cfg.injury_shift = 0.0;
    cfg.sigma_n = cfg.sigma_i = 0.5;
    const Dataset ds = generate_synthetic(cfg);
    for (const auto& s : ds.subjects()) {
        for (std::size_t k = 0; k < 4; ++k) {
            double mn = 0, mi = 0, vn = 0, vi = 0;
            for (const auto& x : s.non_injured) mn += x.embedding[k] / 3000.0;
            for (const auto& x : s.injured) mi += x.embedding[k] / 3000.0;
            for (const auto& x : s.non_injured) vn += std::pow(x.embedding[k] - mn, 2) / 3000.0;
            for (const auto& x : s.injured) vi += std::pow(x.embedding[k] - mi, 2) / 3000.0;
            EXPECT_NEAR(mn, mi, 4 * 0.5 * std::sqrt(2.0 / 3000.0));
            EXPECT_NEAR(vn, vi, 0.03);
        }
    }
}

TEST(Synthetic, InjuredMeanOffsetIsAboutDelta) {
    SynthConfig cfg;
    cfg.n_subjects = 4;
    cfg.n_non_injured = 400;
    cfg.n_injured = 400;
    cfg.sigma_n = cfg.sigma_i = 0.05;
    cfg.injury_shift = 2.0;
    const Dataset ds = generate_synthetic(cfg);
    const double tol = 3 * 0.05 * std::sqrt(2.0 * 16 / 400.0);
    for (const auto& s : ds.subjects()) {
        Embedding mn(16, 0.0), mi(16, 0.0);
        for (const auto& x : s.non_injured)
            for (std::size_t k = 0; k < 16; ++k) mn[k] += x.embedding[k] / 400.0;
        for (const auto& x : s.injured)
            for (std::size_t k = 0; k < 16; ++k) mi[k] += x.embedding[k] / 400.0;
        double d2 = 0;
        for (std::size_t k = 0; k < 16; ++k) d2 += (mi[k] - mn[k]) * (mi[k] - mn[k]);
        EXPECT_NEAR(std::sqrt(d2), 2.0, tol);
    }
}

TEST(Synthetic, SubjectMeansLieOnTheSphere) {
    SynthConfig cfg;
    cfg.n_non_injured = 1;
    cfg.n_injured = 1;
    cfg.sigma_n = 0.0;
    cfg.subject_radius = 2.5;
    const Dataset ds = generate_synthetic(cfg);
    for (const auto& s : ds.subjects()) {
        double n2 = 0;
        for (double x : s.non_injured[0].embedding) n2 += x * x;
        EXPECT_NEAR(std::sqrt(n2), 2.5, 1e-12);
    }
}

TEST(Synthetic, InvalidConfigIsRejected) {
    SynthConfig cfg;
    cfg.sigma_n = -1;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.n_subjects = 0;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
    cfg = {};
    cfg.n_injury_modes = 0;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}

TEST(Synthetic, PresetsCarryTheirParameters) {
    const SynthConfig e = easy_preset(3);
    EXPECT_EQ(e.n_subjects, 10);
    EXPECT_EQ(e.dim, 16);
    EXPECT_EQ(e.injury_shift, 2.0);
    EXPECT_EQ(e.sigma_n, 0.1);
    EXPECT_EQ(e.sigma_i, 0.1);
    EXPECT_EQ(e.seed, 3u);
    const SynthConfig h = hard_preset(3);
    EXPECT_EQ(h.n_subjects, 30);
    EXPECT_EQ(h.n_injury_modes, 3);
    EXPECT_EQ(h.injury_shift, 3.0);
    EXPECT_DOUBLE_EQ(h.sigma_i, 3 * h.sigma_n);
}

TEST(Synthetic, DistractorsAreSingleNonInjuredSamples) {
    const auto d = generate_distractors(easy_preset(1), 100, 10);
    ASSERT_EQ(d.size(), 100u);
    for (std::size_t k = 0; k < d.size(); ++k) {
        EXPECT_EQ(d[k].subject_id, 10 + static_cast<int>(k));
        EXPECT_EQ(d[k].subclass, Subclass::NonInjured);
        EXPECT_EQ(d[k].embedding.size(), 16u);
    }
}

TEST(Csv, MinimalFile) {
    const Dataset ds = parse_embeddings("subject_id,subclass,sample_index,f0,f1,f2\n0,N,0,1,2,3\n1,I,0,4,5,6\n");
    EXPECT_EQ(ds.subject_count(), 2u);
    EXPECT_EQ(ds.dimension(), 3u);
    EXPECT_EQ(ds.subjects()[0].non_injured.size(), 1u);
    EXPECT_EQ(ds.subjects()[1].injured[0].embedding, (Embedding{4, 5, 6}));
}

TEST(Csv, MixedDimensionNamesTheLine) {
    try {
        parse_embeddings("subject_id,subclass,sample_index,f0,f1,f2\n0,N,0,1,2,3\n1,I,0,4,5,6,7\n");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Csv, MalformedInputsAreParseErrors) {
    const std::string h = "subject_id,subclass,sample_index,f0\n";
    for (const std::string body : {"0,X,0,1\n", "0,N,0,abc\n", "0,N,-1,1\n", "a,N,0,1\n", "0,N,0,1\n0,N,0,2\n",
                                   "0,N,0,1\r\n", "0,N,0,nan\n", "0,N,0\n", "\n"})
        EXPECT_THROW(parse_embeddings(h + body), ParseError) << body;
    EXPECT_THROW(parse_embeddings("id,subclass,sample_index,f0\n0,N,0,1\n"), ParseError);
    EXPECT_THROW(parse_embeddings(""), ParseError);
}

TEST(Csv, RoundTripIsBitExact) {
    SynthConfig cfg = hard_preset(11);
    cfg.n_subjects = 7;
    const Dataset ds = generate_synthetic(cfg);
    EXPECT_EQ(parse_embeddings(format_embeddings(ds)), ds);

    const auto path = std::filesystem::temp_directory_path() / "sclmetric_roundtrip.csv";
    save_embeddings(ds, path);
    EXPECT_EQ(load_embeddings(path), ds);
    std::filesystem::remove(path);
}

TEST(Csv, RoundTripKeepsAwkwardDoubles) {
    const Embedding e{0.1, -0.0, 1e-300, 5e-324, 1.7976931348623157e308, 1.0 / 3.0};
    const Dataset ds(e.size(), {{4, {{4, Subclass::NonInjured, 2, e}}, {}}});
    const Dataset back = parse_embeddings(format_embeddings(ds));
    const auto& got = back.subjects()[0].non_injured[0].embedding;
    for (std::size_t k = 0; k < e.size(); ++k) {
        EXPECT_EQ(got[k], e[k]);
        EXPECT_EQ(std::signbit(got[k]), std::signbit(e[k]));
    }
}

TEST(Csv, DistractorFilesMustBeNonInjured) {
    const auto path = std::filesystem::temp_directory_path() / "sclmetric_distractors.csv";
    std::filesystem::remove(path);
    {
        std::ofstream(path) << "subject_id,subclass,sample_index,f0\n5,N,0,1\n6,I,0,1\n";
    }
    EXPECT_THROW(load_distractors(path), DataError);
    {
        std::ofstream(path, std::ios::trunc) << "subject_id,subclass,sample_index,f0\n5,N,0,1\n6,N,0,2\n";
    }
    EXPECT_EQ(load_distractors(path).size(), 2u);
    std::filesystem::remove(path);
}

TEST(Split, SeventyThirty) {
    const Dataset ds = subjects_with(10, 1, 1);
    const auto tt = subject_split(ds, SplitSpec{}, 0);
    EXPECT_EQ(tt.train.subject_count(), 7u);
    EXPECT_EQ(tt.test.subject_count(), 3u);
}

TEST(Split, PartitionPropertyAndDeterminism) {
    const Dataset ds = subjects_with(23, 1, 1);
    SplitSpec spec;
    spec.seed = 5;
    std::set<std::vector<int>> distinct_trains;
    for (int rep = 0; rep < spec.repetitions; ++rep) {
        const auto tt = subject_split(ds, spec, rep);
        const auto again = subject_split(ds, spec, rep);
        EXPECT_EQ(tt.train, again.train);
        EXPECT_EQ(tt.test, again.test);
        auto tr = tt.train.subject_ids(), te = tt.test.subject_ids();
        EXPECT_EQ(tr.size(), 16u);  // round(0.7 * 23)
        std::vector<int> both;
        std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
        EXPECT_TRUE(both.empty());
        std::vector<int> all;
        std::set_union(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(all));
        EXPECT_EQ(all, ds.subject_ids());
        distinct_trains.insert(tr);
    }
    EXPECT_GT(distinct_trains.size(), 1u);
}

TEST(Split, ClampsToNonEmptySides) {
    const Dataset ds = subjects_with(2, 1, 1);
    SplitSpec spec;
    spec.train_fraction = 0.01;
    EXPECT_EQ(subject_split(ds, spec, 0).train.subject_count(), 1u);
    spec.train_fraction = 0.99;
    EXPECT_EQ(subject_split(ds, spec, 0).test.subject_count(), 1u);
}

TEST(Split, Errors) {
    EXPECT_THROW(subject_split(subjects_with(1, 1, 1), SplitSpec{}, 0), ProtocolError);
    EXPECT_THROW(subject_split(subjects_with(5, 1, 1), SplitSpec{}, 5), ProtocolError);
    SplitSpec bad;
    bad.train_fraction = 1.0;
    EXPECT_THROW(subject_split(subjects_with(5, 1, 1), bad, 0), ConfigError);
}

TEST(Partition, SingleImageGalleryTakesLowestIndex) {
    const Dataset ds = subjects_with(1, 3, 2);
    const auto p = gallery_probe_partition(ds, true);
    ASSERT_EQ(p.gallery.size(), 1u);
    EXPECT_EQ(p.gallery[0].sample_index, 0);
    EXPECT_EQ(p.probe.size(), 2u);
    EXPECT_TRUE(p.single_image_gallery);
}

TEST(Partition, MultiImageGalleryKeepsAllNonInjured) {
    const auto p = gallery_probe_partition(subjects_with(1, 3, 2), false);
    EXPECT_EQ(p.gallery.size(), 3u);
    for (const auto& g : p.gallery) EXPECT_EQ(g.subclass, Subclass::NonInjured);
    for (const auto& q : p.probe) EXPECT_EQ(q.subclass, Subclass::Injured);
}

TEST(Partition, SubjectWithoutInjuredIsExcluded) {
    std::vector<SubjectRecord> recs{
        {0, {sample(0, Subclass::NonInjured, 0, {0})}, {sample(0, Subclass::Injured, 0, {1})}},
        {1, {sample(1, Subclass::NonInjured, 0, {2})}, {}},
    };
    const auto p = gallery_probe_partition(Dataset(1, recs), true);
    EXPECT_EQ(p.excluded_subjects, std::vector<int>{1});
    ASSERT_EQ(p.gallery.size(), 1u);
    EXPECT_EQ(p.gallery[0].subject_id, 0);
    EXPECT_EQ(p.probe.size(), 1u);
}
