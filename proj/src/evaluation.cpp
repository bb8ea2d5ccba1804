#include "sclmetric/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "sclmetric/errors.hpp"
#include "sclmetric/losses.hpp"
#include "sclmetric/rng.hpp"

namespace sclmetric {

std::vector<Embedding> extract_embeddings(const ModelParams& m, std::span<const Sample> samples) {
    std::vector<Embedding> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(embed(m, s.embedding));
    return out;
}

std::vector<LabeledEmbedding> embed_labeled(const ModelParams& m, std::span<const Sample> samples) {
    std::vector<LabeledEmbedding> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({s.subject_id, embed(m, s.embedding)});
    return out;
}

std::vector<int> identify(Vec probe, std::span<const LabeledEmbedding> gallery) {
    if (gallery.empty()) throw DataError("identify: empty gallery");
    std::map<int, double> nearest;
    for (const auto& g : gallery) {
        const double d = euclidean(probe, g.embedding);
        auto [it, inserted] = nearest.try_emplace(g.subject_id, d);
        if (!inserted && d < it->second) it->second = d;
    }
    std::vector<std::pair<double, int>> order;
    order.reserve(nearest.size());
    for (const auto& [id, d] : nearest) order.emplace_back(d, id);
    std::sort(order.begin(), order.end());  // (distance, subject_id) lexicographic
    std::vector<int> ranking;
    ranking.reserve(order.size());
    for (const auto& [d, id] : order) ranking.push_back(id);
    return ranking;
}

CmcCurve cmc_curve(std::span<const RankedProbe> rankings) {
    CmcCurve curve;
    curve.probe_count = rankings.size();
    if (rankings.empty()) return curve;
    const std::size_t gallery = rankings.front().ranking.size();
    std::vector<std::size_t> hits_at(gallery, 0);
    for (const auto& rp : rankings) {
        if (rp.ranking.size() != gallery)
            throw DataError("cmc_curve: rankings of unequal length (gallery differs between probes)");
        auto it = std::find(rp.ranking.begin(), rp.ranking.end(), rp.true_subject);
        if (it == rp.ranking.end()) {
            ++curve.unmatched;
            continue;
        }
        ++hits_at[static_cast<std::size_t>(it - rp.ranking.begin())];
    }
    curve.values.resize(gallery);
    std::size_t cumulative = 0;
    for (std::size_t k = 0; k < gallery; ++k) {
        cumulative += hits_at[k];
        curve.values[k] = static_cast<double>(cumulative) / static_cast<double>(rankings.size());
    }
    return curve;
}

double rank_k_accuracy(const CmcCurve& curve, std::size_t k) {
    if (k < 1 || k > curve.values.size())
        throw std::out_of_range("rank " + std::to_string(k) + " outside [1, " +
                                std::to_string(curve.values.size()) + "]");
    return curve.values[k - 1];
}

VerificationReport verification_scores(std::span<const ContrastivePair> pairs, const ModelParams& m) {
    if (pairs.empty()) throw DataError("verification needs at least one pair");
    VerificationReport r;
    for (const auto& p : pairs) {
        const double d = euclidean(embed(m, p.first->embedding), embed(m, p.second->embedding));
        (p.label == 0 ? r.genuine_scores : r.imposter_scores).push_back(d);
    }
    return r;
}

namespace {

double fraction_at_or_below(const std::vector<double>& sorted, double t) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    return static_cast<double>(n) / static_cast<double>(sorted.size());
}

}  // namespace

GarAtFar gar_at_far(std::span<const double> genuine, std::span<const double> imposter,
                    double target_far) {
    if (genuine.empty() || imposter.empty()) throw DataError("GAR@FAR needs genuine and imposter scores");
    if (!(target_far > 0.0 && target_far <= 1.0)) throw ConfigError("target FAR must lie in (0, 1]");
    std::vector<double> gen(genuine.begin(), genuine.end());
    std::vector<double> imp(imposter.begin(), imposter.end());
    std::sort(gen.begin(), gen.end());
    std::sort(imp.begin(), imp.end());

    std::vector<double> grid;
    grid.reserve(gen.size() + imp.size());
    std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(grid));

    GarAtFar out;
    out.target_far = target_far;
    out.threshold = std::nextafter(imp.front(), -std::numeric_limits<double>::infinity());
    // FAR is non-decreasing in the threshold: scan from the top.
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
        if (fraction_at_or_below(imp, *it) <= target_far) {
            out.threshold = *it;
            break;
        }
    }
    out.achieved_far = fraction_at_or_below(imp, out.threshold);
    out.gar = fraction_at_or_below(gen, out.threshold);
    return out;
}

void gar_at_far(VerificationReport& report, std::span<const double> target_fars) {
    report.gar_at_far.clear();
    for (double t : target_fars)
        report.gar_at_far.push_back(gar_at_far(report.genuine_scores, report.imposter_scores, t));
}

std::vector<RocPoint> roc_curve(const VerificationReport& report) {
    std::vector<double> gen = report.genuine_scores, imp = report.imposter_scores;
    if (gen.empty() || imp.empty()) return {};
    std::sort(gen.begin(), gen.end());
    std::sort(imp.begin(), imp.end());
    std::vector<double> grid;
    std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(grid));
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    std::vector<RocPoint> out;
    out.reserve(grid.size());
    for (double t : grid) out.push_back({t, fraction_at_or_below(imp, t), fraction_at_or_below(gen, t)});
    return out;
}

std::vector<ContrastivePair> sample_verification_pairs(const GalleryProbePartition& part,
                                                       int n_genuine, int n_imposter,
                                                       std::uint64_t seed) {
    if (n_genuine < 0 || n_imposter < 0) throw ConfigError("verification pair counts must be >= 0");
    std::map<int, std::vector<const Sample*>> gallery_of;
    for (const auto& g : part.gallery) gallery_of[g.subject_id].push_back(&g);

    std::vector<const Sample*> enrolled_probes;
    for (const auto& p : part.probe)
        if (gallery_of.count(p.subject_id)) enrolled_probes.push_back(&p);

    Rng rng(seed);
    std::vector<ContrastivePair> pairs;
    if (n_genuine > 0) {
        if (enrolled_probes.empty()) throw DataError("no probe has an enrolled subject");
        for (int k = 0; k < n_genuine; ++k) {
            const Sample* probe = enrolled_probes[uniform_index(rng, enrolled_probes.size())];
            const auto& own = gallery_of[probe->subject_id];
            pairs.push_back({own[uniform_index(rng, own.size())], probe, 0});
        }
    }
    if (n_imposter > 0) {
        if (part.gallery.empty() || part.probe.empty()) throw DataError("empty gallery or probe set");
        std::set<int> ids;
        for (const auto& g : part.gallery) ids.insert(g.subject_id);
        for (const auto& p : part.probe) ids.insert(p.subject_id);
        if (ids.size() < 2) throw DataError("imposter pairs need at least two subjects");
        for (int k = 0; k < n_imposter; ++k) {
            for (;;) {
                const Sample* g = &part.gallery[uniform_index(rng, part.gallery.size())];
                const Sample* p = &part.probe[uniform_index(rng, part.probe.size())];
                if (g->subject_id == p->subject_id) continue;
                pairs.push_back({g, p, 1});
                break;
            }
        }
    }
    return pairs;
}

namespace {

Embedding unit(const Embedding& e) {
    double n2 = 0.0;
    for (double v : e) n2 += v * v;
    if (n2 == 0.0) return e;
    const double inv = 1.0 / std::sqrt(n2);
    Embedding out(e);
    for (auto& v : out) v *= inv;
    return out;
}

}  // namespace

double mean_inter_class_distance(std::span<const LabeledEmbedding> gallery,
                                 std::span<const LabeledEmbedding> probes, bool normalize) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& g : gallery) {
        const Embedding ge = normalize ? unit(g.embedding) : g.embedding;
        for (const auto& p : probes) {
            if (p.subject_id == g.subject_id) continue;
            sum += normalize ? euclidean(ge, unit(p.embedding)) : euclidean(ge, p.embedding);
            ++count;
        }
    }
    if (count == 0) throw DataError("inter-class distance needs at least two subjects");
    return sum / static_cast<double>(count);
}

double mean_inter_class_distance(const GalleryProbePartition& part, const ModelParams& m,
                                 bool normalize) {
    const auto g = embed_labeled(m, part.gallery);
    const auto p = embed_labeled(m, part.probe);
    return mean_inter_class_distance(g, p, normalize);
}

GalleryProbePartition extend_gallery(const GalleryProbePartition& part,
                                     std::span<const Sample> distractors) {
    std::set<int> taken;
    for (const auto& s : part.gallery) taken.insert(s.subject_id);
    for (const auto& s : part.probe) taken.insert(s.subject_id);
    GalleryProbePartition out = part;
    std::set<int> added;
    for (const auto& d : distractors) {
        if (d.subclass != Subclass::NonInjured)
            throw DataError("distractor " + std::to_string(d.subject_id) + " is not a non-injured sample");
        if (taken.count(d.subject_id))
            throw DataError("distractor subject_id " + std::to_string(d.subject_id) +
                            " collides with an existing subject");
        if (!added.insert(d.subject_id).second)
            throw DataError("distractor subject_id " + std::to_string(d.subject_id) + " appears twice");
        out.gallery.push_back(d);
    }
    return out;
}

// ---------------------------------------------------------------------------

void EvalOptions::validate() const {
    for (auto k : ranks)
        if (k < 1) throw ConfigError("eval.ranks must be >= 1");
    for (double f : target_fars)
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("eval.target_fars must lie in (0, 1]");
    if (verification_genuine < 1 || verification_imposter < 1)
        throw ConfigError("eval verification pair counts must be >= 1");
}

IdentificationResult identification_accuracy(const ModelParams& m, const GalleryProbePartition& part,
                                             std::span<const std::size_t> ranks) {
    const auto gallery = embed_labeled(m, part.gallery);
    std::vector<RankedProbe> ranked;
    ranked.reserve(part.probe.size());
    for (const auto& p : part.probe) ranked.push_back({p.subject_id, identify(embed(m, p.embedding), gallery)});

    IdentificationResult r;
    r.cmc = cmc_curve(ranked);
    r.gallery_subjects = r.cmc.values.size();
    for (auto k : ranks) r.rank_accuracy.push_back(rank_k_accuracy(r.cmc, std::min(k, r.gallery_subjects)));
    return r;
}

SplitEvaluation evaluate_model(const ModelParams& m, const ModelParams& initial, const Dataset& test,
                               const EvalOptions& opts, std::uint64_t seed) {
    opts.validate();
    const GalleryProbePartition part = gallery_probe_partition(test, /*single_image_gallery=*/true);
    if (part.gallery.empty() || part.probe.empty())
        throw DataError("test set has no subject with both non-injured and injured samples");

    SplitEvaluation ev;
    ev.excluded_subjects = part.excluded_subjects;
    ev.probe_count = part.probe.size();
    ev.identification = identification_accuracy(m, part, opts.ranks);
    if (!opts.distractors.empty())
        ev.extended = identification_accuracy(m, extend_gallery(part, opts.distractors), opts.ranks);

    const auto pairs =
        sample_verification_pairs(part, opts.verification_genuine, opts.verification_imposter, seed);
    ev.verification = verification_scores(pairs, m);
    gar_at_far(ev.verification, opts.target_fars);

    ev.inter_class_distance = mean_inter_class_distance(part, m, opts.normalize);
    ev.initial_inter_class_distance = mean_inter_class_distance(part, initial, opts.normalize);
    return ev;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) return {};
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

EvalReport aggregate(std::vector<SplitEvaluation> repetitions, const EvalOptions& opts) {
    EvalReport r;
    r.normalized = opts.normalize;
    r.extended_gallery = !opts.distractors.empty();
    const std::size_t n = repetitions.size();

    auto column = [&](auto&& get) {
        std::vector<double> xs;
        xs.reserve(n);
        for (const auto& ev : repetitions) xs.push_back(get(ev));
        return mean_std(xs);
    };
    for (std::size_t k = 0; k < opts.ranks.size(); ++k) {
        r.rank_accuracy.push_back(column([&](const SplitEvaluation& ev) { return ev.identification.rank_accuracy[k]; }));
        if (r.extended_gallery)
            r.extended_rank_accuracy.push_back(
                column([&](const SplitEvaluation& ev) { return ev.extended->rank_accuracy[k]; }));
    }
    for (std::size_t k = 0; k < opts.target_fars.size(); ++k)
        r.gar.push_back(column([&](const SplitEvaluation& ev) { return ev.verification.gar_at_far[k].gar; }));
    r.inter_class_distance = column([](const SplitEvaluation& ev) { return ev.inter_class_distance; });
    r.initial_inter_class_distance =
        column([](const SplitEvaluation& ev) { return ev.initial_inter_class_distance; });

    // Curves of different length (unequal test galleries) are padded with their final value.
    std::size_t len = 0;
    for (const auto& ev : repetitions) len = std::max(len, ev.identification.cmc.values.size());
    r.mean_cmc.assign(len, 0.0);
    for (const auto& ev : repetitions) {
        const auto& v = ev.identification.cmc.values;
        for (std::size_t k = 0; k < len; ++k) r.mean_cmc[k] += v.empty() ? 0.0 : v[std::min(k, v.size() - 1)];
    }
    if (n > 0)
        for (auto& v : r.mean_cmc) v /= static_cast<double>(n);
    r.repetitions = std::move(repetitions);
    return r;
}

TrainConfig repetition_train_config(const TrainConfig& cfg, int repetition) {
    TrainConfig out = cfg;
    out.seed = derive_seed(cfg.seed, 0x5200 + static_cast<std::uint64_t>(repetition));
    return out;
}

std::uint64_t repetition_eval_seed(const SplitSpec& split, int repetition) {
    return derive_seed(split.seed, 0xe7a1 + static_cast<std::uint64_t>(repetition));
}

EvalReport repeated_evaluation(const Dataset& ds, const SplitSpec& split, const TrainConfig& train_cfg,
                               const EvalOptions& opts) {
    split.validate();
    train_cfg.validate();
    opts.validate();
    std::vector<SplitEvaluation> reps;
    for (int rep = 0; rep < split.repetitions; ++rep) {
        const TrainTestSplit tt = subject_split(ds, split, rep);
        const TrainResult trained = train(tt.train, repetition_train_config(train_cfg, rep));
        reps.push_back(evaluate_model(trained.params, trained.initial, tt.test, opts,
                                      repetition_eval_seed(split, rep)));
    }
    return aggregate(std::move(reps), opts);
}

}  // namespace sclmetric
