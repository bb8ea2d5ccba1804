#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sclmetric/dataset.hpp"
#include "sclmetric/mining.hpp"
#include "sclmetric/model.hpp"
#include "sclmetric/training.hpp"

namespace sclmetric {

/// An embedded gallery or probe sample tagged with its subject.
struct LabeledEmbedding {
    int subject_id = 0;
    Embedding embedding;
};

std::vector<Embedding> extract_embeddings(const ModelParams& m, std::span<const Sample> samples);
std::vector<LabeledEmbedding> embed_labeled(const ModelParams& m, std::span<const Sample> samples);

/// Gallery subjects ordered by ascending Euclidean distance to the probe. A
/// subject enrolled with several images is scored by its nearest one. Equal
/// distances are broken by ascending subject_id. Ranking by squared distance
/// would give the same order.
std::vector<int> identify(Vec probe, std::span<const LabeledEmbedding> gallery);

struct RankedProbe {
    int true_subject = 0;
    std::vector<int> ranking;
};

/// values[k] = fraction of probes whose true subject sits at rank <= k+1.
struct CmcCurve {
    std::vector<double> values;
    std::size_t probe_count = 0;
    std::size_t unmatched = 0;  // probes whose subject is not enrolled
};

CmcCurve cmc_curve(std::span<const RankedProbe> rankings);

/// curve.values[k-1]; throws std::out_of_range unless 1 <= k <= gallery size.
double rank_k_accuracy(const CmcCurve& curve, std::size_t k);

struct GarAtFar {
    double target_far = 0.0;
    double achieved_far = 0.0;
    double gar = 0.0;
    double threshold = 0.0;
};

/// Distances of genuine and imposter pairs; a pair is accepted when its
/// distance is <= the threshold.
struct VerificationReport {
    std::vector<double> genuine_scores;
    std::vector<double> imposter_scores;
    std::vector<GarAtFar> gar_at_far;
};

VerificationReport verification_scores(std::span<const ContrastivePair> pairs, const ModelParams& m);

/// For each target FAR: the threshold is the largest observed score (genuine or
/// imposter) whose empirical FAR stays <= target; GAR is read off at that
/// threshold. No interpolation. If no observed score qualifies the threshold
/// sits just below the smallest imposter score.
void gar_at_far(VerificationReport& report, std::span<const double> target_fars);
GarAtFar gar_at_far(std::span<const double> genuine, std::span<const double> imposter,
                    double target_far);

struct RocPoint {
    double threshold = 0.0;
    double far = 0.0;
    double gar = 0.0;
};

/// One point per distinct observed score, ascending threshold.
std::vector<RocPoint> roc_curve(const VerificationReport& report);

/// `n_genuine` (gallery of i, probe of i) and `n_imposter` (gallery of i, probe
/// of j != i) pairs, drawn uniformly. Pairs point into `part`.
std::vector<ContrastivePair> sample_verification_pairs(const GalleryProbePartition& part,
                                                       int n_genuine, int n_imposter,
                                                       std::uint64_t seed);

/// Mean distance between every gallery embedding of subject i and every probe
/// embedding of a subject j != i, optionally after unit-L2 normalization.
double mean_inter_class_distance(std::span<const LabeledEmbedding> gallery,
                                 std::span<const LabeledEmbedding> probes, bool normalize);
double mean_inter_class_distance(const GalleryProbePartition& part, const ModelParams& m,
                                 bool normalize);

/// Appends single-image distractor subjects to the gallery; the probe set is
/// unchanged. Distractor ids must not collide with enrolled or probe subjects.
GalleryProbePartition extend_gallery(const GalleryProbePartition& part,
                                     std::span<const Sample> distractors);

// ---------------------------------------------------------------------------

struct EvalOptions {
    std::vector<std::size_t> ranks{1, 5, 10};
    std::vector<double> target_fars{0.01, 0.1};
    bool normalize = true;  // inter-class distance on unit-normalized embeddings
    int verification_genuine = 50;
    int verification_imposter = 50;
    std::vector<Sample> distractors;  // extended gallery when nonempty

    void validate() const;
};

struct IdentificationResult {
    CmcCurve cmc;
    std::vector<double> rank_accuracy;  // aligned with EvalOptions::ranks
    std::size_t gallery_subjects = 0;
};

struct SplitEvaluation {
    IdentificationResult identification;
    std::optional<IdentificationResult> extended;
    VerificationReport verification;
    double inter_class_distance = 0.0;
    double initial_inter_class_distance = 0.0;  // same statistic for the untrained model
    std::size_t probe_count = 0;
    std::vector<int> excluded_subjects;
};

/// Ranks beyond the gallery size report the full-gallery accuracy.
IdentificationResult identification_accuracy(const ModelParams& m, const GalleryProbePartition& part,
                                             std::span<const std::size_t> ranks);

/// Single-image-gallery evaluation of `m` on `test`. `initial` (may equal `m`)
/// feeds the untrained inter-class statistic.
SplitEvaluation evaluate_model(const ModelParams& m, const ModelParams& initial, const Dataset& test,
                               const EvalOptions& opts, std::uint64_t seed);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over the repetitions
};

MeanStd mean_std(std::span<const double> values);

struct EvalReport {
    std::vector<SplitEvaluation> repetitions;
    std::vector<MeanStd> rank_accuracy;           // aligned with EvalOptions::ranks
    std::vector<MeanStd> extended_rank_accuracy;  // empty without distractors
    std::vector<MeanStd> gar;                     // aligned with EvalOptions::target_fars
    MeanStd inter_class_distance;
    MeanStd initial_inter_class_distance;
    std::vector<double> mean_cmc;
    bool extended_gallery = false;
    bool normalized = true;
};

EvalReport aggregate(std::vector<SplitEvaluation> repetitions, const EvalOptions& opts);

/// For each repetition: subject split, training on the train subjects and
/// single-image-gallery evaluation on the test subjects; then mean ± std.
EvalReport repeated_evaluation(const Dataset& ds, const SplitSpec& split, const TrainConfig& train_cfg,
                               const EvalOptions& opts);

/// Seed used by repeated_evaluation for training and evaluation of one
/// repetition; exposed so a split can be reproduced piecewise.
TrainConfig repetition_train_config(const TrainConfig& cfg, int repetition);
std::uint64_t repetition_eval_seed(const SplitSpec& split, int repetition);

}  // namespace sclmetric
