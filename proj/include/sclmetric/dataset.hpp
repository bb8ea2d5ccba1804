#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sclmetric {

/// Fixed-dimension real feature vector. Inputs to the embedding network and its
/// outputs share this representation.
using Embedding = std::vector<double>;
using Vec = std::span<const double>;

enum class Subclass { NonInjured, Injured };

char subclass_code(Subclass s) noexcept;  // 'N' or 'I'

struct Sample {
    int subject_id = 0;
    Subclass subclass = Subclass::NonInjured;
    int sample_index = 0;
    Embedding embedding;

    bool operator==(const Sample&) const = default;
};

struct SubjectRecord {
    int subject_id = 0;
    std::vector<Sample> non_injured;
    std::vector<Sample> injured;

    bool operator==(const SubjectRecord&) const = default;
};

/// A set of subjects, each split into a non-injured and an injured subclass.
///
/// The constructor validates every invariant (unique subject ids, unique
/// (subject, subclass, index) keys, consistent dimension, finite entries) and
/// brings the data into canonical order: subjects by ascending id, samples by
/// ascending sample_index within each subclass. Two datasets holding the same
/// samples therefore compare equal regardless of construction order.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t dimension, std::vector<SubjectRecord> subjects);

    std::size_t dimension() const noexcept { return dimension_; }
    const std::vector<SubjectRecord>& subjects() const noexcept { return subjects_; }
    std::size_t subject_count() const noexcept { return subjects_.size(); }
    std::size_t non_injured_count() const noexcept;
    std::size_t injured_count() const noexcept;

    std::vector<int> subject_ids() const;
    /// Nullptr when the id is absent.
    const SubjectRecord* find(int subject_id) const;

    /// Subset holding only the given subjects (order of `ids` is irrelevant).
    Dataset select(std::span<const int> ids) const;

    bool operator==(const Dataset&) const = default;

private:
    std::size_t dimension_ = 0;
    std::vector<SubjectRecord> subjects_;
};

// ---------------------------------------------------------------------------
// Synthetic generation

struct SynthConfig {
    int n_subjects = 30;
    int dim = 16;
    int n_non_injured = 4;
    int n_injured = 4;
    double subject_radius = 3.0;
    double sigma_n = 0.1;
    double sigma_i = 0.1;
    double injury_shift = 2.0;
    int n_injury_modes = 1;
    std::uint64_t seed = 42;

    void validate() const;  // throws ConfigError
};

/// Subject means lie on a sphere of radius `subject_radius`. Non-injured samples
/// are mean + N(0, sigma_n²); injured sample k of a subject is
/// mean + injury_shift·u[k mod n_injury_modes] + N(0, sigma_i²). The mode
/// directions u are unit vectors drawn once per dataset and shared by every
/// subject, so an injury type displaces all faces the same way.
Dataset generate_synthetic(const SynthConfig& cfg);

/// Extra single-image gallery subjects (one NonInjured sample each) drawn from
/// the same subject-mean distribution as `cfg`, with ids first_id, first_id+1, ...
std::vector<Sample> generate_distractors(const SynthConfig& cfg, int count, int first_id);

/// Preset used for descent and extended-gallery checks: well separated
/// subjects, a single injury direction, tight clusters.
SynthConfig easy_preset(std::uint64_t seed);
/// Preset with heterogeneous injuries: three injury modes per subject and an
/// injured spread three times the non-injured one.
SynthConfig hard_preset(std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV ingestion
//
// Header: subject_id,subclass,sample_index,f0,...,f{d-1}
// Rows:   <int>,<N|I>,<int>,<float>...   LF line endings.

Dataset load_embeddings(const std::filesystem::path& path);
Dataset parse_embeddings(const std::string& text);
void save_embeddings(const Dataset& ds, const std::filesystem::path& path);
std::string format_embeddings(const Dataset& ds);

/// Distractor files use the same CSV layout; every row must be a NonInjured
/// sample.
std::vector<Sample> load_distractors(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Protocol

struct SplitSpec {
    std::uint64_t seed = 42;
    double train_fraction = 0.7;
    int repetitions = 5;

    void validate() const;  // throws ConfigError
};

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

/// Random subject-disjoint split. The training side receives
/// round(train_fraction·S) subjects, clamped to [1, S-1].
TrainTestSplit subject_split(const Dataset& ds, const SplitSpec& spec, int repetition);

struct GalleryProbePartition {
    std::vector<Sample> gallery;  // NonInjured only
    std::vector<Sample> probe;    // Injured only
    bool single_image_gallery = false;
    std::vector<int> excluded_subjects;  // lacked one of the subclasses
};

/// Gallery = non-injured samples (only the lowest sample_index per subject when
/// `single_image_gallery`), probe = all injured samples. Subjects missing either
/// subclass are dropped and reported in `excluded_subjects`.
GalleryProbePartition gallery_probe_partition(const Dataset& ds, bool single_image_gallery);

}  // namespace sclmetric
