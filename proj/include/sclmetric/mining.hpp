#pragma once

#include <cstdint>
#include <vector>

#include "sclmetric/dataset.hpp"

namespace sclmetric {

// Mined structures hold pointers into the source Dataset; the dataset must
// outlive them. Pointing (rather than copying) guarantees mining never invents
// samples and that an imposter set's shared injured sample is one object.

/// Y = 0 for genuine sets, Y = 1 for imposter sets.
enum class SetLabel : int { Genuine = 0, Imposter = 1 };

/// Ordered triple realizing the genuine and imposter patterns:
///   genuine  {a = N of i, b = I of i}, {b, c = another I of i}
///   imposter {a = N of i, b = I of j}, {b, c = I of i},  j != i
/// `c` is null for degenerate sets, which carry only the first pair.
struct SampleSet {
    SetLabel label = SetLabel::Genuine;
    const Sample* a = nullptr;
    const Sample* b = nullptr;
    const Sample* c = nullptr;

    bool has_c() const noexcept { return c != nullptr; }
    int y() const noexcept { return static_cast<int>(label); }
    bool operator==(const SampleSet&) const = default;
};

using GenuineSet = SampleSet;
using ImposterSet = SampleSet;

struct ContrastivePair {
    const Sample* first = nullptr;
    const Sample* second = nullptr;
    int label = 0;  // 0 genuine, 1 imposter

    bool operator==(const ContrastivePair&) const = default;
};

struct Triplet {
    const Sample* anchor = nullptr;    // NonInjured of i
    const Sample* positive = nullptr;  // Injured of i
    const Sample* negative = nullptr;  // Injured of j != i

    bool operator==(const Triplet&) const = default;
};

template <class T>
struct Mined {
    std::vector<T> items;
    std::vector<int> skipped_subjects;
};

/// For every subject with >= 1 non-injured and >= 1 injured sample, `per_subject`
/// sets with p, q, r drawn uniformly (q != r). Subjects with a single injured
/// sample yield degenerate sets (c absent).
Mined<GenuineSet> build_genuine_sets(const Dataset& ds, int per_subject, std::uint64_t seed);

/// For every subject i with a non-injured sample, `per_subject` sets whose
/// subject j is drawn uniformly among the other subjects with injured samples.
/// c is absent when i itself has no injured sample.
Mined<ImposterSet> build_imposter_sets(const Dataset& ds, int per_subject, std::uint64_t seed);

/// `per_subject` genuine (N_i, I_i) and `per_subject` imposter (N_i, I_j) pairs
/// per eligible subject.
Mined<ContrastivePair> build_cl_pairs(const Dataset& ds, int per_subject, std::uint64_t seed);

Mined<Triplet> build_triplets(const Dataset& ds, int per_subject, std::uint64_t seed);

template <class T>
struct BatchOf {
    std::vector<T> genuine;
    std::vector<T> imposter;

    std::size_t size() const noexcept { return genuine.size() + imposter.size(); }
};

using Batch = BatchOf<SampleSet>;

/// Shuffles both lists and deals them into batches of `batch_size`, half from
/// each list (the odd slot goes to the genuine side). When one list runs dry the
/// other fills the remainder; the final batch may be short.
template <class T>
std::vector<BatchOf<T>> make_batches(std::vector<T> genuine, std::vector<T> imposter,
                                     int batch_size, std::uint64_t seed);

}  // namespace sclmetric

#include "sclmetric/detail/batching.hpp"
