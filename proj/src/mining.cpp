#include "sclmetric/mining.hpp"

#include "sclmetric/errors.hpp"
#include "sclmetric/rng.hpp"

namespace sclmetric {

namespace {

void check_request(const Dataset& ds, int per_subject) {
    if (per_subject < 0) throw ConfigError("per_subject must be >= 0");
    if (ds.subject_count() == 0) throw MiningError("cannot mine from an empty dataset");
}

template <class V>
const Sample* pick(const V& samples, Rng& rng) {
    return &samples[uniform_index(rng, samples.size())];
}

/// Subjects that can serve as the "other" subject j (they own an injured sample).
std::vector<const SubjectRecord*> injured_owners(const Dataset& ds) {
    std::vector<const SubjectRecord*> out;
    for (const auto& rec : ds.subjects())
        if (!rec.injured.empty()) out.push_back(&rec);
    if (out.size() < 2)
        throw MiningError("cross-subject mining needs at least 2 subjects with injured samples");
    return out;
}

const SubjectRecord* pick_other(const std::vector<const SubjectRecord*>& owners, int subject_id,
                                Rng& rng) {
    // Draw from owners minus subject i without materializing the filtered list.
    std::size_t self = owners.size();
    for (std::size_t k = 0; k < owners.size(); ++k)
        if (owners[k]->subject_id == subject_id) self = k;
    const std::size_t n = self == owners.size() ? owners.size() : owners.size() - 1;
    std::size_t k = uniform_index(rng, n);
    if (k >= self) ++k;
    return owners[k];
}

}  // namespace

Mined<GenuineSet> build_genuine_sets(const Dataset& ds, int per_subject, std::uint64_t seed) {
    check_request(ds, per_subject);
    Rng rng(seed);
    Mined<GenuineSet> out;
    for (const auto& rec : ds.subjects()) {
        if (rec.non_injured.empty() || rec.injured.empty()) {
            out.skipped_subjects.push_back(rec.subject_id);
            continue;
        }
        for (int n = 0; n < per_subject; ++n) {
            GenuineSet s;
            s.label = SetLabel::Genuine;
            s.a = pick(rec.non_injured, rng);
            const std::size_t q = uniform_index(rng, rec.injured.size());
            s.b = &rec.injured[q];
            if (rec.injured.size() >= 2) {
                std::size_t r = uniform_index(rng, rec.injured.size() - 1);
                if (r >= q) ++r;
                s.c = &rec.injured[r];
            }
            out.items.push_back(s);
        }
    }
    return out;
}

Mined<ImposterSet> build_imposter_sets(const Dataset& ds, int per_subject, std::uint64_t seed) {
    check_request(ds, per_subject);
    const auto owners = injured_owners(ds);
    Rng rng(seed);
    Mined<ImposterSet> out;
    for (const auto& rec : ds.subjects()) {
        if (rec.non_injured.empty()) {
            out.skipped_subjects.push_back(rec.subject_id);
            continue;
        }
        for (int n = 0; n < per_subject; ++n) {
            ImposterSet s;
            s.label = SetLabel::Imposter;
            s.a = pick(rec.non_injured, rng);
            const SubjectRecord* other = pick_other(owners, rec.subject_id, rng);
            s.b = pick(other->injured, rng);
            if (!rec.injured.empty()) s.c = pick(rec.injured, rng);
            out.items.push_back(s);
        }
    }
    return out;
}

Mined<ContrastivePair> build_cl_pairs(const Dataset& ds, int per_subject, std::uint64_t seed) {
    check_request(ds, per_subject);
    Mined<ContrastivePair> out;
    if (per_subject == 0) return out;
    const auto owners = injured_owners(ds);
    Rng rng(seed);
    for (const auto& rec : ds.subjects()) {
        if (rec.non_injured.empty() || rec.injured.empty()) {
            out.skipped_subjects.push_back(rec.subject_id);
            continue;
        }
        for (int n = 0; n < per_subject; ++n)
            out.items.push_back({pick(rec.non_injured, rng), pick(rec.injured, rng), 0});
        for (int n = 0; n < per_subject; ++n) {
            const Sample* anchor = pick(rec.non_injured, rng);
            const SubjectRecord* other = pick_other(owners, rec.subject_id, rng);
            out.items.push_back({anchor, pick(other->injured, rng), 1});
        }
    }
    return out;
}

Mined<Triplet> build_triplets(const Dataset& ds, int per_subject, std::uint64_t seed) {
    check_request(ds, per_subject);
    const auto owners = injured_owners(ds);
    Rng rng(seed);
    Mined<Triplet> out;
    for (const auto& rec : ds.subjects()) {
        if (rec.non_injured.empty() || rec.injured.empty()) {
            out.skipped_subjects.push_back(rec.subject_id);
            continue;
        }
        for (int n = 0; n < per_subject; ++n) {
            Triplet t;
            t.anchor = pick(rec.non_injured, rng);
            t.positive = pick(rec.injured, rng);
            t.negative = pick(pick_other(owners, rec.subject_id, rng)->injured, rng);
            out.items.push_back(t);
        }
    }
    return out;
}

}  // namespace sclmetric
