#include "sclmetric/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "sclmetric/errors.hpp"
#include "sclmetric/rng.hpp"

namespace sclmetric {

char subclass_code(Subclass s) noexcept { return s == Subclass::NonInjured ? 'N' : 'I'; }

namespace {

bool by_index(const Sample& a, const Sample& b) { return a.sample_index < b.sample_index; }

void check_subclass(const std::vector<Sample>& samples, int subject_id, Subclass expected,
                    std::size_t dimension) {
    std::set<int> seen;
    for (const auto& s : samples) {
        if (s.subject_id != subject_id)
            throw DataError("sample of subject " + std::to_string(s.subject_id) +
                            " stored under subject " + std::to_string(subject_id));
        if (s.subclass != expected)
            throw DataError("subject " + std::to_string(subject_id) +
                            ": sample stored under the wrong subclass");
        if (s.sample_index < 0)
            throw DataError("negative sample_index in subject " + std::to_string(subject_id));
        if (!seen.insert(s.sample_index).second)
            throw DataError("duplicate sample (" + std::to_string(subject_id) + "," +
                            subclass_code(expected) + "," + std::to_string(s.sample_index) + ")");
        if (s.embedding.size() != dimension)
            throw DimensionError("subject " + std::to_string(subject_id) + ": embedding of length " +
                                 std::to_string(s.embedding.size()) + ", expected " +
                                 std::to_string(dimension));
        for (double v : s.embedding)
            if (!std::isfinite(v))
                throw DataError("non-finite embedding entry in subject " +
                                std::to_string(subject_id));
    }
}

}  // namespace

Dataset::Dataset(std::size_t dimension, std::vector<SubjectRecord> subjects)
    : dimension_(dimension), subjects_(std::move(subjects)) {
    if (dimension_ == 0) throw DataError("dataset dimension must be positive");
    std::sort(subjects_.begin(), subjects_.end(),
              [](const SubjectRecord& a, const SubjectRecord& b) { return a.subject_id < b.subject_id; });
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        auto& rec = subjects_[i];
        if (rec.subject_id < 0) throw DataError("negative subject_id");
        if (i > 0 && subjects_[i - 1].subject_id == rec.subject_id)
            throw DataError("duplicate subject_id " + std::to_string(rec.subject_id));
        std::sort(rec.non_injured.begin(), rec.non_injured.end(), by_index);
        std::sort(rec.injured.begin(), rec.injured.end(), by_index);
        check_subclass(rec.non_injured, rec.subject_id, Subclass::NonInjured, dimension_);
        check_subclass(rec.injured, rec.subject_id, Subclass::Injured, dimension_);
    }
}

std::size_t Dataset::non_injured_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : subjects_) n += s.non_injured.size();
    return n;
}

std::size_t Dataset::injured_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : subjects_) n += s.injured.size();
    return n;
}

std::vector<int> Dataset::subject_ids() const {
    std::vector<int> ids;
    ids.reserve(subjects_.size());
    for (const auto& s : subjects_) ids.push_back(s.subject_id);
    return ids;
}

const SubjectRecord* Dataset::find(int subject_id) const {
    auto it = std::lower_bound(subjects_.begin(), subjects_.end(), subject_id,
                               [](const SubjectRecord& r, int id) { return r.subject_id < id; });
    if (it == subjects_.end() || it->subject_id != subject_id) return nullptr;
    return &*it;
}

Dataset Dataset::select(std::span<const int> ids) const {
    std::vector<SubjectRecord> picked;
    picked.reserve(ids.size());
    for (int id : ids) {
        const SubjectRecord* rec = find(id);
        if (!rec) throw DataError("unknown subject_id " + std::to_string(id));
        picked.push_back(*rec);
    }
    return Dataset(dimension_, std::move(picked));
}

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
    if (n_subjects < 1) throw ConfigError("synth.n_subjects must be >= 1");
    if (dim < 1) throw ConfigError("synth.dim must be >= 1");
    if (n_non_injured < 1) throw ConfigError("synth.n_non_injured must be >= 1");
    if (n_injured < 1) throw ConfigError("synth.n_injured must be >= 1");
    if (n_injury_modes < 1) throw ConfigError("synth.n_injury_modes must be >= 1");
    auto non_negative = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("synth.") + name + " must be finite and >= 0");
    };
    non_negative(subject_radius, "subject_radius");
    non_negative(sigma_n, "sigma_n");
    non_negative(sigma_i, "sigma_i");
    non_negative(injury_shift, "injury_shift");
}

namespace {

Embedding random_unit(Rng& rng, int dim) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Embedding u(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (auto& v : u) {
            v = gauss(rng);
            norm2 += v * v;
        }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : u) v *= inv;
    return u;
}

Embedding perturbed(const Embedding& center, double sigma, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Embedding x = center;
    for (auto& v : x) v += sigma * gauss(rng);
    return x;
}

constexpr std::uint64_t kStreamModes = 1;
constexpr std::uint64_t kStreamSubjects = 2;
constexpr std::uint64_t kStreamDistractors = 3;

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng mode_rng(derive_seed(cfg.seed, kStreamModes));
    std::vector<Embedding> modes;
    for (int k = 0; k < cfg.n_injury_modes; ++k) modes.push_back(random_unit(mode_rng, cfg.dim));

    Rng rng(derive_seed(cfg.seed, kStreamSubjects));
    std::vector<SubjectRecord> subjects;
    subjects.reserve(static_cast<std::size_t>(cfg.n_subjects));
    for (int id = 0; id < cfg.n_subjects; ++id) {
        SubjectRecord rec;
        rec.subject_id = id;
        Embedding mean = random_unit(rng, cfg.dim);
        for (auto& v : mean) v *= cfg.subject_radius;
        for (int p = 0; p < cfg.n_non_injured; ++p)
            rec.non_injured.push_back({id, Subclass::NonInjured, p, perturbed(mean, cfg.sigma_n, rng)});
        for (int q = 0; q < cfg.n_injured; ++q) {
            const Embedding& dir = modes[static_cast<std::size_t>(q % cfg.n_injury_modes)];
            Embedding shifted = mean;
            for (std::size_t k = 0; k < shifted.size(); ++k) shifted[k] += cfg.injury_shift * dir[k];
            rec.injured.push_back({id, Subclass::Injured, q, perturbed(shifted, cfg.sigma_i, rng)});
        }
        subjects.push_back(std::move(rec));
    }
    return Dataset(static_cast<std::size_t>(cfg.dim), std::move(subjects));
}

std::vector<Sample> generate_distractors(const SynthConfig& cfg, int count, int first_id) {
    cfg.validate();
    if (count < 0) throw ConfigError("distractor count must be >= 0");
    if (first_id < 0) throw ConfigError("distractor ids must be >= 0");
    Rng rng(derive_seed(cfg.seed, kStreamDistractors));
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        Embedding mean = random_unit(rng, cfg.dim);
        for (auto& v : mean) v *= cfg.subject_radius;
        out.push_back({first_id + k, Subclass::NonInjured, 0, perturbed(mean, cfg.sigma_n, rng)});
    }
    return out;
}

SynthConfig easy_preset(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_subjects = 10;
    cfg.dim = 16;
    cfg.n_non_injured = 4;
    cfg.n_injured = 4;
    cfg.subject_radius = 3.0;
    cfg.sigma_n = 0.1;
    cfg.sigma_i = 0.1;
    cfg.injury_shift = 2.0;
    cfg.n_injury_modes = 1;
    cfg.seed = seed;
    return cfg;
}

SynthConfig hard_preset(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_subjects = 30;
    cfg.dim = 16;
    cfg.n_non_injured = 4;
    cfg.n_injured = 6;
    cfg.subject_radius = 1.5;
    cfg.sigma_n = 0.1;
    cfg.sigma_i = 0.3;
    cfg.injury_shift = 3.0;
    cfg.n_injury_modes = 3;
    cfg.seed = seed;
    return cfg;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

template <class T>
T parse_number(std::string_view field, const char* what, std::size_t line) {
    T value{};
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc{} || ptr != last)
        throw ParseError(std::string("malformed ") + what + " '" + std::string(field) + "'", line);
    return value;
}

void append_double(std::string& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

}  // namespace

Dataset parse_embeddings(const std::string& text) {
    std::vector<std::string_view> lines;
    {
        std::string_view rest(text);
        while (!rest.empty()) {
            const std::size_t nl = rest.find('\n');
            if (nl == std::string_view::npos) {
                lines.push_back(rest);
                break;
            }
            lines.push_back(rest.substr(0, nl));
            rest.remove_prefix(nl + 1);
        }
    }
    if (lines.empty()) throw ParseError("missing header", 1);

    const auto header = split_fields(lines[0]);
    if (header.size() < 4 || header[0] != "subject_id" || header[1] != "subclass" ||
        header[2] != "sample_index")
        throw ParseError("header must be subject_id,subclass,sample_index,f0,...", 1);
    const std::size_t dim = header.size() - 3;
    for (std::size_t k = 0; k < dim; ++k)
        if (header[3 + k] != "f" + std::to_string(k))
            throw ParseError("header column " + std::to_string(3 + k) + " must be f" +
                                 std::to_string(k),
                             1);

    std::vector<SubjectRecord> subjects;
    std::map<int, std::size_t> slot_of;
    std::set<std::tuple<int, char, int>> keys;

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t line_no = li + 1;
        const std::string_view line = lines[li];
        if (line.empty()) throw ParseError("empty row", line_no);
        if (line.back() == '\r') throw ParseError("CR line ending", line_no);
        const auto fields = split_fields(line);
        if (fields.size() != dim + 3)
            throw ParseError("row has " + std::to_string(fields.size() - 3) +
                                 " features, header declares " + std::to_string(dim),
                             line_no);
        const int subject = parse_number<int>(fields[0], "subject_id", line_no);
        if (subject < 0) throw ParseError("negative subject_id", line_no);
        if (fields[1] != "N" && fields[1] != "I")
            throw ParseError("subclass must be N or I, got '" + std::string(fields[1]) + "'", line_no);
        const Subclass sc = fields[1] == "N" ? Subclass::NonInjured : Subclass::Injured;
        const int index = parse_number<int>(fields[2], "sample_index", line_no);
        if (index < 0) throw ParseError("negative sample_index", line_no);
        if (!keys.emplace(subject, fields[1][0], index).second)
            throw ParseError("duplicate (subject_id, subclass, sample_index)", line_no);

        Embedding e(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            e[k] = parse_number<double>(fields[3 + k], "feature", line_no);
            if (!std::isfinite(e[k])) throw ParseError("non-finite feature", line_no);
        }

        auto [slot, inserted] = slot_of.try_emplace(subject, subjects.size());
        if (inserted) subjects.push_back(SubjectRecord{subject, {}, {}});
        SubjectRecord* rec = &subjects[slot->second];
        Sample s{subject, sc, index, std::move(e)};
        (sc == Subclass::NonInjured ? rec->non_injured : rec->injured).push_back(std::move(s));
    }
    return Dataset(dim, std::move(subjects));
}

Dataset load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_embeddings(buf.str());
}

std::string format_embeddings(const Dataset& ds) {
    std::string out = "subject_id,subclass,sample_index";
    for (std::size_t k = 0; k < ds.dimension(); ++k) out += ",f" + std::to_string(k);
    out += '\n';
    auto emit = [&](const Sample& s) {
        out += std::to_string(s.subject_id);
        out += ',';
        out += subclass_code(s.subclass);
        out += ',';
        out += std::to_string(s.sample_index);
        for (double v : s.embedding) {
            out += ',';
            append_double(out, v);
        }
        out += '\n';
    };
    for (const auto& rec : ds.subjects()) {
        for (const auto& s : rec.non_injured) emit(s);
        for (const auto& s : rec.injured) emit(s);
    }
    return out;
}

void save_embeddings(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    const std::string text = format_embeddings(ds);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<Sample> load_distractors(const std::filesystem::path& path) {
    const Dataset ds = load_embeddings(path);
    std::vector<Sample> out;
    for (const auto& rec : ds.subjects()) {
        if (!rec.injured.empty())
            throw DataError("distractor file " + path.string() + " contains injured samples");
        out.insert(out.end(), rec.non_injured.begin(), rec.non_injured.end());
    }
    return out;
}

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split.train_fraction must lie in (0, 1)");
    if (repetitions < 1) throw ConfigError("split.repetitions must be >= 1");
}

TrainTestSplit subject_split(const Dataset& ds, const SplitSpec& spec, int repetition) {
    spec.validate();
    if (ds.subject_count() < 2) throw ProtocolError("subject split needs at least 2 subjects");
    if (repetition < 0 || repetition >= spec.repetitions)
        throw ProtocolError("repetition " + std::to_string(repetition) + " outside [0, " +
                            std::to_string(spec.repetitions) + ")");
    const auto total = static_cast<long>(ds.subject_count());
    long n_train = std::lround(spec.train_fraction * static_cast<double>(total));
    n_train = std::clamp(n_train, 1L, total - 1);

    std::vector<int> ids = ds.subject_ids();
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(repetition)));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::span<const int> all(ids);
    return {ds.select(all.first(static_cast<std::size_t>(n_train))),
            ds.select(all.subspan(static_cast<std::size_t>(n_train)))};
}

GalleryProbePartition gallery_probe_partition(const Dataset& ds, bool single_image_gallery) {
    GalleryProbePartition part;
    part.single_image_gallery = single_image_gallery;
    for (const auto& rec : ds.subjects()) {
        if (rec.non_injured.empty() || rec.injured.empty()) {
            part.excluded_subjects.push_back(rec.subject_id);
            continue;
        }
        if (single_image_gallery)
            part.gallery.push_back(rec.non_injured.front());  // lowest sample_index
        else
            part.gallery.insert(part.gallery.end(), rec.non_injured.begin(), rec.non_injured.end());
        part.probe.insert(part.probe.end(), rec.injured.begin(), rec.injured.end());
    }
    return part;
}

}  // namespace sclmetric
