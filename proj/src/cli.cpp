#include "sclmetric/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <ostream>
#include <type_traits>

#include "CLI11.hpp"

#include "sclmetric/errors.hpp"
#include "sclmetric/model.hpp"
#include "sclmetric/report.hpp"

namespace sclmetric::cli {

using nlohmann::json;

namespace {

template <class T>
struct is_vector : std::false_type {};
template <class E>
struct is_vector<std::vector<E>> : std::true_type {};

template <class T>
T convert(const json& v, const std::string& where) {
    auto fail = [&](const char* what) { return ConfigError(where + " must be " + what); };
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw fail("a boolean");
        return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw fail("a string");
        return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw fail("a number");
        return v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw fail("a non-negative integer");
        return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw fail("an integer");
        const auto x = v.get<std::int64_t>();
        if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) throw fail("in range");
        return static_cast<T>(x);
    } else {
        static_assert(is_vector<T>::value);
        if (!v.is_array()) throw fail("an array");
        T out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
        return out;
    }
}

template <class T>
void read(const json& obj, const std::string& section, const char* key, T& dst) {
    if (auto it = obj.find(key); it != obj.end()) dst = convert<T>(*it, section + "." + key);
}

const json& section(const json& doc, const char* name, std::initializer_list<const char*> allowed) {
    static const json empty = json::object();
    auto it = doc.find(name);
    if (it == doc.end()) return empty;
    if (!it->is_object()) throw ConfigError(std::string(name) + " must be an object");
    for (auto kv = it->begin(); kv != it->end(); ++kv)
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return kv.key() == a; }))
            throw ConfigError("unknown key " + std::string(name) + "." + kv.key());
    return *it;
}

SynthConfig synth_for_preset(const std::string& preset, std::uint64_t seed) {
    if (preset == "custom") return SynthConfig{};
    if (preset == "easy") return easy_preset(seed);
    if (preset == "hard") return hard_preset(seed);
    throw ConfigError("synth.preset must be custom, easy or hard");
}

TrainConfig train_for_regime(const std::string& regime) {
    if (regime == "finetune") return TrainConfig::finetune_regime();
    if (regime == "synthetic") return TrainConfig::synthetic_regime();
    throw ConfigError("train.regime must be finetune or synthetic");
}

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "sgd") return OptimizerKind::Sgd;
    throw ConfigError("train.optimizer must be adam or sgd");
}

Reduction parse_reduction(const std::string& s) {
    if (s == "sum") return Reduction::Sum;
    if (s == "mean") return Reduction::Mean;
    throw ConfigError("train.reduction must be sum or mean");
}

void apply_config(const json& doc, RunConfig& cfg) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    static constexpr const char* top[] = {"version", "seed", "synth", "split", "train", "eval", "paths"};
    for (auto kv = doc.begin(); kv != doc.end(); ++kv)
        if (std::none_of(std::begin(top), std::end(top), [&](const char* a) { return kv.key() == a; }))
            throw ConfigError("unknown key " + kv.key());
    if (!doc.contains("version")) throw ConfigError("config lacks \"version\"");
    if (const int v = convert<int>(doc["version"], "version"); v != kConfigVersion)
        throw ConfigError("unsupported config version " + std::to_string(v));
    read(doc, "", "seed", cfg.seed);

    const json& s = section(doc, "synth",
                            {"preset", "n_subjects", "dim", "n_non_injured", "n_injured", "subject_radius",
                             "sigma_n", "sigma_i", "injury_shift", "n_injury_modes"});
    read(s, "synth", "preset", cfg.synth_preset);
    cfg.synth = synth_for_preset(cfg.synth_preset, cfg.seed);
    read(s, "synth", "n_subjects", cfg.synth.n_subjects);
    read(s, "synth", "dim", cfg.synth.dim);
    read(s, "synth", "n_non_injured", cfg.synth.n_non_injured);
    read(s, "synth", "n_injured", cfg.synth.n_injured);
    read(s, "synth", "subject_radius", cfg.synth.subject_radius);
    read(s, "synth", "sigma_n", cfg.synth.sigma_n);
    read(s, "synth", "sigma_i", cfg.synth.sigma_i);
    read(s, "synth", "injury_shift", cfg.synth.injury_shift);
    read(s, "synth", "n_injury_modes", cfg.synth.n_injury_modes);

    const json& sp = section(doc, "split", {"train_fraction", "repetitions"});
    read(sp, "split", "train_fraction", cfg.split.train_fraction);
    read(sp, "split", "repetitions", cfg.split.repetitions);

    const json& t = section(doc, "train",
                            {"regime", "loss", "optimizer", "learning_rate", "epochs", "batch_size", "alpha1",
                             "alpha2", "cl_margin", "tl_margin", "per_subject", "freeze_layers", "hidden",
                             "embedding_dim", "reduction"});
    read(t, "train", "regime", cfg.train_regime);
    cfg.train = train_for_regime(cfg.train_regime);
    std::string name;
    if (t.contains("loss")) {
        read(t, "train", "loss", name);
        cfg.train.loss = parse_loss(name);
    }
    if (t.contains("optimizer")) {
        read(t, "train", "optimizer", name);
        cfg.train.optimizer = parse_optimizer(name);
    }
    if (t.contains("reduction")) {
        read(t, "train", "reduction", name);
        cfg.train.reduction = parse_reduction(name);
    }
    read(t, "train", "learning_rate", cfg.train.learning_rate);
    read(t, "train", "epochs", cfg.train.epochs);
    read(t, "train", "batch_size", cfg.train.batch_size);
    read(t, "train", "alpha1", cfg.train.scl.alpha1);
    read(t, "train", "alpha2", cfg.train.scl.alpha2);
    read(t, "train", "cl_margin", cfg.train.cl_margin);
    read(t, "train", "tl_margin", cfg.train.tl_margin);
    read(t, "train", "per_subject", cfg.train.per_subject);
    read(t, "train", "freeze_layers", cfg.train.freeze_layers);
    read(t, "train", "hidden", cfg.train.hidden);
    read(t, "train", "embedding_dim", cfg.train.embedding_dim);

    const json& e = section(doc, "eval",
                            {"ranks", "target_fars", "normalize", "verification_genuine",
                             "verification_imposter", "distractors", "extended_gallery", "svg"});
    read(e, "eval", "ranks", cfg.eval.ranks);
    read(e, "eval", "target_fars", cfg.eval.target_fars);
    read(e, "eval", "normalize", cfg.eval.normalize);
    read(e, "eval", "verification_genuine", cfg.eval.verification_genuine);
    read(e, "eval", "verification_imposter", cfg.eval.verification_imposter);
    read(e, "eval", "distractors", cfg.distractors);
    read(e, "eval", "extended_gallery", cfg.extended_gallery);
    read(e, "eval", "svg", cfg.svg);

    const json& p = section(doc, "paths", {"data", "checkpoint", "out"});
    read(p, "paths", "data", cfg.data);
    read(p, "paths", "checkpoint", cfg.checkpoint);
    if (p.contains("out")) {
        std::string out;
        read(p, "paths", "out", out);
        cfg.out = out;
    }
}

json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::uint64_t parse_seed(const std::string& text, const char* what) {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || text.empty())
        throw ConfigError(std::string(what) + " is not a non-negative integer: \"" + text + "\"");
    return v;
}

std::uint64_t default_seed() {
    const char* env = std::getenv("SCLMETRIC_SEED");
    return env ? parse_seed(env, "SCLMETRIC_SEED") : 42;
}

Dataset input_dataset(const RunConfig& cfg) {
    return cfg.data.empty() ? generate_synthetic(cfg.synth) : load_embeddings(cfg.data);
}

std::vector<Sample> distractor_samples(const RunConfig& cfg, const Dataset& ds) {
    if (!cfg.extended_gallery.empty()) return load_distractors(cfg.extended_gallery);
    if (cfg.distractors == 0) return {};
    const auto ids = ds.subject_ids();
    const int first = ids.empty() ? 0 : ids.back() + 1;
    return generate_distractors(cfg.synth, cfg.distractors, first);
}

EvalOptions eval_options(const RunConfig& cfg, const Dataset& ds) {
    EvalOptions opts = cfg.eval;
    opts.distractors = distractor_samples(cfg, ds);
    return opts;
}

void require_finite(const json& j, const std::string& where) {
    if (j.is_number_float() && !std::isfinite(j.get<double>())) throw NumericError("non-finite value at " + where);
    if (j.is_object())
        for (auto it = j.begin(); it != j.end(); ++it) require_finite(*it, where + "." + it.key());
    if (j.is_array())
        for (std::size_t i = 0; i < j.size(); ++i) require_finite(j[i], where + "[" + std::to_string(i) + "]");
}

void write_json(const std::filesystem::path& path, const json& doc) {
    require_finite(doc, path.filename().string());
    write_text(path, doc.dump(2) + "\n");
}

json report_document(const RunConfig& cfg, const char* command) {
    return {{"command", command}, {"config", to_json(cfg)}};
}

VerificationReport pooled_verification(const EvalReport& report) {
    VerificationReport v;
    for (const auto& r : report.repetitions) {
        v.genuine_scores.insert(v.genuine_scores.end(), r.verification.genuine_scores.begin(),
                                r.verification.genuine_scores.end());
        v.imposter_scores.insert(v.imposter_scores.end(), r.verification.imposter_scores.begin(),
                                 r.verification.imposter_scores.end());
    }
    return v;
}

std::vector<std::size_t> checkpoint_dims(const ModelParams& m) {
    std::vector<std::size_t> dims{m.input_dim()};
    for (const auto& l : m.layers) dims.push_back(l.out);
    return dims;
}

}  // namespace

void RunConfig::resolve() {
    synth.seed = seed;
    split.seed = seed;
    train.seed = seed;
}

void RunConfig::validate() const {
    synth.validate();
    split.validate();
    train.validate();
    eval.validate();
    if (distractors < 0) throw ConfigError("eval.distractors must be >= 0");
    if (repetition && (*repetition < 0 || *repetition >= split.repetitions))
        throw ConfigError("--repetition must lie in [0, " + std::to_string(split.repetitions) + ")");
}

RunConfig parse_run_config(const json& doc) {
    RunConfig cfg;
    apply_config(doc, cfg);
    cfg.resolve();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_config_file(path)); }

json to_json(const RunConfig& cfg) {
    const auto& s = cfg.synth;
    const auto& t = cfg.train;
    const auto& e = cfg.eval;
    return {
        {"version", kConfigVersion},
        {"seed", cfg.seed},
        {"synth",
         {{"preset", cfg.synth_preset},
          {"n_subjects", s.n_subjects},
          {"dim", s.dim},
          {"n_non_injured", s.n_non_injured},
          {"n_injured", s.n_injured},
          {"subject_radius", s.subject_radius},
          {"sigma_n", s.sigma_n},
          {"sigma_i", s.sigma_i},
          {"injury_shift", s.injury_shift},
          {"n_injury_modes", s.n_injury_modes}}},
        {"split", {{"train_fraction", cfg.split.train_fraction}, {"repetitions", cfg.split.repetitions}}},
        {"train",
         {{"regime", cfg.train_regime},
          {"loss", loss_name(t.loss)},
          {"optimizer", t.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
          {"learning_rate", t.learning_rate},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"alpha1", t.scl.alpha1},
          {"alpha2", t.scl.alpha2},
          {"cl_margin", t.cl_margin},
          {"tl_margin", t.tl_margin},
          {"per_subject", t.per_subject},
          {"freeze_layers", t.freeze_layers},
          {"hidden", t.hidden},
          {"embedding_dim", t.embedding_dim},
          {"reduction", t.reduction == Reduction::Sum ? "sum" : "mean"}}},
        {"eval",
         {{"ranks", e.ranks},
          {"target_fars", e.target_fars},
          {"normalize", e.normalize},
          {"verification_genuine", e.verification_genuine},
          {"verification_imposter", e.verification_imposter},
          {"distractors", cfg.distractors},
          {"extended_gallery", cfg.extended_gallery},
          {"svg", cfg.svg}}},
        {"paths", {{"data", cfg.data}, {"checkpoint", cfg.checkpoint}}},
    };
}

void cmd_synth(const RunConfig& cfg) {
    const Dataset ds = generate_synthetic(cfg.synth);
    std::filesystem::create_directories(cfg.out);
    save_embeddings(ds, cfg.out / "dataset.csv");
    if (cfg.distractors > 0) {
        std::vector<SubjectRecord> records;
        for (auto& d : generate_distractors(cfg.synth, cfg.distractors, cfg.synth.n_subjects))
            records.push_back({d.subject_id, {d}, {}});
        save_embeddings(Dataset(ds.dimension(), std::move(records)), cfg.out / "distractors.csv");
    }
}

void cmd_train(const RunConfig& cfg) {
    const Dataset ds = input_dataset(cfg);
    Dataset train_set = ds;
    TrainConfig tc = cfg.train;
    if (cfg.repetition) {
        train_set = subject_split(ds, cfg.split, *cfg.repetition).train;
        tc = repetition_train_config(cfg.train, *cfg.repetition);
    }
    const TrainResult result = train(train_set, tc);

    CheckpointMeta meta;
    meta.epoch = static_cast<std::uint64_t>(tc.epochs);
    meta.seed = tc.seed;
    meta.loss_name = loss_name(tc.loss);
    meta.frozen_layers = static_cast<std::uint32_t>(tc.freeze_layers);
    for (const auto& e : result.log.epochs) meta.loss_history.push_back(e.sum_loss);

    std::filesystem::create_directories(cfg.out);
    save_checkpoint(result.params, meta, cfg.out / "checkpoint.bin");
    write_text(cfg.out / "train_log.csv", result.log.to_csv());
}

void cmd_eval(const RunConfig& cfg) {
    const Dataset ds = input_dataset(cfg);
    const EvalOptions opts = eval_options(cfg, ds);
    EvalReport report;
    if (cfg.checkpoint.empty()) {
        report = repeated_evaluation(ds, cfg.split, cfg.train, opts);
    } else {
        const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
        if (ckpt.params.input_dim() != ds.dimension())
            throw DimensionError("checkpoint expects dimension " + std::to_string(ckpt.params.input_dim()) +
                                 ", dataset has " + std::to_string(ds.dimension()));
        const ModelParams initial = initial_model(checkpoint_dims(ckpt.params), ckpt.meta.seed);
        Dataset test = ds;
        std::uint64_t seed = cfg.split.seed;
        if (cfg.repetition) {
            test = subject_split(ds, cfg.split, *cfg.repetition).test;
            seed = repetition_eval_seed(cfg.split, *cfg.repetition);
        }
        report = aggregate({evaluate_model(ckpt.params, initial, test, opts, seed)}, opts);
    }

    json doc = report_document(cfg, "eval");
    doc["report"] = to_json(report, opts);
    std::filesystem::create_directories(cfg.out);
    write_json(cfg.out / "report.json", doc);
    const VerificationReport pooled = pooled_verification(report);
    write_text(cfg.out / "cmc.csv", cmc_csv(report.mean_cmc));
    write_text(cfg.out / "roc.csv", roc_csv(roc_curve(pooled)));
    if (cfg.svg) {
        write_text(cfg.out / "cmc.svg", cmc_svg(report.mean_cmc, "CMC"));
        write_text(cfg.out / "scores.svg", score_histogram_svg(pooled, "Verification distances"));
    }
}

void cmd_compare(const RunConfig& cfg) {
    const Dataset ds = input_dataset(cfg);
    const EvalOptions opts = eval_options(cfg, ds);
    std::vector<ComparisonRow> rows;
    json doc = report_document(cfg, "compare");
    doc["rows"] = json::array();
    for (auto [label, kind] : {std::pair{"CL", LossKind::Cl}, {"TL", LossKind::Tl}, {"SCL", LossKind::Scl}}) {
        TrainConfig tc = cfg.train;
        tc.loss = kind;
        rows.push_back({label, repeated_evaluation(ds, cfg.split, tc, opts)});
        doc["rows"].push_back({{"label", label}, {"loss", loss_name(kind)}, {"report", to_json(rows.back().report, opts)}});
    }
    std::filesystem::create_directories(cfg.out);
    write_json(cfg.out / "compare.json", doc);
    write_text(cfg.out / "compare.txt", comparison_table(rows, opts.ranks));
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Subclass-aware metric learning: synthesis, training and evaluation", "sclmetric"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path, seed_text, loss, extended, data, checkpoint, out_dir;
    double alpha1 = 0, alpha2 = 0, margin = 0, lr = 0;
    int epochs = 0, batch = 0, repetitions = 0, repetition = 0, distractors = 0;
    std::size_t freeze = 0;
    bool normalize = true, svg = false;

    auto* o_config = app.add_option("--config", config_path, "JSON run config");
    auto* o_seed = app.add_option("--seed", seed_text, "global seed");
    auto* o_loss = app.add_option("--loss", loss, "scl | cl | tl")->check(CLI::IsMember({"scl", "cl", "tl"}));
    auto* o_alpha1 = app.add_option("--alpha1", alpha1, "SCL margin on non-injured/injured pairs");
    auto* o_alpha2 = app.add_option("--alpha2", alpha2, "SCL margin on injured/injured pairs");
    auto* o_margin = app.add_option("--margin", margin, "CL or TL margin, per --loss");
    auto* o_lr = app.add_option("--lr", lr, "learning rate");
    auto* o_epochs = app.add_option("--epochs", epochs);
    auto* o_batch = app.add_option("--batch", batch, "sets per batch");
    auto* o_freeze = app.add_option("--freeze", freeze, "leading layers kept fixed");
    auto* o_reps = app.add_option("--repetitions", repetitions, "random subject splits");
    auto* o_rep = app.add_option("--repetition", repetition, "train/eval only this split (0-based)");
    auto* o_ext = app.add_option("--extended-gallery", extended, "distractor CSV added to the gallery");
    auto* o_dis = app.add_option("--distractors", distractors, "synthetic distractor subjects");
    auto* o_norm = app.add_flag("--normalize,!--no-normalize", normalize, "inter-class distance on unit vectors");
    auto* o_data = app.add_option("--data", data, "embedding CSV (synthesized when absent)");
    auto* o_ckpt = app.add_option("--checkpoint", checkpoint, "eval: model to evaluate");
    auto* o_out = app.add_option("--out", out_dir, "output directory");
    auto* o_svg = app.add_flag("--svg", svg, "eval: also write SVG plots");

    app.add_subcommand("synth", "write a synthetic dataset");
    app.add_subcommand("train", "train a model and write a checkpoint");
    app.add_subcommand("eval", "evaluate a checkpoint, or train and evaluate per split");
    app.add_subcommand("compare", "CL, TL and SCL under identical splits and seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kConfigFailure;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        RunConfig cfg;
        cfg.seed = default_seed();
        if (*o_config) apply_config(read_config_file(config_path), cfg);
        if (*o_seed) cfg.seed = parse_seed(seed_text, "--seed");
        if (*o_loss) cfg.train.loss = parse_loss(loss);
        if (*o_alpha1) cfg.train.scl.alpha1 = alpha1;
        if (*o_alpha2) cfg.train.scl.alpha2 = alpha2;
        if (*o_margin) {
            if (command == "compare") throw ConfigError("--margin is ambiguous for compare; set train.cl_margin/tl_margin");
            switch (cfg.train.loss) {
                case LossKind::Cl: cfg.train.cl_margin = margin; break;
                case LossKind::Tl: cfg.train.tl_margin = margin; break;
                case LossKind::Scl: throw ConfigError("--margin applies to cl and tl; use --alpha1/--alpha2 for scl");
            }
        }
        if (*o_lr) cfg.train.learning_rate = lr;
        if (*o_epochs) cfg.train.epochs = epochs;
        if (*o_batch) cfg.train.batch_size = batch;
        if (*o_freeze) cfg.train.freeze_layers = freeze;
        if (*o_reps) cfg.split.repetitions = repetitions;
        if (*o_rep) cfg.repetition = repetition;
        if (*o_ext) cfg.extended_gallery = extended;
        if (*o_dis) cfg.distractors = distractors;
        if (*o_norm) cfg.eval.normalize = normalize;
        if (*o_data) cfg.data = data;
        if (*o_ckpt) cfg.checkpoint = checkpoint;
        if (*o_out) cfg.out = out_dir;
        if (*o_svg) cfg.svg = svg;
        cfg.resolve();
        cfg.validate();

        if (command == "synth") cmd_synth(cfg);
        else if (command == "train") cmd_train(cfg);
        else if (command == "eval") cmd_eval(cfg);
        else cmd_compare(cfg);
        out << command << ": wrote " << cfg.out.string() << '\n';
        return kOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kNumericFailure;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataFailure;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kDataFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInternal;
    }
}

}  // namespace sclmetric::cli
