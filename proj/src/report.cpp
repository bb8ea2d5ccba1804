#include "sclmetric/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sclmetric/errors.hpp"

namespace sclmetric {

using nlohmann::json;

namespace {

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

json ranked_json(const std::vector<std::size_t>& ranks, const std::vector<MeanStd>& values) {
    json out = json::array();
    for (std::size_t k = 0; k < values.size(); ++k)
        out.push_back({{"rank", ranks[k]}, {"mean", values[k].mean}, {"std", values[k].std}});
    return out;
}

json repetition_json(const SplitEvaluation& ev, const EvalOptions& opts) {
    json r;
    r["gallery_subjects"] = ev.identification.gallery_subjects;
    r["probe_count"] = ev.probe_count;
    r["excluded_subjects"] = ev.excluded_subjects;
    r["unmatched_probes"] = ev.identification.cmc.unmatched;
    json acc = json::array();
    for (std::size_t k = 0; k < opts.ranks.size(); ++k)
        acc.push_back({{"rank", opts.ranks[k]}, {"accuracy", ev.identification.rank_accuracy[k]}});
    r["rank_accuracy"] = acc;
    r["cmc"] = ev.identification.cmc.values;
    if (ev.extended) {
        json ext = json::array();
        for (std::size_t k = 0; k < opts.ranks.size(); ++k)
            ext.push_back({{"rank", opts.ranks[k]}, {"accuracy", ev.extended->rank_accuracy[k]}});
        r["extended_gallery_subjects"] = ev.extended->gallery_subjects;
        r["extended_rank_accuracy"] = ext;
    }
    json gar = json::array();
    for (const auto& g : ev.verification.gar_at_far)
        gar.push_back({{"target_far", g.target_far},
                       {"achieved_far", g.achieved_far},
                       {"gar", g.gar},
                       {"threshold", g.threshold}});
    r["gar_at_far"] = gar;
    r["genuine_pairs"] = ev.verification.genuine_scores.size();
    r["imposter_pairs"] = ev.verification.imposter_scores.size();
    r["inter_class_distance"] = ev.inter_class_distance;
    r["initial_inter_class_distance"] = ev.initial_inter_class_distance;
    return r;
}

}  // namespace

json to_json(const EvalReport& report, const EvalOptions& opts) {
    json j;
    j["repetition_count"] = report.repetitions.size();
    j["extended_gallery"] = report.extended_gallery;
    j["normalized_distances"] = report.normalized;
    j["ranks"] = opts.ranks;
    j["rank_accuracy"] = ranked_json(opts.ranks, report.rank_accuracy);
    if (report.extended_gallery)
        j["extended_rank_accuracy"] = ranked_json(opts.ranks, report.extended_rank_accuracy);
    json gar = json::array();
    for (std::size_t k = 0; k < report.gar.size(); ++k)
        gar.push_back({{"target_far", opts.target_fars[k]}, {"mean", report.gar[k].mean}, {"std", report.gar[k].std}});
    j["gar_at_far"] = gar;
    j["inter_class_distance"] = mean_std_json(report.inter_class_distance);
    j["initial_inter_class_distance"] = mean_std_json(report.initial_inter_class_distance);
    j["mean_cmc"] = report.mean_cmc;
    json reps = json::array();
    for (const auto& ev : report.repetitions) reps.push_back(repetition_json(ev, opts));
    j["repetitions"] = reps;
    return j;
}

json to_json(const TrainLog& log) {
    json out = json::array();
    for (const auto& e : log.epochs)
        out.push_back({{"epoch", e.epoch},
                       {"sum_loss", e.sum_loss},
                       {"mean_genuine", e.mean_genuine},
                       {"mean_imposter", e.mean_imposter}});
    return out;
}

std::string cmc_csv(const std::vector<double>& cmc) {
    std::ostringstream out;
    out.precision(17);
    out << "rank,cmc\n";
    for (std::size_t k = 0; k < cmc.size(); ++k) out << k + 1 << ',' << cmc[k] << '\n';
    return out.str();
}

std::string roc_csv(const std::vector<RocPoint>& roc) {
    std::ostringstream out;
    out.precision(17);
    out << "threshold,far,gar\n";
    for (const auto& p : roc) out << p.threshold << ',' << p.far << ',' << p.gar << '\n';
    return out.str();
}

namespace {

constexpr double kWidth = 480, kHeight = 320, kLeft = 50, kRight = 20, kTop = 30, kBottom = 40;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string svg_open(const std::string& title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
                    fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"18\" text-anchor=\"middle\">" + title + "</text>\n";
    s += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(kWidth - kLeft - kRight) +
         "\" height=\"" + fmt(kHeight - kTop - kBottom) + "\" fill=\"none\" stroke=\"black\"/>\n";
    return s;
}

double px(double x01) { return kLeft + x01 * (kWidth - kLeft - kRight); }
double py(double y01) { return kHeight - kBottom - y01 * (kHeight - kTop - kBottom); }

}  // namespace

std::string cmc_svg(const std::vector<double>& cmc, const std::string& title) {
    std::string s = svg_open(title);
    const double n = static_cast<double>(std::max<std::size_t>(cmc.size(), 2) - 1);
    std::string pts;
    for (std::size_t k = 0; k < cmc.size(); ++k)
        pts += fmt(px(cmc.size() == 1 ? 0.0 : static_cast<double>(k) / n)) + "," + fmt(py(cmc[k])) + " ";
    s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"" + fmt(kHeight - 8) + "\" text-anchor=\"middle\">rank (1.." +
         std::to_string(cmc.size()) + ")</text>\n";
    s += "<text x=\"12\" y=\"" + fmt(kHeight / 2) + "\" transform=\"rotate(-90 12 " + fmt(kHeight / 2) +
         ")\" text-anchor=\"middle\">identification rate</text>\n";
    s += "</svg>\n";
    return s;
}

std::string score_histogram_svg(const VerificationReport& v, const std::string& title, int bins) {
    std::string s = svg_open(title);
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto* scores : {&v.genuine_scores, &v.imposter_scores})
        for (double x : *scores) {
            lo = first ? x : std::min(lo, x);
            hi = first ? x : std::max(hi, x);
            first = false;
        }
    if (hi <= lo) hi = lo + 1.0;
    auto histogram = [&](const std::vector<double>& xs) {
        std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
        for (double x : xs) {
            auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * bins);
            h[std::min(b, h.size() - 1)] += 1.0;
        }
        for (auto& c : h) c /= xs.empty() ? 1.0 : static_cast<double>(xs.size());
        return h;
    };
    const auto hg = histogram(v.genuine_scores);
    const auto hi_ = histogram(v.imposter_scores);
    double peak = 1e-12;
    for (double c : hg) peak = std::max(peak, c);
    for (double c : hi_) peak = std::max(peak, c);
    auto steps = [&](const std::vector<double>& h, const char* colour) {
        std::string pts;
        for (std::size_t b = 0; b < h.size(); ++b) {
            const double x0 = static_cast<double>(b) / bins, x1 = static_cast<double>(b + 1) / bins;
            pts += fmt(px(x0)) + "," + fmt(py(h[b] / peak)) + " " + fmt(px(x1)) + "," + fmt(py(h[b] / peak)) + " ";
        }
        return "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"2\" points=\"" + pts +
               "\"/>\n";
    };
    s += steps(hg, "#2ca02c");
    s += steps(hi_, "#d62728");
    s += "<text x=\"" + fmt(kLeft + 8) + "\" y=\"" + fmt(kTop + 14) + "\" fill=\"#2ca02c\">genuine</text>\n";
    s += "<text x=\"" + fmt(kLeft + 8) + "\" y=\"" + fmt(kTop + 28) + "\" fill=\"#d62728\">imposter</text>\n";
    s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"" + fmt(kHeight - 8) + "\" text-anchor=\"middle\">distance " +
         fmt(lo) + " .. " + fmt(hi) + "</text>\n";
    s += "</svg>\n";
    return s;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows, const std::vector<std::size_t>& ranks) {
    std::ostringstream out;
    char cell[64];
    std::snprintf(cell, sizeof(cell), "%-6s", "");
    out << cell;
    for (auto k : ranks) {
        std::snprintf(cell, sizeof(cell), " | %-15s", ("Rank " + std::to_string(k)).c_str());
        out << cell;
    }
    out << '\n';
    for (const auto& row : rows) {
        std::snprintf(cell, sizeof(cell), "%-6s", row.label.c_str());
        out << cell;
        for (std::size_t k = 0; k < ranks.size(); ++k) {
            const MeanStd& m = row.report.rank_accuracy[k];
            std::snprintf(cell, sizeof(cell), " | %6.2f +- %5.2f", 100.0 * m.mean, 100.0 * m.std);
            out << cell;
        }
        out << '\n';
    }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace sclmetric
