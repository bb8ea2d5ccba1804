#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "sclmetric/evaluation.hpp"

namespace sclmetric {

nlohmann::json to_json(const EvalReport& report, const EvalOptions& opts);
nlohmann::json to_json(const TrainLog& log);

/// rank,cmc
std::string cmc_csv(const std::vector<double>& cmc);
/// threshold,far,gar
std::string roc_csv(const std::vector<RocPoint>& roc);

/// Polyline plot of a CMC curve.
std::string cmc_svg(const std::vector<double>& cmc, const std::string& title);
/// Overlaid genuine/imposter distance histograms.
std::string score_histogram_svg(const VerificationReport& v, const std::string& title, int bins = 20);

struct ComparisonRow {
    std::string label;  // "CL", "TL", "SCL"
    EvalReport report;
};

/// Rows × "Rank k" columns, cells "mean ± std" in percent.
std::string comparison_table(const std::vector<ComparisonRow>& rows, const std::vector<std::size_t>& ranks);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sclmetric
