#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "awe/neighborhood.hpp"
#include "awe/ser.hpp"

namespace awe::report {

enum class Format { csv, plot_data };

// CSV text; column order is fixed.
std::string run_csv(const ser::RunReport& report);
std::string sweep_csv(const ser::SweepReport& report);
std::string lns_csv(const LnsReport& report);

// Across-layer aggregates of a sweep, both ways: the mean of per-layer means,
// and mean/std pooled over every (layer, seed) run.
std::string sweep_summary_csv(const ser::SweepReport& report);

// Series description for plotting: x=layer, y=mean, error=std, one series
// per (feature, fusion) or per K.
std::string sweep_series_json(const ser::SweepReport& report);
std::string lns_series_json(const LnsReport& report);

using AnyReport = std::variant<ser::RunReport, ser::SweepReport, LnsReport>;

// csv: writes `path`. plot_data: writes `path` plus `path`.series.json
// (run reports have no series and only get the CSV).
void emit_report(const AnyReport& report, Format format, const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace awe::report
