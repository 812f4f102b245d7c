#include "awe/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "awe/error.hpp"

namespace awe::report {

namespace {

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string join_wa(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ';';
    s += fixed(xs[i]);
  }
  return s;
}

std::string series_name(const ser::SweepRow& row) { return ser::to_string(row.feature) + "/" + ser::to_string(row.fusion); }

// Rounds through the same text the CSV carries so both files agree.
double rounded(double x) { return std::stod(fixed(x)); }

}  // namespace

std::string run_csv(const ser::RunReport& r) {
  std::ostringstream out;
  out << "feature,fusion,layer,fingerprint,n_runs,mean_wa,std_wa,wa_per_seed\n";
  out << ser::to_string(r.feature) << ',' << ser::to_string(r.fusion) << ',' << r.layer << ',' << r.fingerprint << ','
      << r.wa.size() << ',' << fixed(r.mean_wa) << ',' << fixed(r.std_wa) << ',' << join_wa(r.wa) << '\n';
  return out.str();
}

std::string sweep_csv(const ser::SweepReport& s) {
  std::ostringstream out;
  out << "layer,feature,fusion,mean_wa,std_wa,n_runs,wa_per_seed,status\n";
  for (const auto& row : s.rows) {
    out << row.layer << ',' << ser::to_string(row.feature) << ',' << ser::to_string(row.fusion) << ',';
    if (row.report) {
      out << fixed(row.report->mean_wa) << ',' << fixed(row.report->std_wa) << ',' << row.report->wa.size() << ','
          << join_wa(row.report->wa) << ",ok\n";
    } else {
      out << ",,0,,failed\n";
    }
  }
  return out.str();
}

std::string lns_csv(const LnsReport& r) {
  std::ostringstream out;
  out << "layer,K,mean_lns,vocab_size\n";
  for (const auto& row : r.rows) out << row.layer << ',' << row.k << ',' << fixed(row.mean_lns) << ',' << row.vocab_size << '\n';
  return out.str();
}

std::string sweep_summary_csv(const ser::SweepReport& s) {
  struct Acc {
    std::vector<double> layer_means;
    std::vector<double> pooled;
    std::size_t failed = 0;
    double best = -1.0;
    std::uint32_t best_layer = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const auto& row : s.rows) {
    const auto name = series_name(row);
    if (!acc.count(name)) order.push_back(name);
    auto& a = acc[name];
    if (!row.report) {
      ++a.failed;
      continue;
    }
    a.layer_means.push_back(row.report->mean_wa);
    a.pooled.insert(a.pooled.end(), row.report->wa.begin(), row.report->wa.end());
    if (row.report->mean_wa > a.best) {
      a.best = row.report->mean_wa;
      a.best_layer = row.layer;
    }
  }
  std::ostringstream out;
  out << "feature,fusion,n_layers,failed_layers,mean_of_layer_means,pooled_mean,pooled_std,best_layer,best_mean_wa\n";
  for (const auto& name : order) {
    const auto& a = acc[name];
    const auto slash = name.find('/');
    out << name.substr(0, slash) << ',' << name.substr(slash + 1) << ',' << a.layer_means.size() << ',' << a.failed << ','
        << fixed(ser::mean_of(a.layer_means)) << ',' << fixed(ser::mean_of(a.pooled)) << ','
        << fixed(ser::population_std(a.pooled)) << ',';
    if (a.layer_means.empty())
      out << ",\n";
    else
      out << a.best_layer << ',' << fixed(a.best) << '\n';
  }
  return out.str();
}

std::string sweep_series_json(const ser::SweepReport& s) {
  std::vector<std::string> order;
  std::map<std::string, nlohmann::json> points;
  for (const auto& row : s.rows) {
    const auto name = series_name(row);
    if (!points.count(name)) {
      order.push_back(name);
      points[name] = nlohmann::json::array();
    }
    if (row.report)
      points[name].push_back({{"x", row.layer}, {"y", rounded(row.report->mean_wa)}, {"error", rounded(row.report->std_wa)}});
  }
  nlohmann::json series = nlohmann::json::array();
  for (const auto& name : order) series.push_back({{"name", name}, {"points", points[name]}});
  nlohmann::json j = {{"x", "layer"}, {"y", "mean_wa"}, {"error", "std_wa"}, {"series", series}};
  return j.dump(2) + "\n";
}

std::string lns_series_json(const LnsReport& r) {
  nlohmann::json series = nlohmann::json::array();
  for (auto k : r.ks) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& row : r.rows)
      if (row.k == k) pts.push_back({{"x", row.layer}, {"y", rounded(row.mean_lns)}});
    series.push_back({{"name", "K=" + std::to_string(k)}, {"points", pts}});
  }
  nlohmann::json j = {{"x", "layer"}, {"y", "mean_lns"}, {"error", nullptr}, {"series", series}};
  return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void emit_report(const AnyReport& report, Format format, const std::filesystem::path& path) {
  const auto series_path = std::filesystem::path(path.string() + ".series.json");
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ser::RunReport>) {
          write_text(path, run_csv(r));
        } else if constexpr (std::is_same_v<T, ser::SweepReport>) {
          write_text(path, sweep_csv(r));
          if (format == Format::plot_data) write_text(series_path, sweep_series_json(r));
        } else {
          write_text(path, lns_csv(r));
          if (format == Format::plot_data) write_text(series_path, lns_series_json(r));
        }
      },
      report);
}

}  // namespace awe::report
