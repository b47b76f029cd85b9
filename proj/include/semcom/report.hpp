#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "semcom/config.hpp"
#include "semcom/pipeline.hpp"

namespace semcom {

inline constexpr const char* kCsvHeader =
    "round,stage,method,seed,snr_db,label_fraction,train_loss,test_accuracy,uplink_scalars,downlink_scalars";

namespace detail {

inline std::string fmt9(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Records ordered by (method, seed, round), ties broken by snr, label
/// fraction, stage and original position.
inline std::vector<MetricRecord> sorted_records(std::vector<MetricRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const MetricRecord& a, const MetricRecord& b) {
    return std::make_tuple(method_name(a.method), a.seed, a.round, a.snr_db, a.label_fraction,
                           static_cast<int>(a.stage)) <
           std::make_tuple(method_name(b.method), b.seed, b.round, b.snr_db, b.label_fraction,
                           static_cast<int>(b.stage));
  });
  return records;
}

inline std::string format_csv(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw contract_error("emit_csv: no records");
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : sorted_records(records)) {
    os << r.round << ',' << stage_name(r.stage) << ',' << method_name(r.method) << ',' << r.seed << ','
       << detail::fmt9(r.snr_db) << ',' << detail::fmt9(r.label_fraction) << ',' << detail::fmt9(r.train_loss)
       << ',' << detail::fmt9(r.test_accuracy) << ',' << r.uplink_scalars << ',' << r.downlink_scalars << '\n';
  }
  return os.str();
}

inline void emit_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path) {
  const std::string text = format_csv(records);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("emit_csv: cannot open " + path.string());
  f << text;
  if (!f) throw std::runtime_error("emit_csv: write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Curves

struct CurveSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (round, accuracy)
};

/// Median-over-seeds accuracy per fine-tuning round, one series per method,
/// for a single (snr, label fraction) setting.
inline std::vector<CurveSeries> median_curves(const std::vector<MetricRecord>& records, double snr_db,
                                              double label_fraction) {
  std::vector<CurveSeries> out;
  for (Method m : {Method::proposed, Method::simclr, Method::barlow, Method::supervised}) {
    std::map<std::size_t, std::vector<double>> by_round;
    for (const auto& r : records)
      if (r.method == m && r.stage == Stage::finetune && r.snr_db == snr_db && r.label_fraction == label_fraction)
        by_round[r.round].push_back(r.test_accuracy);
    if (by_round.empty()) continue;
    CurveSeries s{std::string(method_name(m)), {}};
    for (auto& [round, accs] : by_round) s.points.emplace_back(static_cast<double>(round), detail::median(accs));
    out.push_back(std::move(s));
  }
  return out;
}

struct SvgStyle {
  double width = 640;
  double panel_height = 360;
  double margin_left = 60;
  double margin_right = 140;
  double margin_top = 40;
  double margin_bottom = 50;
};

namespace detail {

inline const char* series_color(std::size_t i) {
  static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#7f7f7f", "#9467bd", "#ff7f0e"};
  return palette[i % 6];
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// One panel per title; accuracy axis fixed to [0, 1].
inline std::string format_svg(const std::vector<std::pair<std::string, std::vector<CurveSeries>>>& panels,
                              const SvgStyle& style = {}) {
  std::ostringstream os;
  const double total_h = style.panel_height * static_cast<double>(std::max<std::size_t>(1, panels.size()));
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << total_h
     << "\" viewBox=\"0 0 " << style.width << ' ' << total_h << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double plot_w = style.width - style.margin_left - style.margin_right;
  const double plot_h = style.panel_height - style.margin_top - style.margin_bottom;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& [title, series] = panels[p];
    const double top = static_cast<double>(p) * style.panel_height + style.margin_top;
    const double left = style.margin_left;
    double x_max = 1.0;
    for (const auto& s : series)
      for (const auto& pt : s.points) x_max = std::max(x_max, pt.first);
    auto px = [&](double x) { return left + plot_w * x / x_max; };
    auto py = [&](double y) { return top + plot_h * (1.0 - std::clamp(y, 0.0, 1.0)); };

    os << "<g class=\"panel\">\n";
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top - 15
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << detail::xml_escape(title)
       << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
      const double y = t / 5.0;
      os << "<line x1=\"" << left - 4 << "\" y1=\"" << py(y) << "\" x2=\"" << left << "\" y2=\"" << py(y)
         << "\" stroke=\"black\"/>\n";
      os << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fmt9(y) << "</text>\n";
    }
    for (int t = 0; t <= 4; ++t) {
      const double x = x_max * t / 4.0;
      os << "<text x=\"" << px(x) << "\" y=\"" << top + plot_h + 16
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
         << static_cast<long long>(std::llround(x)) << "</text>\n";
    }
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 36
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">communication rounds</text>\n";
    os << "<text x=\"" << left - 44 << "\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 " << left - 44
       << ' ' << top + plot_h / 2
       << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">test accuracy</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& s = series[i];
      os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << detail::series_color(i)
         << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < s.points.size(); ++k)
        os << (k ? " " : "") << detail::fmt9(px(s.points[k].first)) << ',' << detail::fmt9(py(s.points[k].second));
      os << "\"/>\n";
      const double ly = top + 14 + 18 * static_cast<double>(i);
      const double lx = left + plot_w + 12;
      os << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 20 << "\" y2=\"" << ly - 4
         << "\" stroke=\"" << detail::series_color(i) << "\" stroke-width=\"2\"/>\n";
      os << "<text class=\"legend\" x=\"" << lx + 26 << "\" y=\"" << ly
         << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(s.label) << "</text>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Accuracy-versus-round panels, one per (snr, label fraction) in the records.
inline std::string format_svg(const std::vector<MetricRecord>& records, const SvgStyle& style = {}) {
  std::vector<std::pair<double, double>> settings;
  for (const auto& r : records)
    if (r.stage == Stage::finetune) settings.emplace_back(r.snr_db, r.label_fraction);
  std::sort(settings.begin(), settings.end());
  settings.erase(std::unique(settings.begin(), settings.end()), settings.end());
  std::vector<std::pair<std::string, std::vector<CurveSeries>>> panels;
  for (auto [snr, frac] : settings) {
    std::string title = "SNR " + detail::fmt9(snr) + " dB, labels " + detail::fmt9(frac * 100.0) + "%";
    panels.emplace_back(std::move(title), median_curves(records, snr, frac));
  }
  return format_svg(panels, style);
}

inline void emit_svg(const std::vector<MetricRecord>& records, const std::filesystem::path& path,
                     const SvgStyle& style = {}) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("emit_svg: cannot open " + path.string());
  f << format_svg(records, style);
}

// ---------------------------------------------------------------------------
// Grid execution

/// Runs every cell, `threads` at a time. Each cell owns its state, so the
/// merged record list does not depend on scheduling.
inline std::vector<MetricRecord> run_grid(const ExperimentGrid& grid, unsigned threads = 1,
                                          const std::function<void(const RunConfig&)>& on_done = {}) {
  grid.validate();
  const auto cells = grid.cells();
  std::vector<std::vector<MetricRecord>> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        results[i] = run_experiment(cells[i]);
        if (on_done) {
          std::lock_guard lock(mu);
          on_done(cells[i]);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  threads = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<MetricRecord> merged;
  for (auto& r : results) merged.insert(merged.end(), r.begin(), r.end());
  return sorted_records(std::move(merged));
}

// ---------------------------------------------------------------------------
// Trend summaries over a grid

struct TrendSummary {
  double snr_db = 0.0;
  double label_fraction = 1.0;
  double supervised_final = 0.0;        // median over seeds
  double proposed_final = 0.0;          // median over seeds
  double proposed_rounds_to_target = 0; // median over seeds; +inf when never reached
  double total_rounds = 0;              // supervised fine-tuning rounds
};

/// For one setting: the target is the supervised median final accuracy; each
/// proposed seed contributes the first evaluated round reaching it.
inline TrendSummary summarize_trend(const std::vector<MetricRecord>& records, double snr_db,
                                    double label_fraction) {
  TrendSummary t;
  t.snr_db = snr_db;
  t.label_fraction = label_fraction;
  std::map<std::uint64_t, std::vector<MetricRecord>> sup, prop;
  for (const auto& r : records) {
    if (r.stage != Stage::finetune || r.snr_db != snr_db || r.label_fraction != label_fraction) continue;
    if (r.method == Method::supervised) sup[r.seed].push_back(r);
    if (r.method == Method::proposed) prop[r.seed].push_back(r);
  }
  auto by_round = [](auto& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.round < b.round; });
  };
  std::vector<double> sup_final, prop_final, reach;
  for (auto& [seed, v] : sup) {
    by_round(v);
    sup_final.push_back(v.back().test_accuracy);
    t.total_rounds = std::max(t.total_rounds, static_cast<double>(v.back().round));
  }
  t.supervised_final = detail::median(sup_final);
  for (auto& [seed, v] : prop) {
    by_round(v);
    prop_final.push_back(v.back().test_accuracy);
    double rounds = std::numeric_limits<double>::infinity();
    for (const auto& r : v)
      if (r.test_accuracy >= t.supervised_final) {
        rounds = static_cast<double>(r.round);
        break;
      }
    reach.push_back(rounds);
  }
  t.proposed_final = detail::median(prop_final);
  t.proposed_rounds_to_target = detail::median(reach);
  return t;
}

}  // namespace semcom
