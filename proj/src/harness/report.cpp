#include "nams/harness/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "nams/common/error.hpp"
#include "nams/core/population.hpp"
#include "nams/features/features.hpp"

namespace nams::harness {

namespace fs = std::filesystem;

std::string Csv::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::size_t Csv::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InvalidArgument("csv has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      csv.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != csv.header.size()) throw ConfigError("csv row has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(csv.header.size()));
      csv.rows.push_back(std::move(cells));
    }
  }
  return csv;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Csv read_csv(const fs::path& path) { return parse_csv(read_text(path)); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Csv accuracy_csv(const std::vector<AccuracyRow>& rows) {
  Csv c{{"experiment", "trial", "method", "family", "target_idx", "top1", "top3", "top10"}, {}};
  for (const auto& r : rows) {
    c.rows.push_back({r.experiment, std::to_string(r.trial), r.method, r.family, std::to_string(r.target), fmt(r.top1),
                      fmt(r.top3), fmt(r.top10)});
  }
  return c;
}

Csv iou_csv(const std::vector<IoURow>& rows) {
  Csv c{{"strategy", "seed", "iou", "n_tiles", "sim_calls"}, {}};
  for (const auto& r : rows) {
    c.rows.push_back({r.strategy, std::to_string(r.seed), fmt(r.iou), std::to_string(r.n_tiles), std::to_string(r.sim_calls)});
  }
  return c;
}

Csv ms2_trace_csv(const std::vector<baselines::Ms2Diagnostics>& trace) {
  Csv c{{"iter", "est_kl_score_mean", "sim_calls_cum", "mode_flat", "mode_sloped", "mode_prob_flat", "mode_prob_sloped"},
        {}};
  for (const auto& d : trace) {
    c.rows.push_back({std::to_string(d.iteration), fmt(d.score_mean), std::to_string(d.sim_calls),
                      std::to_string(d.mode_flat), std::to_string(d.mode_sloped), fmt(d.mode_prob_flat),
                      fmt(d.mode_prob_sloped)});
  }
  return c;
}

Csv nams_train_csv(const core::NamsTrainReport& report) {
  Csv c{{"epoch", "train_total", "train_predict", "train_decode", "train_kld", "val_total", "val_predict", "val_decode",
         "val_kld"},
        {}};
  for (std::size_t e = 0; e < report.train.size(); ++e) {
    const auto& t = report.train[e];
    core::LossTerms v = e < report.validation.size() ? report.validation[e] : core::LossTerms{};
    c.rows.push_back({std::to_string(e), fmt(t.total), fmt(t.predict), fmt(t.decode), fmt(t.kld), fmt(v.total),
                      fmt(v.predict), fmt(v.decode), fmt(v.kld)});
  }
  return c;
}

Csv dr_train_csv(const baselines::DrTrainReport& report) {
  Csv c{{"epoch", "train_loss", "val_loss"}, {}};
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    const double v = e < report.validation_loss.size() ? report.validation_loss[e] : 0.0;
    c.rows.push_back({std::to_string(e), fmt(report.train_loss[e]), fmt(v)});
  }
  return c;
}

Csv e4_csv(const Accounting& a, int max_domains) {
  Csv c{{"n_domains", "nams_sim_calls", "dr_sim_calls", "ms2_sim_calls"}, {}};
  for (int n = 1; n <= max_domains; ++n) {
    const auto nd = static_cast<std::uint64_t>(n);
    c.rows.push_back({std::to_string(n), std::to_string(a.nams_fixed + nd * a.nams_per_domain),
                      std::to_string(a.nams_fixed + nd * a.dr_per_domain), std::to_string(nd * a.ms2_per_domain)});
  }
  return c;
}

nlohmann::json accounting_json(const Accounting& a) {
  return {{"domains", a.domains},
          {"nams_fixed_sim_calls", a.nams_fixed},
          {"nams_infer_per_domain", a.nams_per_domain},
          {"dr_infer_per_domain", a.dr_per_domain},
          {"ms2_per_domain", a.ms2_per_domain},
          {"configured_fixed_sim_calls", a.configured_fixed},
          {"configured_ms2_per_domain", a.configured_ms2},
          {"crossover_domains", a.crossover},
          {"configured_crossover_domains", a.configured_crossover}};
}

namespace {

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1"};

std::string esc(const std::string& s) {
  std::string o;
  for (char ch : s) {
    if (ch == '<') o += "&lt;";
    else if (ch == '>') o += "&gt;";
    else if (ch == '&') o += "&amp;";
    else o += ch;
  }
  return o;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string footer(const Csv& csv) {
  // "--" may not appear inside an XML comment.
  std::string data = csv.str();
  for (std::size_t p = data.find("--"); p != std::string::npos; p = data.find("--", p)) data.replace(p, 2, "- -");
  return "<!-- svg format v" + std::to_string(kSvgFormatVersion) + "; source data:\n" + data + "-->\n</svg>\n";
}

template <class T>
void add_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace

std::string svg_bar_chart(const Csv& csv, const BarChartSpec& spec) {
  const std::size_t gc = csv.column(spec.group_col);
  const std::size_t vc = csv.column(spec.value_col);
  const bool has_series = !spec.series_col.empty();
  const std::size_t sc = has_series ? csv.column(spec.series_col) : 0;
  const bool has_filter = !spec.filter_col.empty();
  const std::size_t fc = has_filter ? csv.column(spec.filter_col) : 0;

  std::vector<std::string> groups, series;
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  for (const auto& r : csv.rows) {
    if (has_filter && r[fc] != spec.filter_value) continue;
    const std::string s = has_series ? r[sc] : spec.value_col;
    add_unique(groups, r[gc]);
    add_unique(series, s);
    auto& a = acc[{r[gc], s}];
    a.first += std::stod(r[vc]);
    a.second += 1;
  }

  const int w = 640, h = 360, left = 60, right = 20, top = 40, bottom = 60;
  const double plot_w = w - left - right, plot_h = h - top - bottom;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(spec.title) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = top + plot_h * (1.0 - k / 4.0);
    o << "<line x1=\"" << left << "\" x2=\"" << w - right << "\" y1=\"" << num(y) << "\" y2=\"" << num(y)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << num(spec.y_max * k / 4.0)
      << "</text>\n";
  }
  if (!groups.empty()) {
    const double gw = plot_w / static_cast<double>(groups.size());
    const double bw = gw * 0.8 / static_cast<double>(series.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (std::size_t s = 0; s < series.size(); ++s) {
        auto it = acc.find({groups[g], series[s]});
        if (it == acc.end()) continue;
        const double v = std::clamp(it->second.first / it->second.second / spec.y_max, 0.0, 1.0);
        const double x = left + g * gw + gw * 0.1 + s * bw;
        o << "<rect x=\"" << num(x) << "\" y=\"" << num(top + plot_h * (1 - v)) << "\" width=\"" << num(bw)
          << "\" height=\"" << num(plot_h * v) << "\" fill=\"" << kPalette[s % 7] << "\"/>\n";
      }
      o << "<text x=\"" << num(left + (g + 0.5) * gw) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">"
        << esc(groups[g]) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double x = left + 10 + s * 110.0;
      o << "<rect x=\"" << num(x) << "\" y=\"" << h - 24 << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % 7]
        << "\"/><text x=\"" << num(x + 14) << "\" y=\"" << h - 15 << "\">" << esc(series[s]) << "</text>\n";
    }
  }
  o << footer(csv);
  return o.str();
}

std::string svg_line_chart(const Csv& csv, const std::string& title, const std::string& x_col,
                           const std::vector<std::string>& y_cols) {
  const std::size_t xc = csv.column(x_col);
  std::vector<std::size_t> ycs;
  for (const auto& y : y_cols) ycs.push_back(csv.column(y));
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& r : csv.rows) {
    const double x = std::stod(r[xc]);
    if (first) xmin = xmax = x;
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    for (auto yc : ycs) {
      const double y = std::stod(r[yc]);
      if (first) ymin = ymax = y;
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
      first = false;
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const int w = 640, h = 360, left = 70, right = 20, top = 40, bottom = 60;
  const double plot_w = w - left - right, plot_h = h - top - bottom;
  auto px = [&](double x) { return left + plot_w * (x - xmin) / (xmax - xmin); };
  auto py = [&](double y) { return top + plot_h * (1 - (y - ymin) / (ymax - ymin)); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << num(plot_w) << "\" height=\"" << num(plot_h)
    << "\" fill=\"none\" stroke=\"#999\"/>\n";
  o << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << esc(fmt(ymax)) << "</text>\n";
  o << "<text x=\"" << left - 6 << "\" y=\"" << num(top + plot_h) << "\" text-anchor=\"end\">" << esc(fmt(ymin))
    << "</text>\n";
  o << "<text x=\"" << left << "\" y=\"" << num(top + plot_h + 14) << "\">" << esc(fmt(xmin)) << "</text>\n";
  o << "<text x=\"" << w - right << "\" y=\"" << num(top + plot_h + 14) << "\" text-anchor=\"end\">" << esc(fmt(xmax))
    << "</text>\n";
  for (std::size_t s = 0; s < ycs.size(); ++s) {
    o << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 7] << "\" points=\"";
    for (const auto& r : csv.rows) o << num(px(std::stod(r[xc]))) << ',' << num(py(std::stod(r[ycs[s]]))) << ' ';
    o << "\"/>\n";
    const double lx = left + 10 + s * 150.0;
    o << "<rect x=\"" << num(lx) << "\" y=\"" << h - 24 << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % 7]
      << "\"/><text x=\"" << num(lx + 14) << "\" y=\"" << h - 15 << "\">" << esc(y_cols[s]) << "</text>\n";
  }
  o << footer(csv);
  return o.str();
}

nlohmann::json provenance(const std::string& command, const ExperimentConfig& config,
                          const std::vector<std::uint64_t>& seeds) {
  return {{"command", command},
          {"profile", config.profile},
          {"config_hash", config.hash()},
          {"config", config.to_json()},
          {"seeds", seeds},
          {"format_versions",
           {{"config", ExperimentConfig::kVersion},
            {"csv", kCsvFormatVersion},
            {"svg", kSvgFormatVersion},
            {"features", features::kFeatureFormatVersion},
            {"parameters", ad::ModelParameters::kFormatVersion}}}};
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

struct ChartRule {
  const char* csv;
  const char* svg;
  enum { Bar, Line } kind;
  BarChartSpec bar;
  const char* x_col;
  std::vector<std::string> y_cols;
};

std::vector<ChartRule> chart_rules() {
  return {
      {"e1_accuracy.csv", "e1_accuracy.svg", ChartRule::Bar,
       {"E1 top-1 accuracy by family (mean over trials)", "method", "family", "top1", "", "", 1.0}, "", {}},
      {"e2_accuracy.csv", "e2_accuracy.svg", ChartRule::Bar,
       {"E2 top-3 nearest accuracy by family (mean over trials)", "method", "family", "top3", "", "", 1.0}, "", {}},
      {"downstream_iou.csv", "downstream_iou.svg", ChartRule::Bar,
       {"Proxy building IoU by strategy (mean over seeds)", "strategy", "", "iou", "", "", 1.0}, "", {}},
      {"e4_accounting.csv", "e4_accounting.svg", ChartRule::Line, {}, "n_domains",
       {"nams_sim_calls", "ms2_sim_calls"}},
      {"nams_train.csv", "nams_train.svg", ChartRule::Line, {}, "epoch", {"train_predict", "val_predict"}},
      {"dr_train.csv", "dr_train.svg", ChartRule::Line, {}, "epoch", {"train_loss", "val_loss"}},
      {"ms2_trace.csv", "ms2_trace.svg", ChartRule::Line, {}, "iter", {"mode_prob_flat", "mode_prob_sloped"}},
  };
}

}  // namespace

nlohmann::json regenerate_report(const fs::path& dir) {
  nlohmann::json summary{{"charts", nlohmann::json::array()}};
  for (const auto& rule : chart_rules()) {
    const fs::path src = dir / rule.csv;
    if (!fs::exists(src)) continue;
    const Csv csv = read_csv(src);
    const std::string svg = rule.kind == ChartRule::Bar
                                ? svg_bar_chart(csv, rule.bar)
                                : svg_line_chart(csv, rule.csv, rule.x_col, rule.y_cols);
    write_text(dir / rule.svg, svg);
    summary["charts"].push_back(rule.svg);
  }
  for (const char* name : {"e1_accuracy.csv", "e2_accuracy.csv"}) {
    if (!fs::exists(dir / name)) continue;
    const Csv csv = read_csv(dir / name);
    const auto mc = csv.column("method"), fc = csv.column("family");
    std::map<std::string, std::array<double, 4>> agg;  // top1, top3, top10, count
    for (const auto& r : csv.rows) {
      auto& a = agg[r[mc] + "/" + r[fc]];
      a[0] += std::stod(r[csv.column("top1")]);
      a[1] += std::stod(r[csv.column("top3")]);
      a[2] += std::stod(r[csv.column("top10")]);
      a[3] += 1;
    }
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, a] : agg) m[k] = {{"top1", fmt(a[0] / a[3])}, {"top3", fmt(a[1] / a[3])}, {"top10", fmt(a[2] / a[3])}};
    summary[std::string(name).substr(0, 2)] = m;
  }
  if (fs::exists(dir / "downstream_iou.csv")) {
    const Csv csv = read_csv(dir / "downstream_iou.csv");
    std::vector<IoURow> rows;
    for (const auto& r : csv.rows) rows.push_back({r[0], std::stoi(r[1]), std::stod(r[2]), 0, 0});
    nlohmann::json m = nlohmann::json::object();
    for (const auto& s : summarize_iou(rows)) m[s.strategy] = {{"mean", fmt(s.mean)}, {"stderr", fmt(s.stderr_)}};
    summary["downstream"] = m;
  }
  return summary;
}

}  // namespace nams::harness
