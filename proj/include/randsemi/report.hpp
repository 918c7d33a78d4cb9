#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "randsemi/config.hpp"

// Result emission.  CSV is the source of truth and is byte-deterministic:
// the only run-dependent line is the timestamp, which is doubly commented so
// that stripping the leading "# " of the header block yields a valid config
// document reproducing the run.

namespace randsemi {

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_value(long v) { return std::to_string(v); }
inline std::string format_value(int v) { return std::to_string(v); }
inline std::string format_value(uint64_t v) { return std::to_string(v); }

inline std::string timestamp_utc() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct csv_table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  explicit csv_table(std::vector<std::string> cols) : columns(std::move(cols)) {}

  void add_row(std::vector<std::string> row) {
    if (row.size() != columns.size())
      throw std::logic_error("csv_table: row width does not match the header");
    rows.push_back(std::move(row));
  }
};

inline std::string csv_render(const experiment_config& cfg, const csv_table& table,
                              const std::string& timestamp) {
  std::string out;
  for (const auto& [key, value] : canonical_items(cfg)) {
    out += "# ";
    out += key;
    out += ": ";
    out += value.dump();
    out += '\n';
  }
  out += "# # generated: " + timestamp + "\n";
  for (size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += row[c];
    }
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

struct invariant_record {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline nlohmann::json summary_json(const experiment_config& cfg,
                                   const std::vector<invariant_record>& invariants,
                                   const std::vector<std::string>& artifacts,
                                   const std::string& timestamp) {
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [key, value] : canonical_items(cfg)) config[key] = value;
  nlohmann::json inv = nlohmann::json::array();
  for (const auto& r : invariants)
    inv.push_back({{"name", r.name}, {"status", r.pass ? "pass" : "fail"}, {"detail", r.detail}});
  return {{"config", config},
          {"invariants", inv},
          {"artifacts", artifacts},
          {"generated", timestamp}};
}

// Log-log convergence plot, self-contained SVG.  Points with nonpositive
// coordinates cannot be drawn on log axes and are skipped.
struct plot_series {
  std::string label;
  std::string color;
  bool dashed = false;
  std::vector<std::pair<double, double>> points;
};

namespace detail {

inline std::string svg_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

inline std::string svg_loglog(const std::string& title, const std::string& xlabel,
                              const std::string& ylabel,
                              const std::vector<plot_series>& series) {
  const double width = 640, height = 480;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = inf, xmax = -inf, ymin = inf, ymax = -inf;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      if (!(x > 0.0) || !(y > 0.0)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!(xmin <= xmax) || !(ymin <= ymax)) {
    xmin = ymin = 0.1;
    xmax = ymax = 10.0;
  }
  double lx0 = std::floor(std::log10(xmin)), lx1 = std::ceil(std::log10(xmax));
  double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
  if (lx1 - lx0 < 1.0) lx1 = lx0 + 1.0;
  if (ly1 - ly0 < 1.0) ly1 = ly0 + 1.0;
  auto px = [&](double x) { return ml + (std::log10(x) - lx0) / (lx1 - lx0) * (width - ml - mr); };
  auto py = [&](double y) {
    return height - mb - (std::log10(y) - ly0) / (ly1 - ly0) * (height - mt - mb);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
  svg += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">" + title + "</text>\n";
  svg += "<text x=\"320\" y=\"470\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">" + xlabel + "</text>\n";
  svg += "<text x=\"16\" y=\"240\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 240)\">" + ylabel + "</text>\n";

  for (double e = lx0; e <= lx1 + 0.5; e += 1.0) {
    double x = px(std::pow(10.0, e));
    svg += "<line x1=\"" + detail::svg_coord(x) + "\" y1=\"" + detail::svg_coord(mt) +
           "\" x2=\"" + detail::svg_coord(x) + "\" y2=\"" + detail::svg_coord(height - mb) +
           "\" stroke=\"#dddddd\"/>\n";
    char lbl[24];
    std::snprintf(lbl, sizeof lbl, "1e%d", static_cast<int>(e));
    svg += "<text x=\"" + detail::svg_coord(x) + "\" y=\"" + detail::svg_coord(height - mb + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + lbl +
           "</text>\n";
  }
  for (double e = ly0; e <= ly1 + 0.5; e += 1.0) {
    double y = py(std::pow(10.0, e));
    svg += "<line x1=\"" + detail::svg_coord(ml) + "\" y1=\"" + detail::svg_coord(y) +
           "\" x2=\"" + detail::svg_coord(width - mr) + "\" y2=\"" + detail::svg_coord(y) +
           "\" stroke=\"#dddddd\"/>\n";
    char lbl[24];
    std::snprintf(lbl, sizeof lbl, "1e%d", static_cast<int>(e));
    svg += "<text x=\"" + detail::svg_coord(ml - 6) + "\" y=\"" + detail::svg_coord(y + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + lbl +
           "</text>\n";
  }
  svg += "<rect x=\"" + detail::svg_coord(ml) + "\" y=\"" + detail::svg_coord(mt) + "\" width=\"" +
         detail::svg_coord(width - ml - mr) + "\" height=\"" + detail::svg_coord(height - mt - mb) +
         "\" fill=\"none\" stroke=\"black\"/>\n";

  double legend_y = mt + 14;
  for (const auto& s : series) {
    std::string pts;
    for (auto [x, y] : s.points) {
      if (!(x > 0.0) || !(y > 0.0)) continue;
      if (!pts.empty()) pts += ' ';
      pts += detail::svg_coord(px(x)) + "," + detail::svg_coord(py(y));
    }
    if (pts.empty()) continue;
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\"" + (s.dashed ? " stroke-dasharray=\"6 3\"" : "") + "/>\n";
    svg += "<line x1=\"" + detail::svg_coord(width - mr - 150) + "\" y1=\"" +
           detail::svg_coord(legend_y) + "\" x2=\"" + detail::svg_coord(width - mr - 126) +
           "\" y2=\"" + detail::svg_coord(legend_y) + "\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\"" + (s.dashed ? " stroke-dasharray=\"6 3\"" : "") + "/>\n";
    svg += "<text x=\"" + detail::svg_coord(width - mr - 120) + "\" y=\"" +
           detail::svg_coord(legend_y + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + s.label + "</text>\n";
    legend_y += 16;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace randsemi
