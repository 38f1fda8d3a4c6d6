#pragma once

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkt/model.hpp"

namespace dkt {

// Visualization matrix for one student: rows are the skills the student
// actually answered (sorted by id), columns are time-steps labeled with the
// observed input "(q:a)", and each cell is that skill's predicted
// correctness probability at that step.
struct HeatmapExport {
  std::vector<int> skills;                      // row labels
  std::vector<std::pair<int, int>> columns;     // (q_t, a_t) per time-step
  std::vector<std::vector<double>> cells;       // [row][t], probabilities

  std::size_t time_steps() const { return columns.size(); }
};

inline HeatmapExport make_heatmap(const PredictionTrace& trace,
                                  const InteractionSequence& seq) {
  if (trace.length() != seq.length())
    throw std::invalid_argument("make_heatmap: trace/sequence length mismatch");
  HeatmapExport h;
  const std::set<int> answered(seq.questions.begin(), seq.questions.end());
  h.skills.assign(answered.begin(), answered.end());
  for (std::size_t t = 0; t < seq.length(); ++t)
    h.columns.emplace_back(seq.questions[t], seq.answers[t]);
  h.cells.resize(h.skills.size());
  for (std::size_t r = 0; r < h.skills.size(); ++r) {
    h.cells[r].reserve(trace.length());
    for (std::size_t t = 0; t < trace.length(); ++t)
      h.cells[r].push_back(trace.outputs[t][static_cast<std::size_t>(h.skills[r])]);
  }
  return h;
}

// CSV contract: header row of "q:a" time labels, first column the skill ids,
// cells as 6-decimal fixed-point probabilities.
inline void write_heatmap_csv(const HeatmapExport& h, std::ostream& out) {
  out << "skill";
  for (const auto& [q, a] : h.columns) out << ',' << q << ':' << a;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < h.skills.size(); ++r) {
    out << h.skills[r];
    for (double v : h.cells[r]) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      out << buf;
    }
    out << '\n';
  }
}

inline HeatmapExport parse_heatmap_csv(std::istream& in) {
  HeatmapExport h;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("heatmap csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::istringstream header(line);
    std::string field;
    bool first = true;
    while (std::getline(header, field, ',')) {
      if (first) {
        first = false;
        continue;
      }
      const auto colon = field.find(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("heatmap csv: bad time label '" + field + "'");
      h.columns.emplace_back(std::stoi(field.substr(0, colon)),
                             std::stoi(field.substr(colon + 1)));
    }
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    h.skills.push_back(std::stoi(field));
    std::vector<double> cells;
    while (std::getline(row, field, ',')) cells.push_back(std::stod(field));
    if (cells.size() != h.columns.size())
      throw std::invalid_argument("heatmap csv: row width mismatch");
    h.cells.push_back(std::move(cells));
  }
  return h;
}

namespace detail {

inline std::string svg_color(double p) {
  // darker = higher probability
  const int v = static_cast<int>(std::clamp(255.0 * (1.0 - p), 0.0, 255.0));
  return "rgb(" + std::to_string(v) + "," + std::to_string(v) + "," + std::to_string(v) + ")";
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % (sizeof colors / sizeof colors[0])];
}

}  // namespace detail

// Best-effort shaded-grid rendering of the CSV matrix.
inline void write_heatmap_svg(const HeatmapExport& h, std::ostream& out) {
  const int cell = 18, left = 56, top = 44;
  const std::size_t t_len = h.time_steps();
  const int width = left + cell * static_cast<int>(t_len) + 8;
  const int height = top + cell * static_cast<int>(h.skills.size()) + 8;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t t = 0; t < t_len; ++t) {
    out << "<text x=\"" << left + cell * static_cast<int>(t) + cell / 2 << "\" y=\"" << top - 6
        << "\" font-size=\"7\" text-anchor=\"middle\" transform=\"rotate(-60 "
        << left + cell * static_cast<int>(t) + cell / 2 << " " << top - 6 << ")\">("
        << h.columns[t].first << "," << h.columns[t].second << ")</text>\n";
  }
  for (std::size_t r = 0; r < h.skills.size(); ++r) {
    out << "<text x=\"" << left - 6 << "\" y=\"" << top + cell * static_cast<int>(r) + cell - 5
        << "\" font-size=\"10\" text-anchor=\"end\">s" << h.skills[r] << "</text>\n";
    for (std::size_t t = 0; t < t_len; ++t) {
      out << "<rect x=\"" << left + cell * static_cast<int>(t) << "\" y=\""
          << top + cell * static_cast<int>(r) << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"" << detail::svg_color(h.cells[r][t]) << "\" stroke=\"#ddd\"/>\n";
    }
  }
  out << "</svg>\n";
}

// One polyline per answered skill across time, y-axis = probability in [0,1].
inline void write_lineplot_svg(const HeatmapExport& h, std::ostream& out) {
  const int plot_w = 640, plot_h = 280, left = 44, top = 16, bottom = 24;
  const std::size_t t_len = h.time_steps();
  const int width = left + plot_w + 140, height = top + plot_h + bottom;
  const double dx = t_len > 1 ? static_cast<double>(plot_w) / static_cast<double>(t_len - 1) : 0.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const int y = top + plot_h - tick * plot_h / 4;
    out << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w << "\" y2=\""
        << y << "\" stroke=\"#eee\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << y + 3
        << "\" font-size=\"9\" text-anchor=\"end\">" << 0.25 * tick << "</text>\n";
  }
  char buf[64];
  for (std::size_t r = 0; r < h.skills.size(); ++r) {
    out << "<polyline fill=\"none\" stroke=\"" << detail::palette(r)
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < t_len; ++t) {
      const double x = left + dx * static_cast<double>(t);
      const double y = top + plot_h * (1.0 - h.cells[r][t]);
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", x, y);
      out << buf;
    }
    out << "\"/>\n";
    out << "<text x=\"" << left + plot_w + 10 << "\" y=\""
        << top + 14 * static_cast<int>(r) + 10 << "\" font-size=\"10\" fill=\""
        << detail::palette(r) << "\">s" << h.skills[r] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace dkt
