#pragma once

// Offline post-processing: renders the cumulative-cost-per-episode and
// frequency-per-step charts from the CSV artifacts as standalone SVG
// files. Plots are derived artifacts; the CSVs are the contract.

#include "safex/core.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace safex::plot {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // numeric columns only usage

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv column not found: " + name);
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open csv file: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(f, line) || line.empty())
    throw std::runtime_error("empty csv file: " + path);
  t.header = split_csv_line(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& fstr : fields) {
      try {
        row.push_back(std::stod(fstr));
      } catch (...) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw std::runtime_error("csv has no data rows: " + path);
  return t;
}

struct Series {
  std::vector<double> x, y;
  std::string color = "#c0392b";
  bool dashed = false;
};

inline std::string render_svg(const std::vector<Series>& series, const std::string& title,
                              const std::string& xlabel, const std::string& ylabel) {
  const double W = 640, H = 400, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  const double pad = (ymax - ymin) * 0.08 + 1e-12;
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
  // axes
  svg << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
      << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
      << "' stroke='black'/>\n";
  char buf[64];
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    std::snprintf(buf, sizeof buf, "%.4g", xv);
    svg << "<text x='" << px(xv) << "' y='" << H - mb + 18
        << "' text-anchor='middle' font-size='11'>" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.4g", yv);
    svg << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
        << "' text-anchor='end' font-size='11'>" << buf << "</text>\n";
    svg << "<line x1='" << ml - 4 << "' y1='" << py(yv) << "' x2='" << ml << "' y2='" << py(yv)
        << "' stroke='black'/>\n";
  }
  svg << "<text x='" << W / 2 << "' y='" << H - 12 << "' text-anchor='middle' font-size='12'>"
      << xlabel << "</text>\n";
  svg << "<text x='16' y='" << H / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
      << H / 2 << ")'>" << ylabel << "</text>\n";
  for (const auto& s : series) {
    svg << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5'";
    if (s.dashed) svg << " stroke-dasharray='6,4'";
    svg << " points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) svg << px(s.x[i]) << "," << py(s.y[i]) << " ";
    svg << "'/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace detail

// Reads episodes.csv and frequency.csv and writes costs.svg and
// frequency.svg into outdir. The eta reference line comes from the
// frequency CSV itself, so the charts are regenerable from the CSVs
// alone.
inline void plot_emit(const std::string& episodes_csv, const std::string& frequency_csv,
                      const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);

  {  // mean cumulative cost per episode across runs
    const auto t = detail::read_csv(episodes_csv);
    const int ce = t.column("episode");
    const int cc = t.column("cost_sum");
    std::map<int, std::pair<double, int>> acc;
    for (const auto& row : t.rows) {
      const int ep = static_cast<int>(row[static_cast<std::size_t>(ce)]);
      acc[ep].first += row[static_cast<std::size_t>(cc)];
      acc[ep].second += 1;
    }
    detail::Series mean;
    mean.color = "#c0392b";
    for (const auto& [ep, sum_count] : acc) {
      mean.x.push_back(ep);
      mean.y.push_back(sum_count.first / sum_count.second);
    }
    std::ofstream f(fs::path(outdir) / "costs.svg");
    f << detail::render_svg({mean}, "Cumulative cost per episode (mean over runs)", "episode",
                            "undiscounted cumulative cost");
  }

  {  // per-step constraint-satisfaction frequency with the eta line
    const auto t = detail::read_csv(frequency_csv);
    const int cs = t.column("step");
    const int cf = t.column("frequency");
    const int ceta = t.column("eta");
    detail::Series freq;
    freq.color = "#2c3e50";
    detail::Series eta_line;
    eta_line.color = "#c0392b";
    eta_line.dashed = true;
    for (const auto& row : t.rows) {
      freq.x.push_back(row[static_cast<std::size_t>(cs)]);
      freq.y.push_back(row[static_cast<std::size_t>(cf)]);
      eta_line.x.push_back(row[static_cast<std::size_t>(cs)]);
      eta_line.y.push_back(row[static_cast<std::size_t>(ceta)]);
    }
    std::ofstream f(fs::path(outdir) / "frequency.svg");
    f << detail::render_svg({freq, eta_line}, "Constraint satisfaction frequency per step",
                            "step", "relative frequency");
  }
}

}  // namespace safex::plot
