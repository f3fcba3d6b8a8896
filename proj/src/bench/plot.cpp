#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "internal.hpp"

namespace zopmc::bench {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

/// One panel of line charts placed at (ox, oy) with the given size.
void draw_panel(std::ostringstream& svg, const Panel& panel, double ox,
                double oy, double width, double height) {
  const double left = 60, right = 20, top = 30, bottom = 45;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  double xmin = 1e300, xmax = -1e300, ymax = 0.0;
  for (const auto& s : panel.series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.1;
  const auto px = [&](double x) { return ox + left + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return oy + top + ph - y / ymax * ph; };

  svg << "<g class=\"panel\">\n";
  svg << "<text class=\"title\" x=\"" << ox + left + pw / 2 << "\" y=\""
      << oy + 18 << "\" text-anchor=\"middle\">" << panel.title << "</text>\n";
  svg << "<line class=\"axis\" x1=\"" << ox + left << "\" y1=\"" << oy + top + ph
      << "\" x2=\"" << ox + left + pw << "\" y2=\"" << oy + top + ph
      << "\" stroke=\"black\"/>\n";
  svg << "<line class=\"axis\" x1=\"" << ox + left << "\" y1=\"" << oy + top
      << "\" x2=\"" << ox + left << "\" y2=\"" << oy + top + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = ymax * i / 4.0;
    svg << "<text class=\"tick\" x=\"" << ox + left - 6 << "\" y=\"" << py(y) + 4
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(y) << "</text>\n";
  }
  std::vector<double> xs;
  for (const auto& s : panel.series) {
    for (const auto& p : s.points) xs.push_back(p.first);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (double x : xs) {
    svg << "<text class=\"tick\" x=\"" << px(x) << "\" y=\"" << oy + top + ph + 14
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(x) << "</text>\n";
  }
  svg << "<text class=\"xlabel\" x=\"" << ox + left + pw / 2 << "\" y=\""
      << oy + height - 8 << "\" text-anchor=\"middle\">" << panel.x_label
      << "</text>\n";
  svg << "<text class=\"ylabel\" transform=\"translate(" << ox + 14 << ","
      << oy + top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << panel.y_label << "</text>\n";

  for (std::size_t k = 0; k < panel.series.size(); ++k) {
    const Series& s = panel.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<polyline class=\"curve\" data-label=\"" << s.label
        << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : s.points) svg << px(x) << ',' << py(y) << ' ';
    svg << "\"/>\n";
    for (const auto& [x, y] : s.points) {
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }
    svg << "<text class=\"legend\" x=\"" << ox + left + 10 << "\" y=\""
        << oy + top + 14 + 14 * static_cast<double>(k) << "\" fill=\"" << color
        << "\" font-size=\"11\">" << s.label << "</text>\n";
  }
  svg << "</g>\n";
}

std::string render(const std::vector<Panel>& panels) {
  const double w = 480, h = 320;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * panels.size()
      << "\" height=\"" << h << "\" font-family=\"sans-serif\">\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    draw_panel(svg, panels[i], w * static_cast<double>(i), 0, w, h);
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Series keyed by `group` column, x = m, y = `value` column, in file order
/// of first appearance.
std::vector<Series> collect(const CsvTable& t, const std::string& group,
                            const std::string& value,
                            const std::string& filter_col = "",
                            const std::string& filter_val = "") {
  const int g = t.column(group), m = t.column("m"), v = t.column(value);
  const int f = filter_col.empty() ? -1 : t.column(filter_col);
  if (g < 0 || m < 0 || v < 0) {
    throw std::runtime_error("missing column in sweep table");
  }
  std::vector<Series> out;
  for (const auto& row : t.rows) {
    if (f >= 0 && row[f] != filter_val) continue;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const Series& s) { return s.label == row[g]; });
    if (it == out.end()) {
      out.push_back({row[g], {}});
      it = out.end() - 1;
    }
    it->points.emplace_back(std::stod(row[m]), std::stod(row[v]));
  }
  for (auto& s : out) std::sort(s.points.begin(), s.points.end());
  return out;
}

}  // namespace

int plot_results(const fs::path& dir, std::ostream& log) {
  const fs::path gains = dir / "gain_sweep.csv";
  const fs::path effs = dir / "eff_sweep.csv";
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(gains) && !fs::exists(manifest_path)) {
    log << "no results found in " << dir.string()
        << " (expected gain_sweep.csv and manifest.json)\n";
    return 1;
  }

  std::vector<std::string> absent;
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    const nlohmann::json manifest = nlohmann::json::parse(in, nullptr, false);
    if (manifest.is_discarded()) {
      log << "manifest.json is not valid JSON\n";
      return 1;
    }
    for (const auto& cell : manifest.value("cells", nlohmann::json::array())) {
      const std::string id = cell.value("id", "?");
      if (cell.value("status", "") != "ok" ||
          !fs::exists(dir / cell.value("report", "reports/" + id + ".json"))) {
        absent.push_back(id);
      }
    }
  }
  if (!fs::exists(gains)) absent.push_back("gain_sweep.csv");
  if (!absent.empty()) {
    log << "missing or failed cells:\n";
    for (const auto& id : absent) log << "  " << id << '\n';
    return 1;
  }

  try {
    const CsvTable gt = read_csv(gains);
    Panel gain_panel{"Relative improvement over RWM", "m",
                     "ESJD gain per parallel round", collect(gt, "kernel", "gain")};
    const fs::path gain_svg = dir / "gain_vs_m.svg";
    std::ofstream(gain_svg) << render({gain_panel});
    log << "wrote " << gain_svg.string() << '\n';

    if (fs::exists(effs)) {
      const CsvTable et = read_csv(effs);
      std::vector<std::string> m0s;
      const int c = et.column("m0");
      for (const auto& row : et.rows) {
        if (std::find(m0s.begin(), m0s.end(), row[c]) == m0s.end()) {
          m0s.push_back(row[c]);
        }
      }
      std::vector<Panel> panels;
      for (const auto& m0 : m0s) {
        panels.push_back({"m0 = " + m0, "m", "Eff(m) / Eff(m0)",
                          collect(et, "kernel", "eff_ratio", "m0", m0)});
      }
      const fs::path eff_svg = dir / "eff_vs_m.svg";
      std::ofstream(eff_svg) << render(panels);
      log << "wrote " << eff_svg.string() << '\n';
    }
  } catch (const std::exception& e) {
    log << "cannot read sweep tables: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace zopmc::bench
