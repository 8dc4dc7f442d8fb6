#include "panelgls/emit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace panelgls {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string summary_to_csv(const McSummary& summary) {
  std::ostringstream os;
  os << "experiment,scenario,T,estimator,metric,value,stderr,reps\n";
  for (const McCell& c : summary.cells) {
    os << summary.experiment << ',' << c.scenario << ',' << c.tOrGrade << ',' << c.estimator << ','
       << c.metric << ',' << fmt(c.value) << ',' << fmt(c.stderr_) << ',' << c.reps << '\n';
  }
  return os.str();
}

McSummary parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "experiment,scenario,T,estimator,metric,value,stderr,reps")
    throw ValidationError("parse_summary_csv: bad header");
  McSummary summary;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 8) throw ValidationError("parse_summary_csv: expected 8 fields, got line '" + line + "'");
    if (summary.experiment.empty()) summary.experiment = f[0];
    McCell c;
    c.scenario = f[1];
    c.tOrGrade = std::stoi(f[2]);
    c.estimator = f[3];
    c.metric = f[4];
    c.value = std::stod(f[5]);
    c.stderr_ = std::stod(f[6]);
    c.reps = std::stoi(f[7]);
    summary.cells.push_back(std::move(c));
  }
  return summary;
}

namespace {

struct Series {
  std::string label;
  std::string estimator;
  std::vector<std::pair<double, double>> pts;  // (x, y), x = T or grade
};

struct Panel {
  std::string title;
  std::vector<Series> series;
};

// Marker follows the figures: plus for OLS/means, open circle for the known-R
// mixed model, x for feasible GLS.
void draw_marker(std::ostringstream& os, const std::string& estimator, double x, double y) {
  const char* color = "#1a1a1a";
  if (estimator == "OLS") {
    os << "<path d='M" << x - 4 << ' ' << y << " H" << x + 4 << " M" << x << ' ' << y - 4 << " V"
       << y + 4 << "' stroke='" << color << "' fill='none'/>\n";
  } else if (estimator == "GLS-known") {
    os << "<circle cx='" << x << "' cy='" << y << "' r='3.5' stroke='" << color << "' fill='none'/>\n";
  } else if (estimator == "GLS-feasible") {
    os << "<path d='M" << x - 3.5 << ' ' << y - 3.5 << " L" << x + 3.5 << ' ' << y + 3.5 << " M"
       << x - 3.5 << ' ' << y + 3.5 << " L" << x + 3.5 << ' ' << y - 3.5 << "' stroke='" << color
       << "' fill='none'/>\n";
  } else if (estimator == "FE") {
    os << "<path d='M" << x << ' ' << y - 4 << " L" << x + 4 << ' ' << y + 3.5 << " L" << x - 4
       << ' ' << y + 3.5 << " Z' stroke='" << color << "' fill='none'/>\n";
  } else {  // class-means and anything else
    os << "<rect x='" << x - 3 << "' y='" << y - 3 << "' width='6' height='6' stroke='" << color
       << "' fill='none'/>\n";
  }
}

const char* dash_for(const std::string& estimator) {
  if (estimator == "OLS") return "6,3";
  if (estimator == "class-means") return "2,3";
  if (estimator == "GLS-feasible") return "8,3,2,3";
  return "";  // solid
}

}  // namespace

std::string summary_to_svg(const McSummary& summary) {
  // Group cells into panels and series.
  std::map<std::string, Panel> panels;
  std::vector<std::string> panelOrder;
  const bool ex3 = summary.experiment == "example3";
  for (const McCell& c : summary.cells) {
    std::string panelKey = c.scenario;
    std::string seriesKey = c.estimator;
    if (ex3) {
      const std::size_t slash = c.scenario.find('/');
      if (slash != std::string::npos) {
        panelKey = c.scenario.substr(slash + 1);  // "a0.3"
        seriesKey = c.estimator + " " + c.scenario.substr(0, slash);
      }
    }
    auto it = panels.find(panelKey);
    if (it == panels.end()) {
      panelOrder.push_back(panelKey);
      it = panels.emplace(panelKey, Panel{}).first;
      it->second.title = ex3 ? "alpha = " + panelKey.substr(1)
                             : (summary.experiment.find("diagnostics") != std::string::npos
                                    ? panelKey
                                    : "scenario " + panelKey);
    }
    Panel& panel = it->second;
    auto sit = std::find_if(panel.series.begin(), panel.series.end(),
                            [&](const Series& s) { return s.label == seriesKey + "/" + c.metric; });
    if (sit == panel.series.end()) {
      Series s;
      s.label = seriesKey + "/" + c.metric;
      s.estimator = c.estimator;
      panel.series.push_back(std::move(s));
      sit = panel.series.end() - 1;
    }
    sit->pts.emplace_back(double(c.tOrGrade), c.value);
  }

  const double W = 380, H = 300;
  const double mL = 52, mR = 14, mB = 40, mT = 28;
  const int perRow = std::min<int>(2, std::max<int>(1, static_cast<int>(panelOrder.size())));
  const int nRows = panelOrder.empty() ? 1 : (static_cast<int>(panelOrder.size()) + perRow - 1) / perRow;
  const double legendH = 26;
  const double figW = W * perRow;
  const double figH = H * nRows + legendH;

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' version='1.1' width='" << figW << "' height='"
     << figH << "' font-family='sans-serif' font-size='11'>\n";
  os << "<rect width='" << figW << "' height='" << figH << "' fill='white'/>\n";

  std::vector<std::string> legendEst;
  for (int p = 0; p < static_cast<int>(panelOrder.size()); ++p) {
    const Panel& panel = panels[panelOrder[p]];
    const double ox = (p % perRow) * W;
    const double oy = (p / perRow) * H;

    double xmin = 1e300, xmax = -1e300, ymax = 0.0;
    for (const Series& s : panel.series)
      for (auto [x, y] : s.pts) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymax = std::max(ymax, y);
      }
    if (panel.series.empty()) {
      xmin = 0;
      xmax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax <= 0) ymax = 1;
    ymax *= 1.08;

    auto sx = [&](double x) { return ox + mL + (x - xmin) / (xmax - xmin) * (W - mL - mR); };
    auto sy = [&](double y) { return oy + (H - mB) - y / ymax * (H - mB - mT); };

    os << "<text x='" << ox + W / 2 << "' y='" << oy + 16 << "' text-anchor='middle'>"
       << panel.title << "</text>\n";
    os << "<path d='M" << ox + mL << ' ' << oy + mT << " V" << oy + H - mB << " H" << ox + W - mR
       << "' stroke='black' fill='none'/>\n";

    // 4 y ticks, x ticks at data values
    for (int tick = 0; tick <= 4; ++tick) {
      const double yv = ymax / 1.08 * tick / 4.0;
      os << "<line x1='" << ox + mL - 3 << "' y1='" << sy(yv) << "' x2='" << ox + mL << "' y2='"
         << sy(yv) << "' stroke='black'/>\n";
      os << "<text x='" << ox + mL - 6 << "' y='" << sy(yv) + 4 << "' text-anchor='end'>"
         << fmt_short(std::round(yv * 1000.0) / 1000.0) << "</text>\n";
    }
    std::vector<double> xticks;
    for (const Series& s : panel.series)
      for (auto [x, y] : s.pts)
        if (std::find(xticks.begin(), xticks.end(), x) == xticks.end()) xticks.push_back(x);
    std::sort(xticks.begin(), xticks.end());
    for (double xv : xticks) {
      os << "<line x1='" << sx(xv) << "' y1='" << oy + H - mB << "' x2='" << sx(xv) << "' y2='"
         << oy + H - mB + 3 << "' stroke='black'/>\n";
      os << "<text x='" << sx(xv) << "' y='" << oy + H - mB + 15 << "' text-anchor='middle'>"
         << fmt_short(xv) << "</text>\n";
    }
    os << "<text x='" << ox + W / 2 << "' y='" << oy + H - 8 << "' text-anchor='middle'>"
       << (ex3 ? "grade" : "T") << "</text>\n";

    for (const Series& s : panel.series) {
      std::vector<std::pair<double, double>> pts = s.pts;
      std::sort(pts.begin(), pts.end());
      os << "<polyline fill='none' stroke='#1a1a1a' stroke-width='1'";
      const char* dash = dash_for(s.estimator);
      if (*dash) os << " stroke-dasharray='" << dash << "'";
      os << " points='";
      for (auto [x, y] : pts) os << sx(x) << ',' << sy(y) << ' ';
      os << "'/>\n";
      for (auto [x, y] : pts) draw_marker(os, s.estimator, sx(x), sy(y));
      if (std::find(legendEst.begin(), legendEst.end(), s.estimator) == legendEst.end() &&
          !s.estimator.empty())
        legendEst.push_back(s.estimator);
    }
  }

  double lx = 16;
  const double ly = H * nRows + legendH / 2 + 4;
  for (const std::string& est : legendEst) {
    draw_marker(os, est, lx, ly - 4);
    os << "<text x='" << lx + 10 << "' y='" << ly << "'>" << est << "</text>\n";
    lx += 24 + 7.0 * est.size() + 16;
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::string> emit_outputs(const McSummary& summary, const std::string& outputDir,
                                      const EmitOptions& opts) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(outputDir, ec);
  if (ec || !fs::is_directory(outputDir))
    throw ValidationError("emit_outputs: cannot create output directory " + outputDir);

  std::vector<std::string> written;
  auto write_file = [&](const std::string& name, const std::string& content) {
    const std::string path = (fs::path(outputDir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("emit_outputs: cannot write " + path);
    f << content;
    if (!f) throw ValidationError("emit_outputs: write failed for " + path);
    written.push_back(path);
  };
  if (opts.csv) write_file(summary.experiment + "_summary.csv", summary_to_csv(summary));
  if (opts.svg) write_file(summary.experiment + "_fig.svg", summary_to_svg(summary));
  return written;
}

}  // namespace panelgls
