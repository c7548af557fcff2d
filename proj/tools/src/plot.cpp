#include "plot.hpp"

#include "pipeline.hpp"

#include "jcl/grid.hpp"
#include "jcl/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jcl::app {

namespace fs = std::filesystem;

namespace {

constexpr double kW = 640, kH = 420, kL = 70, kR = 20, kT = 40, kB = 50;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); }
  double py(double y) const { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    double pad = std::abs(lo) > 0 ? 0.05 * std::abs(lo) : 1.0;
    lo -= pad;
    hi += pad;
  }
}

std::string header(const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
     << kW << " " << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kW / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << escape(title) << "</text>\n";
  return os.str();
}

std::string axes(const std::string& xlabel, const std::string& ylabel, const std::string& xlo,
                 const std::string& xhi, const std::string& ylo, const std::string& yhi) {
  std::ostringstream os;
  os << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << num(kL) << "\" y=\"" << num(kT) << "\" width=\""
     << num(kW - kL - kR) << "\" height=\"" << num(kH - kT - kB) << "\"/></g>\n"
     << "<g font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<text x=\"" << num(kL) << "\" y=\"" << num(kH - kB + 15) << "\">" << escape(xlo) << "</text>\n"
     << "<text x=\"" << num(kW - kR) << "\" y=\"" << num(kH - kB + 15) << "\" text-anchor=\"end\">" << escape(xhi)
     << "</text>\n"
     << "<text x=\"" << num(kL - 5) << "\" y=\"" << num(kH - kB) << "\" text-anchor=\"end\">" << escape(ylo)
     << "</text>\n"
     << "<text x=\"" << num(kL - 5) << "\" y=\"" << num(kT + 10) << "\" text-anchor=\"end\">" << escape(yhi)
     << "</text>\n"
     << "<text x=\"" << num((kL + kW - kR) / 2) << "\" y=\"" << num(kH - 12) << "\" text-anchor=\"middle\">"
     << escape(xlabel) << "</text>\n"
     << "<text x=\"16\" y=\"" << num((kT + kH - kB) / 2) << "\" transform=\"rotate(-90 16 " << num((kT + kH - kB) / 2)
     << ")\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n</g>\n";
  return os.str();
}

std::string polyline(const Frame& f, const std::vector<double>& x, const std::vector<double>& y) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.6\" points=\"";
  bool first = true;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
    os << (first ? "" : " ") << num(f.px(x[i])) << "," << num(f.py(y[i]));
    first = false;
  }
  os << "\"/>\n";
  for (size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
    os << "<circle cx=\"" << num(f.px(x[i])) << "\" cy=\"" << num(f.py(y[i])) << "\" r=\"2.5\" fill=\"#1f5fa8\"/>\n";
  }
  return os.str();
}

std::pair<double, double> finite_range(const std::vector<double>& v) {
  double lo = INFINITY, hi = -INFINITY;
  for (double a : v)
    if (std::isfinite(a)) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return {lo, hi};
}

// Blue to yellow through teal.
std::string color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double stops[3][3] = {{48, 18, 120}, {33, 145, 140}, {250, 230, 35}};
  double u = t * 2;
  int k = std::min(1, static_cast<int>(u));
  u -= k;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[k][0] + u * (stops[k + 1][0] - stops[k][0]))),
                static_cast<int>(std::lround(stops[k][1] + u * (stops[k + 1][1] - stops[k][1]))),
                static_cast<int>(std::lround(stops[k][2] + u * (stops[k + 1][2] - stops[k][2]))));
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string line_svg(const std::string& title, const Series& s, const std::string& xlabel, const std::string& ylabel) {
  auto [x0, x1] = finite_range(s.x);
  auto [y0, y1] = finite_range(s.y);
  widen(x0, x1);
  widen(y0, y1);
  Frame f{x0, x1, y0, y1};
  return header(title) + axes(xlabel, ylabel, fmt3(x0), fmt3(x1), fmt3(y0), fmt3(y1)) + polyline(f, s.x, s.y) +
         "</svg>\n";
}

std::string loglog_svg(const std::string& title, const Series& s) {
  std::vector<double> lx, ly;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
    if (!(s.x[i] > 0) || !(s.y[i] > 0)) continue;
    lx.push_back(std::log10(s.x[i]));
    ly.push_back(std::log10(s.y[i]));
    sx += lx.back();
    sy += ly.back();
    sxx += lx.back() * lx.back();
    sxy += lx.back() * ly.back();
  }
  const double n = static_cast<double>(lx.size());
  double slope = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : NAN;
  auto [x0, x1] = finite_range(lx);
  auto [y0, y1] = finite_range(ly);
  widen(x0, x1);
  widen(y0, y1);
  Frame f{x0, x1, y0, y1};
  char note[64];
  std::snprintf(note, sizeof note, "slope %.2f", slope);
  std::ostringstream os;
  os << header(title) << axes("log10 h", "log10 " + s.name, fmt3(x0), fmt3(x1), fmt3(y0), fmt3(y1))
     << polyline(f, lx, ly) << "<text x=\"" << num(kL + 10) << "\" y=\"" << num(kT + 20)
     << "\" font-family=\"sans-serif\" font-size=\"13\" class=\"slope\">" << note << "</text>\n</svg>\n";
  return os.str();
}

std::string heatmap_svg(const std::string& title, const Series& s, const GridMeta& meta) {
  Shape shape = meta.shape == "disc" ? Shape::Disc : Shape::HalfDisc;
  GridGeometry G(shape, meta.r, meta.h);
  auto [v0, v1] = finite_range(s.y);
  widen(v0, v1);
  const double lo_t = shape == Shape::Disc ? -meta.r : 0.0;
  const double side = std::min(kW - kL - kR - 60, kH - kT - kB);
  const double scale = side / std::max(2 * meta.r, meta.r - lo_t);
  const double cell = std::max(scale * meta.h, 0.5);
  std::ostringstream os;
  os << header(title);
  for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
    int n = static_cast<int>(s.x[i]);
    if (n < 0 || n >= G.size() || !std::isfinite(s.y[i])) continue;
    double cx = kL + (G.s(n) + meta.r) * scale;
    double cy = kT + (meta.r - G.t(n)) * scale;
    os << "<rect x=\"" << num(cx - cell / 2) << "\" y=\"" << num(cy - cell / 2) << "\" width=\"" << num(cell)
       << "\" height=\"" << num(cell) << "\" fill=\"" << color((s.y[i] - v0) / (v1 - v0)) << "\"/>\n";
  }
  // Colour bar.
  const double bx = kL + side + 20;
  for (int k = 0; k < 32; ++k)
    os << "<rect x=\"" << num(bx) << "\" y=\"" << num(kT + side * (31 - k) / 32.0) << "\" width=\"14\" height=\""
       << num(side / 32.0 + 0.5) << "\" fill=\"" << color(k / 31.0) << "\"/>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\"><text x=\"" << num(bx + 18) << "\" y=\"" << num(kT + 10)
     << "\">" << fmt3(v1) << "</text><text x=\"" << num(bx + 18) << "\" y=\"" << num(kT + side) << "\">" << fmt3(v0)
     << "</text></g>\n</svg>\n";
  return os.str();
}

std::vector<fs::path> plot_reports(const fs::path& dir) {
  fs::path rep_dir = dir / "reports";
  std::vector<fs::path> files;
  if (fs::is_directory(rep_dir))
    for (const auto& e : fs::directory_iterator(rep_dir))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  if (files.empty()) throw Error(ErrorKind::MissingReport, "no reports under " + rep_dir.string());
  std::sort(files.begin(), files.end());

  std::vector<fs::path> written;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentReport r = from_json(ss.str());
    const std::string stem = file.stem().string();
    for (const auto& s : r.series) {
      std::string svg;
      if (s.name == "residual_vs_h") {
        svg = loglog_svg(r.name + ": " + s.name, s);
      } else if (s.name == "B_norm" && r.has_grid) {
        svg = heatmap_svg(r.name + ": |B|", s, r.grid);
      } else if (s.name == "GF") {
        svg = line_svg(r.name + ": G(tau) F(tau)", s, "tau", "G F");
      } else if (s.name.rfind("hbar", 0) == 0) {
        svg = line_svg(r.name + ": " + s.name, s, "k", "hbar");
      } else {
        svg = line_svg(r.name + ": " + s.name, s, "x", s.name);
      }
      fs::path out = dir / "plots" / (stem + "_" + s.name + ".svg");
      write_atomic(out, svg);
      written.push_back(out);
    }
  }
  return written;
}

}  // namespace jcl::app
