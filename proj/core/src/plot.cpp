#include "pbo/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace pbo {
namespace {

struct Series {
  std::map<int, std::vector<double>> by_index;  // query index -> log10 regrets
};

constexpr const char* kColors[] = {"#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6d597a", "#00798c"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string regret_plot_svg(const std::vector<CsvRow>& rows) {
  if (rows.empty()) throw InvalidArgument("plot: no rows");
  std::map<std::string, Series> series;
  for (const auto& r : rows)
    series[r.problem + " " + r.algo + " q=" + std::to_string(r.q)].by_index[r.query_index].push_back(r.log10_regret);

  struct Curve {
    std::string label;
    std::vector<int> x;
    std::vector<double> mean, half;
  };
  std::vector<Curve> curves;
  double ymin = 1e300, ymax = -1e300;
  int xmax = 1;
  for (const auto& [label, s] : series) {
    Curve c{label, {}, {}, {}};
    for (const auto& [i, vals] : s.by_index) {
      const double n = static_cast<double>(vals.size());
      double m = 0.0;
      for (double v : vals) m += v;
      m /= n;
      double var = 0.0;
      if (vals.size() > 1) {
        for (double v : vals) var += (v - m) * (v - m);
        var /= n - 1.0;
      }
      const double h = 1.96 * std::sqrt(var) / std::sqrt(n);
      c.x.push_back(i);
      c.mean.push_back(m);
      c.half.push_back(h);
      ymin = std::min(ymin, m - h);
      ymax = std::max(ymax, m + h);
      xmax = std::max(xmax, i);
    }
    curves.push_back(std::move(c));
  }
  if (ymax - ymin < 1e-9) {
    ymin -= 0.5;
    ymax += 0.5;
  }

  constexpr double W = 720, H = 440, L = 70, R = 200, T = 30, B = 50;
  auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
  auto py = [&](double y) { return T + (H - T - B) * (ymax - y) / (ymax - ymin); };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = xmax * k / 5.0, yv = ymin + (ymax - ymin) * k / 5.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << std::lround(xv)
       << "</text>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">query index</text>\n";
  os << "<text transform=\"translate(18," << (T + H - B) / 2
     << ") rotate(-90)\" text-anchor=\"middle\">mean log10 simple regret</text>\n";

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& cv = curves[c];
    const char* color = kColors[c % std::size(kColors)];
    os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < cv.x.size(); ++i) os << px(cv.x[i]) << ',' << py(cv.mean[i] + cv.half[i]) << ' ';
    for (std::size_t i = cv.x.size(); i-- > 0;) os << px(cv.x[i]) << ',' << py(cv.mean[i] - cv.half[i]) << ' ';
    os << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < cv.x.size(); ++i) os << px(cv.x[i]) << ',' << py(cv.mean[i]) << ' ';
    os << "\"/>\n";
    const double ly = T + 20.0 * static_cast<double>(c);
    os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << escape(cv.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pbo
