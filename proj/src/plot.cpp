#include "hyperagent/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hyperagent {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 190.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
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

/// Rounds the axis span up to 1, 2 or 5 times a power of ten.
double nice_ceiling(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) return 1.0;
  const double base = std::pow(10.0, std::floor(std::log10(v)));
  for (const double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * base >= v) return m * base;
  }
  return 10.0 * base;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const {
    const double span = x1 > x0 ? x1 - x0 : 1.0;
    return kLeft + (x - x0) / span * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    const double span = y1 > y0 ? y1 - y0 : 1.0;
    return kHeight - kBottom - (y - y0) / span * (kHeight - kTop - kBottom);
  }
};

void open_svg(std::ostringstream& s, const std::string& title) {
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" "
    << "font-family=\"sans-serif\" font-size=\"15\">" << escape(title) << "</text>\n";
}

void axes(std::ostringstream& s, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  const double bottom = kHeight - kBottom;
  const double right = kWidth - kRight;
  s << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n"
    << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(bottom) << "\" x2=\"" << fixed(right)
    << "\" y2=\"" << fixed(bottom) << "\"/>\n"
    << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft)
    << "\" y2=\"" << fixed(bottom) << "\"/>\n"
    << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s << "<text x=\"" << fixed(f.px(x)) << "\" y=\"" << fixed(bottom + 16)
      << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n"
      << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(f.py(y) + 4)
      << "\" text-anchor=\"end\">" << tick_label(y) << "</text>\n";
  }
  s << "<text x=\"" << fixed((kLeft + right) / 2) << "\" y=\"" << fixed(kHeight - 10)
    << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n"
    << "<text x=\"16\" y=\"" << fixed((kTop + bottom) / 2) << "\" text-anchor=\"middle\" "
    << "transform=\"rotate(-90 16 " << fixed((kTop + bottom) / 2) << ")\">" << escape(ylabel)
    << "</text>\n</g>\n";
}

void legend(std::ostringstream& s, std::size_t i, const std::string& label) {
  const double x = kWidth - kRight + 14;
  const double y = kTop + 10 + 18.0 * static_cast<double>(i);
  const char* color = kPalette[i % std::size(kPalette)];
  s << "<line x1=\"" << fixed(x) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(x + 20)
    << "\" y2=\"" << fixed(y) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
    << "<text x=\"" << fixed(x + 26) << "\" y=\"" << fixed(y + 4)
    << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(label) << "</text>\n";
}

std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys) {
  std::string pts;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) pts += ' ';
    pts += fixed(f.px(xs[i])) + "," + fixed(f.py(ys[i]));
  }
  return pts;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write plot " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for plot " + path.string());
}

}  // namespace

std::string regret_svg(const AggregateResult& result, const std::string& title) {
  std::size_t T = 1;
  double ymax = 0.0;
  for (const auto& c : result.curves) {
    T = std::max(T, c.mean_cum.size());
    for (std::size_t t = 0; t < c.mean_cum.size(); ++t) ymax = std::max({ymax, c.mean_cum[t], c.p90[t]});
  }
  const Frame f{1.0, static_cast<double>(T), 0.0, nice_ceiling(ymax)};
  std::ostringstream s;
  open_svg(s, title);
  axes(s, f, "t", "cumulative regret");
  for (std::size_t i = 0; i < result.curves.size(); ++i) {
    const auto& c = result.curves[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::vector<double> xs(c.mean_cum.size());
    for (std::size_t t = 0; t < xs.size(); ++t) xs[t] = static_cast<double>(t + 1);
    std::vector<double> band_x = xs;
    std::vector<double> band_y = c.p90;
    band_x.insert(band_x.end(), xs.rbegin(), xs.rend());
    band_y.insert(band_y.end(), c.p10.rbegin(), c.p10.rend());
    s << "<g class=\"curve\" data-agent=\"" << escape(c.agent) << "\">\n"
      << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" "
      << "points=\"" << polyline(f, band_x, band_y) << "\"/>\n"
      << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" "
      << "points=\"" << polyline(f, xs, c.mean_cum) << "\"/>\n</g>\n";
    legend(s, i, c.agent);
  }
  s << "</svg>\n";
  return s.str();
}

std::string moderation_svg(const std::vector<ModerationCurve>& curves, const std::string& title) {
  double xmax = 0.0;
  for (const auto& c : curves) {
    for (const double e : c.effort) xmax = std::max(xmax, e);
  }
  const Frame f{0.0, nice_ceiling(xmax), 0.0, 1.0};
  std::ostringstream s;
  open_svg(s, title);
  axes(s, f, "labeling effort (published posts)", "accuracy");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    s << "<g class=\"curve\" data-agent=\"" << escape(curves[i].agent) << "\">\n"
      << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" "
      << "points=\"" << polyline(f, curves[i].effort, curves[i].accuracy) << "\"/>\n</g>\n";
    legend(s, i, curves[i].agent);
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<std::filesystem::path> render_plots(const AggregateResult& result,
                                                const std::vector<ModerationCurve>& moderation,
                                                const std::string& env_name,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> files;
  const auto regret_path = out_dir / (env_name + "_regret.svg");
  write_text(regret_path, regret_svg(result, env_name + ": cumulative regret"));
  files.push_back(regret_path);
  if (!moderation.empty()) {
    const auto mod_path = out_dir / (env_name + "_accuracy_effort.svg");
    write_text(mod_path, moderation_svg(moderation, env_name + ": accuracy vs labeling effort"));
    files.push_back(mod_path);
  }
  return files;
}

}  // namespace hyperagent
