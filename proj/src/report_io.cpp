#include "selbias/report_io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace selbias {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw IoError("line " + std::to_string(line) + ": not a number '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw IoError("line " + std::to_string(line) + ": not an integer '" + s + "'");
  }
  return v;
}

/// Calls `row(fields, line_no)` for each data line after checking the header.
template <typename F>
void for_each_row(const std::string& text, const std::string& header, F&& row) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw IoError("missing CSV header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw IoError("unexpected CSV header '" + line + "'");
  const std::size_t cols = split_csv_line(header).size();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != cols) {
      throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols) + " fields");
    }
    row(fields, line_no);
  }
}

constexpr const char* kReportHeader = "seed,method,estimate,error,runtime_sec";
constexpr const char* kDatasetHeader = "x,t,y0,y1,y,selected";

}  // namespace

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path + "'");
  }
}

std::string report_csv(const RunReport& report) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const RunRow& r : report.rows) {
    out += std::to_string(r.seed) + "," + std::string(method_name(r.method)) + "," + fmt(r.estimate) + "," +
           fmt(r.error) + "," + fmt(r.runtime_sec) + "\n";
  }
  return out;
}

void emit_csv(const RunReport& report, const std::string& path) { write_atomic(path, report_csv(report)); }

RunReport parse_report_csv(const std::string& text) {
  RunReport report;
  for_each_row(text, kReportHeader, [&](const std::vector<std::string>& f, std::size_t line) {
    RunRow r;
    r.seed = parse_u64(f[0], line);
    try {
      r.method = parse_method(f[1]);
    } catch (const ConfigError& e) {
      throw IoError("line " + std::to_string(line) + ": " + e.what());
    }
    r.estimate = parse_double(f[2], line);
    r.error = parse_double(f[3], line);
    r.runtime_sec = parse_double(f[4], line);
    if (!std::isfinite(r.estimate)) r.message = "failed";
    report.rows.push_back(r);
  });
  return report;
}

RunReport read_report_csv(const std::string& path) {
  try {
    return parse_report_csv(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct BoxStats {
  std::string name;
  double q1 = 0, median = 0, q3 = 0, lo = 0, hi = 0;
  std::vector<double> outliers;
  bool empty = true;
};

}  // namespace

std::string boxplot_svg(const RunReport& report) {
  std::vector<Method> order;
  for (const RunRow& r : report.rows) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  }
  std::vector<BoxStats> boxes;
  double vmin = 0.0, vmax = 0.0;
  for (Method m : order) {
    BoxStats b;
    b.name = std::string(method_name(m));
    std::vector<double> v;
    for (const RunRow& r : report.rows) {
      if (r.method == m && std::isfinite(r.error)) v.push_back(r.error);
    }
    std::sort(v.begin(), v.end());
    if (!v.empty()) {
      b.empty = false;
      b.q1 = quantile(v, 0.25);
      b.median = quantile(v, 0.5);
      b.q3 = quantile(v, 0.75);
      const double iqr = b.q3 - b.q1;
      const double lf = b.q1 - 1.5 * iqr, uf = b.q3 + 1.5 * iqr;
      b.lo = b.q1;
      b.hi = b.q3;
      for (double e : v) {
        if (e < lf || e > uf) {
          b.outliers.push_back(e);
        } else {
          b.lo = std::min(b.lo, e);
          b.hi = std::max(b.hi, e);
        }
      }
      vmin = std::min(vmin, v.front());
      vmax = std::max(vmax, v.back());
    }
    boxes.push_back(std::move(b));
  }
  if (vmax - vmin < 1e-12) {
    vmin -= 1.0;
    vmax += 1.0;
  }
  const double pad = 0.05 * (vmax - vmin);
  vmin -= pad;
  vmax += pad;

  const double left = 60, top = 30, plot_h = 300, slot = 80;
  const double width = left + slot * static_cast<double>(std::max<std::size_t>(boxes.size(), 1)) + 20;
  const double height = top + plot_h + 60;
  auto ypix = [&](double v) { return top + (vmax - v) / (vmax - vmin) * plot_h; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
    << "\">\n";
  s << "<style>.box{fill:#cfe0f3;stroke:#1f4e79}.median{stroke:#c00000;stroke-width:2}"
       ".whisker{stroke:#1f4e79}.zero{stroke:#555;stroke-dasharray:4 3}.outlier{fill:none;stroke:#1f4e79}"
       "text{font-family:sans-serif;font-size:11px}</style>\n";
  s << "<text x=\"" << fmt(left) << "\" y=\"18\">error = estimate - oracle</text>\n";
  s << "<line class=\"zero\" x1=\"" << fmt(left) << "\" x2=\"" << fmt(width - 20) << "\" y1=\"" << fmt(ypix(0.0))
    << "\" y2=\"" << fmt(ypix(0.0)) << "\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = vmin + (vmax - vmin) * k / 4.0;
    char label[32];
    std::snprintf(label, sizeof label, "%.2f", v);
    s << "<text x=\"4\" y=\"" << fmt(ypix(v) + 4) << "\">" << label << "</text>\n";
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BoxStats& b = boxes[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const double hw = slot * 0.3;
    s << "<g class=\"method\" data-method=\"" << b.name << "\">\n";
    if (!b.empty) {
      s << "<line class=\"whisker\" x1=\"" << fmt(cx) << "\" x2=\"" << fmt(cx) << "\" y1=\"" << fmt(ypix(b.hi))
        << "\" y2=\"" << fmt(ypix(b.q3)) << "\"/>\n";
      s << "<line class=\"whisker\" x1=\"" << fmt(cx) << "\" x2=\"" << fmt(cx) << "\" y1=\"" << fmt(ypix(b.q1))
        << "\" y2=\"" << fmt(ypix(b.lo)) << "\"/>\n";
      for (double w : {b.lo, b.hi}) {
        s << "<line class=\"whisker\" x1=\"" << fmt(cx - hw / 2) << "\" x2=\"" << fmt(cx + hw / 2) << "\" y1=\""
          << fmt(ypix(w)) << "\" y2=\"" << fmt(ypix(w)) << "\"/>\n";
      }
      s << "<rect class=\"box\" x=\"" << fmt(cx - hw) << "\" y=\"" << fmt(ypix(b.q3)) << "\" width=\""
        << fmt(2 * hw) << "\" height=\"" << fmt(std::max(ypix(b.q1) - ypix(b.q3), 1.0)) << "\"/>\n";
      s << "<line class=\"median\" x1=\"" << fmt(cx - hw) << "\" x2=\"" << fmt(cx + hw) << "\" y1=\""
        << fmt(ypix(b.median)) << "\" y2=\"" << fmt(ypix(b.median)) << "\"/>\n";
      for (double o : b.outliers) {
        s << "<circle class=\"outlier\" cx=\"" << fmt(cx) << "\" cy=\"" << fmt(ypix(o)) << "\" r=\"3\"/>\n";
      }
    }
    s << "<text x=\"" << fmt(cx - hw) << "\" y=\"" << fmt(top + plot_h + 20) << "\">" << b.name << "</text>\n";
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void emit_boxplot_svg(const RunReport& report, const std::string& path) {
  write_atomic(path, boxplot_svg(report));
}

std::string summary_csv(const std::vector<MethodSummary>& summary) {
  std::string out = "method,n,failures,mean_error,std_error,single_seed\n";
  for (const auto& m : summary) {
    out += std::string(method_name(m.method)) + "," + std::to_string(m.n) + "," + std::to_string(m.failures) + "," +
           fmt(m.mean_error) + "," + fmt(m.std_error) + "," + (m.single_seed ? "1" : "0") + "\n";
  }
  return out;
}

std::string dataset_csv(const Dataset& data) {
  std::string out = std::string(kDatasetHeader) + "\n";
  for (const Sample& s : data.samples()) {
    out += fmt(s.x) + "," + std::to_string(s.t) + "," + fmt(s.y0) + "," + fmt(s.y1) + "," + fmt(s.y) + "," +
           (s.selected ? "1" : "0") + "\n";
  }
  return out;
}

void write_dataset_csv(const Dataset& data, const std::string& path) { write_atomic(path, dataset_csv(data)); }

Dataset parse_dataset_csv(const std::string& text, std::uint64_t seed) {
  std::vector<Sample> samples;
  for_each_row(text, kDatasetHeader, [&](const std::vector<std::string>& f, std::size_t line) {
    Sample s;
    s.x = parse_double(f[0], line);
    const std::uint64_t t = parse_u64(f[1], line);
    if (t > 1) throw IoError("line " + std::to_string(line) + ": treatment must be 0 or 1");
    s.t = static_cast<int>(t);
    s.y0 = parse_double(f[2], line);
    s.y1 = parse_double(f[3], line);
    s.y = parse_double(f[4], line);
    const std::uint64_t sel = parse_u64(f[5], line);
    if (sel > 1) throw IoError("line " + std::to_string(line) + ": selected must be 0 or 1");
    s.selected = sel == 1;
    samples.push_back(s);
  });
  return Dataset(std::move(samples), seed);
}

Dataset read_dataset_csv(const std::string& path, std::uint64_t seed) {
  try {
    return parse_dataset_csv(read_file(path), seed);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace selbias
