#include "nsf/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nsf/errors.hpp"

namespace nsf {

double bad_tau(const Image& pred, const Image& gt, double tau, const EvalMask& mask, Region region) {
  if (!(tau > 0.0)) throw DomainError("bad_tau: tau must be positive");
  require_same_extent(pred, gt, "bad_tau");
  const Mask& m = region == Region::all ? mask.valid : mask.noc;
  require_same_extent(pred, m, "bad_tau");
  if (region == Region::noc) require_same_extent(pred, mask.valid, "bad_tau");
  std::size_t bad = 0, count = 0;
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!m.data[i] || (region == Region::noc && !mask.valid.data[i])) continue;
    ++count;
    if (std::abs(static_cast<double>(pred.data[i]) - gt.data[i]) > tau) ++bad;
  }
  if (count == 0) throw DomainError("bad_tau: evaluation region is empty, metric undefined");
  return 100.0 * static_cast<double>(bad) / static_cast<double>(count);
}

Mask occlusion_mask(const Image& gt_left, const Image& gt_right) {
  require_same_extent(gt_left, gt_right, "occlusion_mask");
  const int W = gt_left.width, H = gt_left.height;
  Mask noc(W, H, 1);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double d = gt_left.at(x, y);
      const double s = x - d;
      if (!(s >= 0.0 && s <= W - 1)) continue;
      const int x0 = std::min(static_cast<int>(std::floor(s)), W - 2 < 0 ? 0 : W - 2);
      const double f = s - x0;
      const double v = W == 1 ? gt_right.at(0, y) : (1.0 - f) * gt_right.at(x0, y) + f * gt_right.at(x0 + 1, y);
      noc.at(x, y) = std::abs(d - v) <= 1.0 ? 1 : 0;
    }
  }
  return noc;
}

EvalMask make_eval_mask(const Mask& valid, const Image& gt_left, const Image& gt_right) {
  EvalMask m{valid, occlusion_mask(gt_left, gt_right)};
  require_same_extent(valid, m.noc, "make_eval_mask");
  for (std::size_t i = 0; i < valid.data.size(); ++i) m.noc.data[i] = m.noc.data[i] && valid.data[i];
  return m;
}

double default_tau(std::string_view dataset) {
  std::string s(dataset);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s.rfind("kitti", 0) == 0) return 3.0;
  if (s.rfind("midd", 0) == 0) return 2.0;
  if (s.rfind("eth3d", 0) == 0) return 1.0;
  throw DomainError("no default tau for dataset '" + std::string(dataset) + "'");
}

EvalRecord evaluate(const std::string& dataset, const Image& pred, const Image& gt, const EvalMask& mask,
                    double tau) {
  EvalRecord r;
  r.dataset = dataset;
  r.tau = tau;
  r.bad_all = bad_tau(pred, gt, tau, mask, Region::all);
  r.pixels_all = static_cast<std::uint64_t>(std::count(mask.valid.data.begin(), mask.valid.data.end(), 1));
  for (std::size_t i = 0; i < mask.noc.data.size(); ++i) r.pixels_noc += mask.noc.data[i] && mask.valid.data[i];
  r.bad_noc = r.pixels_noc ? bad_tau(pred, gt, tau, mask, Region::noc) : 0.0;
  return r;
}

namespace {

const char* kCsvHeader = "dataset,tau,bad_all,bad_noc,pixels_all,pixels_noc";

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_text(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw DomainError("report: no records");
  std::size_t name_w = 7;
  for (const auto& r : records) name_w = std::max(name_w, r.dataset.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %6s %9s %9s %10s %10s\n", static_cast<int>(name_w), "dataset", "tau",
                "bad(All)", "bad(Noc)", "px(All)", "px(Noc)");
  out << line;
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%-*s %6s %9s %9s %10llu %10llu\n", static_cast<int>(name_w),
                  r.dataset.c_str(), fixed2(r.tau).c_str(), fixed2(r.bad_all).c_str(), fixed2(r.bad_noc).c_str(),
                  static_cast<unsigned long long>(r.pixels_all), static_cast<unsigned long long>(r.pixels_noc));
    out << line;
  }
  return out.str();
}

std::string report_csv(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw DomainError("report: no records");
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    if (r.dataset.find_first_of(",\"\n") != std::string::npos) {
      throw DomainError("report: dataset id may not contain commas, quotes or newlines");
    }
    out << r.dataset << ',' << exact(r.tau) << ',' << exact(r.bad_all) << ',' << exact(r.bad_noc) << ','
        << r.pixels_all << ',' << r.pixels_noc << '\n';
  }
  return out.str();
}

std::vector<EvalRecord> parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  int line_no = 0;
  std::vector<EvalRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != kCsvHeader) throw ParseError("report csv: unexpected header", line_no);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError("report csv: expected 6 columns", line_no);
    try {
      EvalRecord r;
      r.dataset = cells[0];
      r.tau = std::stod(cells[1]);
      r.bad_all = std::stod(cells[2]);
      r.bad_noc = std::stod(cells[3]);
      r.pixels_all = std::stoull(cells[4]);
      r.pixels_noc = std::stoull(cells[5]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ParseError("report csv: malformed number", line_no);
    }
  }
  if (line_no == 0) throw ParseError("report csv: empty input", 0);
  return out;
}

}  // namespace nsf
