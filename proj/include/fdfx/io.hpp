#pragma once

// Long-format CSV: one row per (subject, visit, t) with columns
// subject_id, visit, t, y, x and optional z1..zp.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fdfx/dataset.hpp"
#include "fdfx/error.hpp"

namespace fdfx {

struct IngestOptions {
  bool log1p = false;  // y -> log(1 + y) for count-like responses
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_number(const std::string& cell, std::size_t line, const std::string& column) {
  if (cell.empty()) {
    fail(ErrorKind::Data, "missing", "row " + std::to_string(line) + ": empty value in column '" + column + "'");
  }
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    fail(ErrorKind::Data, "parse",
         "row " + std::to_string(line) + ": non-numeric value '" + cell + "' in column '" + column + "'");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline FunctionalDataset read_csv(std::istream& in, const IngestOptions& opt = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    header = detail::split_csv(line);
    break;
  }
  if (header.empty()) fail(ErrorKind::Data, "missing-columns", "input has no header row");

  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
  std::vector<std::string> missing;
  for (const char* need : {"subject_id", "visit", "t", "y", "x"}) {
    if (!col.count(need)) missing.emplace_back(need);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    fail(ErrorKind::Data, "missing-columns", "input lacks required column(s): " + names);
  }
  std::vector<std::size_t> zcols;
  for (std::size_t k = 1;; ++k) {
    const auto it = col.find("z" + std::to_string(k));
    if (it == col.end()) break;
    zcols.push_back(it->second);
  }

  struct Visit {
    std::size_t first_line = 0;
    double x = 0.0;
    std::vector<double> z;
    std::map<double, double> values;  // t -> y
  };
  struct Subject {
    std::map<long, Visit> visits;
  };
  std::vector<std::string> order;
  std::map<std::string, Subject> subjects;
  std::vector<double> all_t;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::Data, "parse",
           "row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " fields, found " +
               std::to_string(cells.size()));
    }
    const std::string& id = cells[col["subject_id"]];
    if (id.empty()) fail(ErrorKind::Data, "missing", "row " + std::to_string(line_no) + ": empty subject_id");
    const double vnum = detail::parse_number(cells[col["visit"]], line_no, "visit");
    if (vnum < 1.0 || vnum != std::floor(vnum)) {
      fail(ErrorKind::Data, "parse", "row " + std::to_string(line_no) + ": visit must be an integer >= 1");
    }
    const double t = detail::parse_number(cells[col["t"]], line_no, "t");
    if (t < 0.0 || t > 1.0) fail(ErrorKind::Data, "grid", "row " + std::to_string(line_no) + ": t must lie in [0, 1]");
    double y = detail::parse_number(cells[col["y"]], line_no, "y");
    if (opt.log1p) {
      if (!(y > -1.0)) fail(ErrorKind::Data, "parse", "row " + std::to_string(line_no) + ": log1p needs y > -1");
      y = std::log1p(y);
    }
    const double x = detail::parse_number(cells[col["x"]], line_no, "x");
    std::vector<double> z;
    for (std::size_t k = 0; k < zcols.size(); ++k) {
      z.push_back(detail::parse_number(cells[zcols[k]], line_no, "z" + std::to_string(k + 1)));
    }

    auto [sit, inserted] = subjects.try_emplace(id);
    if (inserted) order.push_back(id);
    const long vkey = static_cast<long>(vnum);
    auto [vit, vnew] = sit->second.visits.try_emplace(vkey);
    Visit& v = vit->second;
    if (vnew) {
      v.first_line = line_no;
      v.x = x;
      v.z = z;
    } else if (v.x != x || v.z != z) {
      fail(ErrorKind::Data, "structure",
           "row " + std::to_string(line_no) + ": covariates change within subject '" + id + "' visit " +
               std::to_string(vkey));
    }
    if (!v.values.emplace(t, y).second) {
      fail(ErrorKind::Data, "grid",
           "row " + std::to_string(line_no) + ": duplicate t=" + detail::format_double(t) + " for subject '" + id +
               "' visit " + std::to_string(vkey));
    }
    all_t.push_back(t);
  }
  if (order.empty()) fail(ErrorKind::Data, "structure", "input has no data rows");

  std::sort(all_t.begin(), all_t.end());
  all_t.erase(std::unique(all_t.begin(), all_t.end()), all_t.end());

  FunctionalDataset ds;
  ds.grid = all_t;
  const auto L = static_cast<Eigen::Index>(all_t.size());
  const auto p = static_cast<Eigen::Index>(zcols.size());
  ds.z.resize(0, p);
  for (const auto& id : order) {
    const Subject& s = subjects.at(id);
    const auto m = static_cast<Eigen::Index>(s.visits.size());
    std::vector<double> xs;
    RowMatrix zb(m, p);
    RowMatrix yb(m, L);
    Eigen::Index j = 0;
    for (const auto& [vkey, v] : s.visits) {
      if (v.values.size() != all_t.size()) {
        std::string absent;
        for (double t : all_t) {
          if (!v.values.count(t)) {
            absent = detail::format_double(t);
            break;
          }
        }
        fail(ErrorKind::Data, "ragged-grid",
             "subject '" + id + "' visit " + std::to_string(vkey) + " is missing t=" + absent +
                 " (every visit must be observed on the same grid)");
      }
      xs.push_back(v.x);
      for (Eigen::Index k = 0; k < p; ++k) zb(j, k) = v.z[static_cast<std::size_t>(k)];
      Eigen::Index a = 0;
      for (const auto& [t, y] : v.values) yb(j, a++) = y;
      ++j;
    }
    ds.add_subject(id, xs, zb, yb);
  }
  ds.validate();
  return ds;
}

inline FunctionalDataset ingest_csv(const std::string& path, const IngestOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "io", "cannot open input file '" + path + "'");
  return read_csv(in, opt);
}

inline void write_csv(std::ostream& out, const FunctionalDataset& ds) {
  out << "subject_id,visit,t,y,x";
  for (std::size_t k = 0; k < ds.p(); ++k) out << ",z" << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t r = ds.offsets[i]; r < ds.offsets[i + 1]; ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      const std::string tail = [&] {
        std::string s = "," + detail::format_double(ds.x[r]);
        for (Eigen::Index k = 0; k < ds.z.cols(); ++k) s += "," + detail::format_double(ds.z(row, k));
        return s;
      }();
      for (std::size_t l = 0; l < ds.L(); ++l) {
        out << ds.subject_ids[i] << ',' << (r - ds.offsets[i] + 1) << ',' << detail::format_double(ds.grid[l]) << ','
            << detail::format_double(ds.y(row, static_cast<Eigen::Index>(l))) << tail << '\n';
      }
    }
  }
}

inline void write_csv(const std::string& path, const FunctionalDataset& ds) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Data, "io", "cannot write '" + path + "'");
  write_csv(out, ds);
}

}  // namespace fdfx
