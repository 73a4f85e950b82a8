#pragma once

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mmce/channel.hpp"
#include "mmce/sounding.hpp"
#include "mmce/ssd.hpp"

namespace mmce {

/// Shortest round-trip decimal form of a double (via std::to_chars), so
/// re-reading a CSV reproduces values bit-exactly.
inline std::string fmt_double(double v)
{
  char buf[64];
  auto const res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s)
{
  double v = 0.0;
  auto const res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw std::runtime_error("parse_double: bad number '" + std::string(s) + "'");
  return v;
}

inline long parse_long(std::string_view s)
{
  long v = 0;
  auto const res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw std::runtime_error("parse_long: bad integer '" + std::string(s) + "'");
  return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> fields;
  std::string cur;
  for (char const c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::ofstream open_out(const std::string& path)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

}  // namespace detail

/// Matrix CSV: header `row,col,re,im`, row-major, 0-based indices.
inline void write_matrix_csv(const std::string& path, const CMat& m)
{
  auto out = detail::open_out(path);
  out << "row,col,re,im\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out << r << ',' << c << ',' << fmt_double(m(r, c).real()) << ',' << fmt_double(m(r, c).imag()) << '\n';
}

inline CMat read_matrix_csv(const std::string& path)
{
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty matrix file: " + path);
  struct Entry {
    long r, c;
    Cplx v;
  };
  std::vector<Entry> entries;
  long max_r = -1, max_c = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto const f = detail::split_csv_line(line);
    if (f.size() != 4) throw std::runtime_error("bad matrix row in " + path + ": " + line);
    Entry e{parse_long(f[0]), parse_long(f[1]), {parse_double(f[2]), parse_double(f[3])}};
    max_r = std::max(max_r, e.r);
    max_c = std::max(max_c, e.c);
    entries.push_back(e);
  }
  CMat m = CMat::Zero(max_r + 1, max_c + 1);
  for (const auto& e : entries) m(e.r, e.c) = e.v;
  return m;
}

/// Path-list CSV: `l,gain_re,gain_im,aod_rad,aoa_rad`, 0-based path index.
inline void write_paths_csv(const std::string& path, const std::vector<PathParams>& paths)
{
  auto out = detail::open_out(path);
  out << "l,gain_re,gain_im,aod_rad,aoa_rad\n";
  for (std::size_t l = 0; l < paths.size(); ++l)
    out << l << ',' << fmt_double(paths[l].gain.real()) << ',' << fmt_double(paths[l].gain.imag()) << ','
        << fmt_double(paths[l].aod) << ',' << fmt_double(paths[l].aoa) << '\n';
}

inline std::vector<PathParams> read_paths_csv(const std::string& path)
{
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty path file: " + path);
  std::vector<PathParams> paths;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto const f = detail::split_csv_line(line);
    if (f.size() != 5) throw std::runtime_error("bad path row in " + path + ": " + line);
    paths.push_back({{parse_double(f[1]), parse_double(f[2])}, parse_double(f[3]), parse_double(f[4])});
  }
  return paths;
}

/// Codebook CSV: `k,kind,row,col,re,im` with kind in {W, f}; 0-based indices.
inline void write_codebook_csv(const std::string& path, const SoundingCodebook& cb)
{
  auto out = detail::open_out(path);
  out << "k,kind,row,col,re,im\n";
  for (int k = 0; k < cb.k_uses; ++k) {
    const CMat& w = cb.combiners[k];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        out << k << ",W," << r << ',' << c << ',' << fmt_double(w(r, c).real()) << ','
            << fmt_double(w(r, c).imag()) << '\n';
    const CVec& f = cb.precoders[k];
    for (Eigen::Index r = 0; r < f.size(); ++r)
      out << k << ",f," << r << ",0," << fmt_double(f(r).real()) << ',' << fmt_double(f(r).imag()) << '\n';
  }
}

inline SoundingCodebook read_codebook_csv(const std::string& path)
{
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty codebook file: " + path);
  struct Entry {
    long k, r, c;
    bool is_w;
    Cplx v;
  };
  std::vector<Entry> entries;
  long max_k = -1, max_wr = -1, max_wc = -1, max_fr = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto const f = detail::split_csv_line(line);
    if (f.size() != 6) throw std::runtime_error("bad codebook row in " + path + ": " + line);
    if (f[1] != "W" && f[1] != "f") throw std::runtime_error("bad codebook kind in " + path + ": " + f[1]);
    Entry e{parse_long(f[0]), parse_long(f[2]), parse_long(f[3]), f[1] == "W",
            Cplx{parse_double(f[4]), parse_double(f[5])}};
    max_k = std::max(max_k, e.k);
    if (e.is_w) {
      max_wr = std::max(max_wr, e.r);
      max_wc = std::max(max_wc, e.c);
    } else {
      max_fr = std::max(max_fr, e.r);
    }
    entries.push_back(e);
  }
  if (max_k < 0 || max_wr < 0 || max_fr < 0) throw std::runtime_error("incomplete codebook file: " + path);
  SoundingCodebook cb;
  cb.k_uses = static_cast<int>(max_k + 1);
  cb.n_rf = static_cast<int>(max_wc + 1);
  cb.nr = static_cast<int>(max_wr + 1);
  cb.nt = static_cast<int>(max_fr + 1);
  cb.combiners.assign(cb.k_uses, CMat::Zero(cb.nr, cb.n_rf));
  cb.precoders.assign(cb.k_uses, CVec::Zero(cb.nt));
  for (const auto& e : entries) {
    if (e.is_w)
      cb.combiners[e.k](e.r, e.c) = e.v;
    else
      cb.precoders[e.k](e.r) = e.v;
  }
  return cb;
}

/// Sample CSV: a sidecar line `noise_var=<value>` first, then `idx,re,im`.
inline void write_samples_csv(const std::string& path, const SampleVector& s)
{
  auto out = detail::open_out(path);
  out << "noise_var=" << fmt_double(s.noise_var) << '\n';
  out << "idx,re,im\n";
  for (Eigen::Index i = 0; i < s.values.size(); ++i)
    out << i << ',' << fmt_double(s.values(i).real()) << ',' << fmt_double(s.values(i).imag()) << '\n';
}

inline SampleVector read_samples_csv(const std::string& path)
{
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("noise_var=", 0) != 0)
    throw std::runtime_error("sample file missing noise_var line: " + path);
  SampleVector s;
  s.noise_var = parse_double(std::string_view(line).substr(10));
  if (!std::getline(in, line)) throw std::runtime_error("sample file missing header: " + path);
  std::vector<Cplx> vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto const f = detail::split_csv_line(line);
    if (f.size() != 3) throw std::runtime_error("bad sample row in " + path + ": " + line);
    vals.emplace_back(parse_double(f[1]), parse_double(f[2]));
  }
  s.values = Eigen::Map<const CVec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return s;
}

/// Trace CSV: `iter,objective,nmse,stop_reason`; nmse is blank when the true
/// channel was not supplied and stop_reason is filled on the final row only.
inline void write_trace_csv(const std::string& path, const SolveTrace& trace)
{
  auto out = detail::open_out(path);
  out << "iter,objective,nmse,stop_reason\n";
  for (std::size_t i = 0; i < trace.objective.size(); ++i) {
    out << i << ',' << fmt_double(trace.objective[i]) << ',';
    if (i < trace.nmse.size()) out << fmt_double(trace.nmse[i]);
    out << ',';
    if (i + 1 == trace.objective.size()) out << to_string(trace.stop_reason);
    out << '\n';
  }
}

}  // namespace mmce
