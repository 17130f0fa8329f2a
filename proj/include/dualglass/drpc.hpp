#pragma once

// DRPC: line-oriented ASCII dual-return point cloud.
//
//   DRPC 1
//   rings <N> step_mrad <S> cols <C>
//   # scan_id <id> timestamp <t>                (optional)
//   fields ring col sx sy sz si lx ly lz li [label tlx tly tlz] [llabel ltlx ltly ltlz]
//   <one record per beam with at least one valid return>
//   checksum <records> <fnv1a64 hex>           (optional trailer)
//
// A missing channel is written `nan nan nan 0`. Label columns take
// I, G, R, O, U or `-`; a position of `- - -` means none. The `label` group
// annotates the strongest return, `llabel` the last return.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dualglass/cloud.hpp"
#include "dualglass/sim.hpp"

namespace dualglass {

struct DrpcFile {
  DualScan scan;
  std::optional<Annotation> annotation;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const std::string& s)
{
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  h ^= '\n';
  h *= 1099511628211ull;
  return h;
}

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;

inline std::string fmt_fixed(double v)
{
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  if (std::string(buf) == "-0.000000") return "0.000000";
  return buf;
}

inline void append_return(std::string& line, const std::optional<RawReturn>& r)
{
  if (!r) {
    line += " nan nan nan 0";
    return;
  }
  line += ' ' + fmt_fixed(r->position.x()) + ' ' + fmt_fixed(r->position.y()) + ' ' +
          fmt_fixed(r->position.z()) + ' ' + fmt_fixed(r->intensity);
}

inline void append_annotation(std::string& line, const std::optional<TruthRecord>& t)
{
  if (!t) {
    line += " - - - -";
    return;
  }
  line += ' ';
  line += label_char(t->label);
  line += ' ' + fmt_fixed(t->position.x()) + ' ' + fmt_fixed(t->position.y()) + ' ' + fmt_fixed(t->position.z());
}

}  // namespace detail

inline void write_drpc(std::ostream& out, const DualScan& scan, const Annotation* annotation = nullptr)
{
  const auto& g = scan.geometry();
  char head[160];
  std::snprintf(head, sizeof head, "rings %d step_mrad %.12f cols %d", g.ring_count, g.step_azimuth * 1e3,
                g.column_count);
  out << "DRPC 1\n" << head << "\n";
  out << "# scan_id " << scan.scan_id << " timestamp " << detail::fmt_fixed(scan.timestamp) << "\n";
  out << "fields ring col sx sy sz si lx ly lz li";
  if (annotation) out << " label tlx tly tlz llabel ltlx ltly ltlz";
  out << "\n";
  std::uint64_t h = detail::kFnvOffset;
  long records = 0;
  std::string line;
  for (int r = 0; r < g.ring_count; ++r)
    for (int c = 0; c < g.column_count; ++c) {
      const auto& s = scan.strongest.at(r, c);
      const auto& l = scan.last.at(r, c);
      if (!s && !l) continue;
      line = std::to_string(r) + ' ' + std::to_string(c);
      detail::append_return(line, s);
      detail::append_return(line, l);
      if (annotation) {
        detail::append_annotation(line, annotation->strongest[g.index(r, c)]);
        detail::append_annotation(line, annotation->last[g.index(r, c)]);
      }
      h = detail::fnv1a(h, line);
      ++records;
      out << line << '\n';
    }
  char tail[64];
  std::snprintf(tail, sizeof tail, "checksum %ld %016" PRIx64, records, h);
  out << tail << '\n';
}

inline void write_drpc(const std::string& path, const DualScan& scan, const Annotation* annotation = nullptr)
{
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_drpc(out, scan, annotation);
  if (!out) throw InputError("write failed for '" + path + "'");
}

inline DrpcFile read_drpc(std::istream& in)
{
  std::string line;
  long lineno = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    return false;
  };

  if (!next() || line.rfind("DRPC", 0) != 0) throw ParseError("missing DRPC magic", lineno, -1);
  {
    std::istringstream ss(line.substr(4));
    int version = 0;
    if (!(ss >> version)) throw ParseError("missing DRPC version", lineno, -1);
    if (version != 1) throw ParseError("unsupported DRPC version " + std::to_string(version), lineno, -1);
  }

  if (!next()) throw ParseError("missing grid header", lineno, -1);
  GridGeometry g;
  {
    std::istringstream ss(line);
    std::string k1, k2, k3;
    double step_mrad = 0.0;
    if (!(ss >> k1 >> g.ring_count >> k2 >> step_mrad >> k3 >> g.column_count) || k1 != "rings" ||
        k2 != "step_mrad" || k3 != "cols")
      throw ParseError("malformed grid header", lineno, -1);
    if (g.ring_count <= 0 || g.column_count <= 0 || !(step_mrad > 0.0))
      throw ParseError("non-positive grid dimensions", lineno, -1);
    g.step_azimuth = step_mrad * 1e-3;
    if (std::abs(g.column_count * g.step_azimuth - kTwoPi) > g.step_azimuth)
      throw ParseError("cols inconsistent with step_mrad", lineno, -1);
    g.elevations = GridGeometry::linear_elevations(g.ring_count, deg2rad(-30.67), deg2rad(10.67));
  }

  long scan_id = 0;
  double timestamp = 0.0;
  for (;;) {
    if (!next()) throw ParseError("missing fields line", lineno, -1);
    if (line.rfind("#", 0) != 0) break;
    std::istringstream ss(line.substr(1));
    std::string k1, k2;
    long id;
    double ts;
    if (ss >> k1 >> id >> k2 >> ts && k1 == "scan_id" && k2 == "timestamp") {
      scan_id = id;
      timestamp = ts;
    }
  }

  std::vector<std::string> fields;
  {
    std::istringstream ss(line);
    std::string f;
    ss >> f;
    if (f != "fields") throw ParseError("expected fields line", lineno, -1);
    while (ss >> f) fields.push_back(f);
  }
  const std::vector<std::string> base = {"ring", "col", "sx", "sy", "sz", "si", "lx", "ly", "lz", "li"};
  const std::vector<std::string> sgroup = {"label", "tlx", "tly", "tlz"};
  const std::vector<std::string> lgroup = {"llabel", "ltlx", "ltly", "ltlz"};
  auto has_group = [&](std::size_t at, const std::vector<std::string>& grp) {
    if (fields.size() < at + grp.size()) return false;
    for (std::size_t i = 0; i < grp.size(); ++i)
      if (fields[at + i] != grp[i]) return false;
    return true;
  };
  if (!has_group(0, base)) throw ParseError("fields must start with ring col sx sy sz si lx ly lz li", lineno, -1);
  bool s_annot = false, l_annot = false;
  std::size_t at = base.size();
  if (has_group(at, sgroup)) {
    s_annot = true;
    at += sgroup.size();
  }
  if (has_group(at, lgroup)) {
    l_annot = true;
    at += lgroup.size();
  }
  if (at != fields.size()) throw ParseError("unknown trailing fields", lineno, -1);

  OrganizedCloud strongest(g), last(g);
  std::optional<Annotation> annot;
  if (s_annot || l_annot) {
    annot.emplace();
    annot->geometry = g;
    annot->scan_id = scan_id;
    annot->strongest.resize(g.cell_count());
    annot->last.resize(g.cell_count());
  }

  long record = 0;
  std::uint64_t h = detail::kFnvOffset;
  bool saw_checksum = false;
  std::vector<std::string> tok;
  while (next()) {
    if (line.empty()) continue;
    if (line.rfind("checksum", 0) == 0) {
      std::istringstream ss(line.substr(8));
      long n = -1;
      std::string hex;
      if (!(ss >> n >> hex)) throw ParseError("malformed checksum line", lineno, -1);
      if (n != record) throw ParseError("checksum record count mismatch", lineno, record);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
      if (hex != buf) throw ParseError("checksum mismatch", lineno, -1);
      saw_checksum = true;
      continue;
    }
    if (saw_checksum) throw ParseError("data after checksum trailer", lineno, record);
    tok.clear();
    {
      std::istringstream ss(line);
      std::string t;
      while (ss >> t) tok.push_back(t);
    }
    if (tok.size() != fields.size())
      throw ParseError("truncated record: expected " + std::to_string(fields.size()) + " fields, got " +
                           std::to_string(tok.size()),
                       lineno, record);
    auto num = [&](std::size_t i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok[i], &used);
        if (used != tok[i].size()) throw std::invalid_argument(tok[i]);
        return v;
      } catch (const std::exception&) {
        throw ParseError("bad number '" + tok[i] + "' in field " + fields[i], lineno, record);
      }
    };
    auto integer = [&](std::size_t i) {
      const double v = num(i);
      if (v != std::floor(v)) throw ParseError("non-integer " + fields[i], lineno, record);
      return static_cast<int>(v);
    };
    const int ring = integer(0), col = integer(1);
    if (ring < 0 || ring >= g.ring_count)
      throw ParseError("ring " + std::to_string(ring) + " outside [0, " + std::to_string(g.ring_count) + ")", lineno,
                       record);
    if (col < 0 || col >= g.column_count)
      throw ParseError("col " + std::to_string(col) + " outside [0, " + std::to_string(g.column_count) + ")", lineno,
                       record);
    if (strongest.at(ring, col) || last.at(ring, col))
      throw ParseError("duplicate record for cell (" + std::to_string(ring) + ", " + std::to_string(col) + ")",
                       lineno, record);
    auto read_return = [&](std::size_t i, ReturnChannel ch) -> std::optional<RawReturn> {
      const double x = num(i), y = num(i + 1), z = num(i + 2);
      if (std::isnan(x) || std::isnan(y) || std::isnan(z)) return std::nullopt;
      RawReturn r;
      r.position = Vec3(x, y, z);
      r.intensity = num(i + 3);
      r.ring = ring;
      r.azimuth = g.column_center(col);
      r.channel = ch;
      return r;
    };
    auto s = read_return(2, ReturnChannel::strongest);
    auto l = read_return(6, ReturnChannel::last);
    if (!s && !l) throw ParseError("record has no valid return", lineno, record);
    if (s) strongest.set(ring, col, *s);
    if (l) last.set(ring, col, *l);

    auto read_annot = [&](std::size_t i) -> std::optional<TruthRecord> {
      if (tok[i] == "-") return std::nullopt;
      const auto lab = tok[i].size() == 1 ? label_from_char(tok[i][0]) : std::nullopt;
      if (!lab) throw ParseError("bad label '" + tok[i] + "'", lineno, record);
      TruthRecord tr;
      tr.label = *lab;
      if (tok[i + 1] != "-") tr.position = Vec3(num(i + 1), num(i + 2), num(i + 3));
      return tr;
    };
    std::size_t k = base.size();
    if (s_annot) {
      annot->strongest[g.index(ring, col)] = read_annot(k);
      k += 4;
    }
    if (l_annot) annot->last[g.index(ring, col)] = read_annot(k);

    h = detail::fnv1a(h, line);
    ++record;
  }

  DualScan scan{std::move(strongest), std::move(last), scan_id, timestamp};
  const auto elev = estimate_ring_elevations(scan);
  scan.strongest.set_elevations(elev);
  scan.last.set_elevations(elev);
  if (annot) annot->geometry.elevations = elev;
  return {std::move(scan), std::move(annot)};
}

inline DrpcFile read_drpc(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_drpc(in);
}

}  // namespace dualglass
