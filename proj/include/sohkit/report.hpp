#pragma once

// Result tables and report emission. A ReportTable holds one row per
// (scenario, excitation, mode) cell with the four per-parameter percent
// errors; emission produces an aligned text table, a CSV that reloads to an
// equal table (doubles are serialized with shortest-round-trip formatting,
// so no precision is lost), and standalone SVG plots (excitation waveforms
// and error bars) with no display dependency. Identical inputs produce
// identical bytes.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/csv.hpp"
#include "sohkit/excitation.hpp"
#include "sohkit/parameters.hpp"

namespace sohkit {

struct ReportRow {
  std::string scenario;
  std::string excitation;
  std::string mode;
  bool failed = false;
  std::array<double, 4> error_pct{};  // percent error per health parameter
  std::string note;                   // failure reason, empty when the cell succeeded

  friend bool operator==(const ReportRow& a, const ReportRow& b) {
    return a.scenario == b.scenario && a.excitation == b.excitation && a.mode == b.mode &&
           a.failed == b.failed && a.error_pct == b.error_pct && a.note == b.note;
  }
};

struct ReportTable {
  std::vector<ReportRow> rows;

  friend bool operator==(const ReportTable& a, const ReportTable& b) { return a.rows == b.rows; }
};

namespace detail {

// shortest decimal string that parses back to exactly the same double
inline std::string format_exact(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace detail

inline std::string render_report_text(const ReportTable& table) {
  const auto names = HealthVector::names();
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-14s %-14s %14s %14s %14s %14s  %s\n", "scenario",
                "excitation", "mode", (names[0] + "_%").c_str(), (names[1] + "_%").c_str(),
                (names[2] + "_%").c_str(), (names[3] + "_%").c_str(), "status");
  out += line;
  out += std::string(115, '-') + "\n";
  for (const auto& r : table.rows) {
    if (r.failed) {
      std::snprintf(line, sizeof(line), "%-10s %-14s %-14s %14s %14s %14s %14s  FAILED: %s\n",
                    r.scenario.c_str(), r.excitation.c_str(), r.mode.c_str(), "-", "-", "-", "-",
                    r.note.c_str());
    } else {
      std::snprintf(line, sizeof(line), "%-10s %-14s %-14s %+14.4f %+14.4f %+14.4f %+14.4f  ok\n",
                    r.scenario.c_str(), r.excitation.c_str(), r.mode.c_str(), r.error_pct[0],
                    r.error_pct[1], r.error_pct[2], r.error_pct[3]);
    }
    out += line;
  }
  return out;
}

inline std::string report_to_csv_string(const ReportTable& table) {
  const auto names = HealthVector::names();
  std::string out = "scenario,excitation,mode,failed";
  for (const auto& n : names) out += ",err_" + n + "_pct";
  out += ",note\n";
  for (const auto& r : table.rows) {
    out += detail::sanitize_field(r.scenario) + "," + detail::sanitize_field(r.excitation) + "," +
           detail::sanitize_field(r.mode) + "," + (r.failed ? "1" : "0");
    for (double e : r.error_pct) out += "," + detail::format_exact(e);
    out += "," + detail::sanitize_field(r.note) + "\n";
  }
  return out;
}

inline void save_report_csv(const ReportTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report CSV: " + path);
  out << report_to_csv_string(table);
}

inline ReportTable load_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open report CSV: " + path);
  ReportTable table;
  std::string line;
  bool have_header = false;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 9)
      throw Error(path + ":" + std::to_string(line_no) + ": expected 9 fields, got " +
                  std::to_string(fields.size()));
    if (!have_header) {
      if (fields[0] != "scenario")
        throw Error(path + ": first line must be the report header");
      have_header = true;
      continue;
    }
    ReportRow r;
    r.scenario = fields[0];
    r.excitation = fields[1];
    r.mode = fields[2];
    if (fields[3] != "0" && fields[3] != "1")
      throw Error(path + ":" + std::to_string(line_no) + ": failed flag must be 0 or 1");
    r.failed = fields[3] == "1";
    for (size_t i = 0; i < 4; ++i)
      r.error_pct[i] = parse_double(fields[4 + i], path + " line " + std::to_string(line_no));
    r.note = fields[8];
    table.rows.push_back(std::move(r));
  }
  if (!have_header) throw Error(path + ": report CSV has no header line");
  return table;
}

// ---------------------------------------------------------------------------
// SVG emission (standalone vector files, no display dependency)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

inline void svg_open(std::string& s, double w, double h) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(w) + "\" height=\"" +
       svg_num(h) + "\" viewBox=\"0 0 " + svg_num(w) + " " + svg_num(h) + "\">\n";
  s += "<rect width=\"" + svg_num(w) + "\" height=\"" + svg_num(h) + "\" fill=\"white\"/>\n";
}

inline void svg_text(std::string& s, double x, double y, const std::string& text,
                     const std::string& anchor = "start", int size = 12) {
  s += "<text x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) + "\" font-family=\"monospace\" " +
       "font-size=\"" + std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + text +
       "</text>\n";
}

inline void svg_line(std::string& s, double x1, double y1, double x2, double y2,
                     const std::string& color, double width = 1.0) {
  s += "<line x1=\"" + svg_num(x1) + "\" y1=\"" + svg_num(y1) + "\" x2=\"" + svg_num(x2) +
       "\" y2=\"" + svg_num(y2) + "\" stroke=\"" + color + "\" stroke-width=\"" +
       svg_num(width) + "\"/>\n";
}

inline void svg_rect(std::string& s, double x, double y, double w, double h,
                     const std::string& color) {
  s += "<rect x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) + "\" width=\"" + svg_num(w) +
       "\" height=\"" + svg_num(h) + "\" fill=\"" + color + "\"/>\n";
}

}  // namespace detail

// step plot of a piecewise-constant excitation
inline std::string svg_excitation_plot(const ExcitationProfile& profile,
                                       const std::string& label) {
  ExcitationProfile::validate(profile);
  const double w = 640, h = 360, ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = w - ml - mr, ph = h - mt - mb;
  const double horizon = profile.horizon_s();
  double amax = 1e-12;
  for (double c : profile.segment_currents_A) amax = std::max(amax, std::abs(c));
  amax *= 1.1;

  auto xo = [&](double t) { return ml + pw * t / horizon; };
  auto yo = [&](double a) { return mt + ph * (1.0 - (a + amax) / (2.0 * amax)); };

  std::string s;
  detail::svg_open(s, w, h);
  detail::svg_text(s, w / 2, 22, "excitation: " + label, "middle", 14);
  // axes and zero line
  detail::svg_line(s, ml, mt, ml, mt + ph, "black");
  detail::svg_line(s, ml, mt + ph, ml + pw, mt + ph, "black");
  detail::svg_line(s, ml, yo(0), ml + pw, yo(0), "#bbbbbb");
  detail::svg_text(s, ml - 8, yo(0) + 4, "0", "end");
  detail::svg_text(s, ml - 8, yo(amax / 1.1) + 4, detail::svg_num(amax / 1.1), "end");
  detail::svg_text(s, ml - 8, yo(-amax / 1.1) + 4, detail::svg_num(-amax / 1.1), "end");
  detail::svg_text(s, ml, h - 12, "0", "middle");
  detail::svg_text(s, ml + pw, h - 12, detail::svg_num(horizon) + " s", "middle");
  detail::svg_text(s, 18, mt + ph / 2, "A", "middle");
  // step waveform
  std::string pts;
  for (size_t k = 0; k < profile.segment_currents_A.size(); ++k) {
    const double t0 = static_cast<double>(k) * profile.segment_duration_s;
    const double t1 = t0 + profile.segment_duration_s;
    const double a = profile.segment_currents_A[k];
    pts += detail::svg_num(xo(t0)) + "," + detail::svg_num(yo(a)) + " ";
    pts += detail::svg_num(xo(t1)) + "," + detail::svg_num(yo(a)) + " ";
  }
  if (!pts.empty()) pts.pop_back();
  s += "<polyline points=\"" + pts +
       "\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>\n";
  s += "</svg>\n";
  return s;
}

// grouped |error| bars for every non-failed row of one excitation:
// scenario groups on the x axis, four parameter bars per mode inside a group
inline std::string svg_error_bars(const ReportTable& table, const std::string& excitation) {
  std::vector<const ReportRow*> rows;
  std::vector<std::string> scenarios, modes;
  for (const auto& r : table.rows) {
    if (r.excitation != excitation || r.failed) continue;
    rows.push_back(&r);
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end())
      scenarios.push_back(r.scenario);
    if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
  }
  const double w = 720, h = 400, ml = 70, mr = 20, mt = 40, mb = 70;
  const double pw = w - ml - mr, ph = h - mt - mb;
  double emax = 1e-9;
  for (const auto* r : rows)
    for (double e : r->error_pct) emax = std::max(emax, std::abs(e));
  emax = std::ceil(emax * 2.0) / 2.0;  // round the scale up to the next 0.5%

  const std::array<std::string, 2> palette{"#1f6fb2", "#d1622b"};
  std::string s;
  detail::svg_open(s, w, h);
  detail::svg_text(s, w / 2, 22, "per-parameter |error| %: " + excitation, "middle", 14);
  detail::svg_line(s, ml, mt, ml, mt + ph, "black");
  detail::svg_line(s, ml, mt + ph, ml + pw, mt + ph, "black");
  detail::svg_text(s, ml - 8, mt + 4, detail::svg_num(emax), "end");
  detail::svg_text(s, ml - 8, mt + ph + 4, "0", "end");
  for (size_t m = 0; m < modes.size(); ++m) {
    detail::svg_rect(s, ml + 140.0 * static_cast<double>(m), h - 26, 12, 12,
                     palette[m % palette.size()]);
    detail::svg_text(s, ml + 140.0 * static_cast<double>(m) + 18, h - 16, modes[m]);
  }
  if (!scenarios.empty()) {
    const double group_w = pw / static_cast<double>(scenarios.size());
    const size_t bars_per_group = 4 * modes.size();
    const double bar_w = group_w * 0.8 / static_cast<double>(std::max<size_t>(bars_per_group, 1));
    for (size_t g = 0; g < scenarios.size(); ++g) {
      const double gx = ml + group_w * static_cast<double>(g);
      detail::svg_text(s, gx + group_w / 2, mt + ph + 18, scenarios[g], "middle");
      for (size_t m = 0; m < modes.size(); ++m) {
        const ReportRow* row = nullptr;
        for (const auto* r : rows)
          if (r->scenario == scenarios[g] && r->mode == modes[m]) row = r;
        if (!row) continue;
        for (size_t i = 0; i < 4; ++i) {
          const double e = std::abs(row->error_pct[i]);
          const double bh = ph * e / emax;
          const double bx =
              gx + group_w * 0.1 + bar_w * static_cast<double>(m * 4 + i);
          detail::svg_rect(s, bx, mt + ph - bh, bar_w * 0.9, bh, palette[m % palette.size()]);
        }
      }
    }
  }
  s += "</svg>\n";
  return s;
}

// writes the text table, the CSV, and one waveform + one error-bar plot per
// excitation; returns the paths written, in a fixed order
inline std::vector<std::string> emit_report(
    const ReportTable& table, const std::vector<std::pair<std::string, ExcitationProfile>>& excitations,
    const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "plots");
  std::vector<std::string> written;
  const std::string txt = (fs::path(out_dir) / "report.txt").string();
  write_text_file(txt, render_report_text(table));
  written.push_back(txt);
  const std::string csv = (fs::path(out_dir) / "report.csv").string();
  save_report_csv(table, csv);
  written.push_back(csv);
  for (const auto& [label, profile] : excitations) {
    const std::string wf = (fs::path(out_dir) / "plots" / ("excitation_" + label + ".svg")).string();
    write_text_file(wf, svg_excitation_plot(profile, label));
    written.push_back(wf);
    const std::string eb = (fs::path(out_dir) / "plots" / ("errors_" + label + ".svg")).string();
    write_text_file(eb, svg_error_bars(table, label));
    written.push_back(eb);
  }
  return written;
}

}  // namespace sohkit
