#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "winoforms/sweep/stats.hpp"
#include "winoforms/trainer/trainer.hpp"

namespace winoforms {

struct KindGroup {
  Kind kind;
  std::vector<double> accuracies;
};

// Best validation accuracies of successful records, grouped in ladder order.
inline std::vector<KindGroup> group_records(std::span<const RunRecord> records) {
  std::vector<KindGroup> out;
  for (Kind k : kAllKinds) {
    KindGroup g{k, {}};
    for (const auto& r : records) {
      if (r.kind == k && !r.error) g.accuracies.push_back(r.best_val_acc);
    }
    if (!g.accuracies.empty()) out.push_back(std::move(g));
  }
  return out;
}

inline std::string format_number(double v, int precision) {
  const double half_ulp = 0.5 * std::pow(10.0, -precision);
  if (std::abs(v) < half_ulp) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string format_number(const std::optional<double>& v, int precision) {
  return v ? format_number(*v, precision) : "n/a";
}

struct TableOptions {
  int precision = 3;
  std::map<Kind, double> test_accuracy;
};

struct RenderedTable {
  std::string text;
  std::string csv;
};

inline RenderedTable render_table(std::span<const KindGroup> groups, const TableOptions& opt = {}) {
  if (groups.empty()) throw Error("render_table: no groups");
  const bool with_test = !opt.test_accuracy.empty();
  std::vector<std::string> header = {"formalization", "n"};
  if (with_test) header.push_back("test");
  for (const char* h : {"std", "kurt", "median", "p75", "max"}) header.emplace_back(h);

  std::vector<std::vector<std::string>> rows;
  for (const auto& g : groups) {
    if (g.accuracies.size() < 2) {
      throw Error("render_table: group " + std::string(to_string(g.kind)) + " needs at least two records");
    }
    const auto s = distribution_stats(g.accuracies);
    std::vector<std::string> row = {std::string(traits(g.kind).display_name), std::to_string(s.count)};
    if (with_test) {
      auto it = opt.test_accuracy.find(g.kind);
      row.push_back(it == opt.test_accuracy.end() ? "n/a" : format_number(it->second, opt.precision));
    }
    row.push_back(format_number(s.std, opt.precision));
    row.push_back(format_number(s.kurtosis, opt.precision));
    row.push_back(format_number(s.median, opt.precision));
    row.push_back(format_number(s.p75, opt.precision));
    row.push_back(format_number(s.max, opt.precision));
    rows.push_back(std::move(row));
  }

  RenderedTable out;
  auto csv_line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out.csv += (i ? "," : "") + cells[i];
    out.csv += '\n';
  };
  csv_line(header);
  for (const auto& r : rows) csv_line(r);

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto text_line = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string pad(width[c] - cells[c].size(), ' ');
      line += c == 0 ? cells[c] + pad : "  " + pad + cells[c];
    }
    out.text += line + '\n';
  };
  out.text += "# validation accuracy over trials; std uses n-1, kurt is excess kurtosis g2 = m4/m2^2 - 3,\n"
              "# median and p75 interpolate linearly at rank 1 + (n-1)q\n";
  text_line(header);
  for (const auto& r : rows) text_line(r);
  return out;
}

struct PlotOptions {
  std::optional<double> majority;
  std::optional<double> human;
  std::uint64_t jitter_seed = 7;
  std::string title = "Validation accuracy per trial";
};

// Jittered strip plot, one column per formalization, median bar and p75
// label per column. Output depends only on the inputs.
inline std::string render_plot(std::span<const KindGroup> groups, const PlotOptions& opt = {}) {
  if (groups.empty()) throw Error("render_plot: no groups");
  constexpr double left = 60, top = 40, plot_h = 360, col_w = 120, bottom = 70;
  const double width = left + col_w * static_cast<double>(groups.size()) + 20;
  const double height = top + plot_h + bottom;
  auto y_of = [&](double acc) { return top + (1.0 - acc) * plot_h; };
  auto num = [](double v) { return format_number(v, 2); };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  svg += "<metadata>jittered strip plot of best validation accuracy per trial; bar = median "
         "(linear interpolation), label = 75th percentile; no density smoothing</metadata>\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" + opt.title + "</text>\n";

  for (int tick = 0; tick <= 10; ++tick) {
    const double acc = tick / 10.0;
    const double y = y_of(acc);
    svg += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(width - 20) + "\" y2=\"" +
           num(y) + "\" stroke=\"#eeeeee\"/>\n";
    svg += "<text x=\"" + num(left - 8) + "\" y=\"" + num(y + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + format_number(acc, 1) +
           "</text>\n";
  }
  auto reference = [&](const char* cls, double acc, const char* colour, const char* label) {
    const double y = y_of(acc);
    svg += "<line class=\"" + std::string(cls) + "\" data-value=\"" + format_number(acc, 3) + "\" x1=\"" +
           num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(width - 20) + "\" y2=\"" + num(y) +
           "\" stroke=\"" + colour + "\" stroke-dasharray=\"6,4\"/>\n";
    svg += "<text x=\"" + num(width - 22) + "\" y=\"" + num(y - 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" + colour + "\">" +
           label + "</text>\n";
  };
  reference("perfect", 1.0, "#444444", "perfect");
  if (opt.majority) reference("majority", *opt.majority, "#b22222", "majority");
  if (opt.human) reference("human", *opt.human, "#228b22", "human");

  for (std::size_t c = 0; c < groups.size(); ++c) {
    const auto& g = groups[c];
    if (g.accuracies.empty()) throw Error("render_plot: empty group");
    const auto s = distribution_stats(g.accuracies);
    const double cx = left + col_w * (static_cast<double>(c) + 0.5);
    const std::string name(traits(g.kind).display_name);
    svg += "<g class=\"column\" data-kind=\"" + std::string(to_string(g.kind)) + "\">\n";
    std::mt19937_64 jitter(opt.jitter_seed + c);
    for (double acc : g.accuracies) {
      const double u = static_cast<double>(jitter() >> 11) * 0x1.0p-53;
      svg += "<circle cx=\"" + num(cx + (u - 0.5) * col_w * 0.5) + "\" cy=\"" + num(y_of(acc)) +
             "\" r=\"3\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";
    }
    svg += "<line class=\"median\" data-value=\"" + format_number(s.median, 3) + "\" x1=\"" +
           num(cx - col_w * 0.35) + "\" y1=\"" + num(y_of(s.median)) + "\" x2=\"" + num(cx + col_w * 0.35) +
           "\" y2=\"" + num(y_of(s.median)) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    svg += "<text class=\"median-label\" x=\"" + num(cx + col_w * 0.37) + "\" y=\"" + num(y_of(s.median) + 4) +
           "\" font-family=\"sans-serif\" font-size=\"9\">" + format_number(s.median, 3) + "</text>\n";
    svg += "<text class=\"p75\" data-value=\"" + format_number(s.p75, 3) + "\" x=\"" + num(cx + col_w * 0.37) +
           "\" y=\"" + num(y_of(s.p75) - 2) + "\" font-family=\"sans-serif\" font-size=\"9\" fill=\"#555555\">" +
           format_number(s.p75, 3) + "</text>\n";
    svg += "<text x=\"" + num(cx) + "\" y=\"" + num(top + plot_h + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + name + "</text>\n";
    svg += "<text x=\"" + num(cx) + "\" y=\"" + num(top + plot_h + 34) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">n=" + std::to_string(s.count) +
           "</text>\n";
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw Error("write failed for " + path.string());
}

}  // namespace winoforms
