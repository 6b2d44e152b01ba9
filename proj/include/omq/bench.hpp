#pragma once

// Scaling measurements over generated instance families: preprocessing time,
// inter-answer delay and the per-answer trees visit counter.

#include <algorithm>
#include <numeric>

#include "omq/enumerate.hpp"
#include "omq/generators.hpp"

namespace omq {

struct BenchRow {
  std::string family;
  std::size_t size = 0;
  std::size_t facts = 0;
  std::string mode;
  double preprocess_ms = 0;  // best of the repetitions
  double chase_ms = 0;
  double prepare_ms = 0;
  std::size_t answers = 0;
  double delay_max_us = 0;
  double delay_mean_us = 0;
  double delay_p99_us = 0;
  std::size_t visits_max = 0;
  double visits_mean = 0;
};

inline nlohmann::json to_json(const BenchRow& r) {
  return {{"family", r.family},         {"size", r.size},
          {"facts", r.facts},           {"mode", r.mode},
          {"preprocess_ms", r.preprocess_ms}, {"chase_ms", r.chase_ms},
          {"prepare_ms", r.prepare_ms}, {"answers", r.answers},
          {"delay_max_us", r.delay_max_us},   {"delay_mean_us", r.delay_mean_us},
          {"delay_p99_us", r.delay_p99_us},   {"visits_max", r.visits_max},
          {"visits_mean", r.visits_mean}};
}

inline InstanceText generate_family(const std::string& family, std::size_t size, unsigned seed) {
  if (family == "example1") return example1_family(size, seed);
  if (family == "appendix") return appendix_family(size);
  throw UsageError("unknown family '" + family + "' (expected example1 or appendix)");
}

// One row: parsing is excluded from the timings, and output formatting does
// not happen at all; delays are measured between successive next() returns.
inline BenchRow bench_point(const std::string& family, std::size_t size, AnswerKind kind, unsigned seed,
                            int repeats = 3) {
  auto text = generate_family(family, size, seed);
  BenchRow row;
  row.family = family;
  row.size = size;
  row.mode = mode_name(kind);
  row.preprocess_ms = std::numeric_limits<double>::infinity();
  EnumOptions eo;
  eo.kind = kind;
  for (int rep = 0; rep < std::max(1, repeats); ++rep) {
    Vocabulary voc;
    auto in = parse_omq(text.facts, text.tgd, text.cq, voc);
    row.facts = in.db.size();
    auto t0 = std::chrono::steady_clock::now();
    auto e = make_enumeration(in.omq, in.db, voc, eo);
    double pre = elapsed_ms(t0);
    if (pre < row.preprocess_ms) {
      row.preprocess_ms = pre;
      row.chase_ms = e->pipeline.chase_ms;
      row.prepare_ms = e->pipeline.prepare_ms;
    }
    if (rep + 1 < repeats) continue;
    std::vector<double> delays;
    std::size_t visit_sum = 0;
    auto last = std::chrono::steady_clock::now();
    while (auto t = e->next()) {
      auto now = std::chrono::steady_clock::now();
      delays.push_back(std::chrono::duration<double, std::micro>(now - last).count());
      std::size_t v = e->last_visits();
      row.visits_max = std::max(row.visits_max, v);
      visit_sum += v;
      last = std::chrono::steady_clock::now();
    }
    row.answers = delays.size();
    if (!delays.empty()) {
      row.delay_mean_us = std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(delays.size());
      row.visits_mean = static_cast<double>(visit_sum) / static_cast<double>(delays.size());
      std::sort(delays.begin(), delays.end());
      row.delay_max_us = delays.back();
      auto k = static_cast<std::size_t>(0.99 * static_cast<double>(delays.size() - 1));
      row.delay_p99_us = delays[k];
    }
  }
  return row;
}

struct BenchSummary {
  std::vector<double> ratios;  // preprocessing time, consecutive sizes
  bool ratios_in_range = true;
  bool visits_equal = true;
};

inline BenchSummary summarize(const std::vector<BenchRow>& rows, double lo = 1.4, double hi = 3.0) {
  BenchSummary s;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double r = rows[i].preprocess_ms / std::max(rows[i - 1].preprocess_ms, 1e-9);
    s.ratios.push_back(r);
    if (r < lo || r > hi) s.ratios_in_range = false;
    if (rows[i].visits_max != rows[0].visits_max) s.visits_equal = false;
  }
  return s;
}

inline nlohmann::json to_json(const BenchSummary& s) {
  return {{"summary", true},
          {"preprocess_ratios", s.ratios},
          {"ratios_in_range", s.ratios_in_range},
          {"visits_max_equal", s.visits_equal}};
}

}  // namespace omq
