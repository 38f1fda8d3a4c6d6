#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dkt/data.hpp"
#include "dkt/objective.hpp"

namespace dkt {

struct MetricsReport {
  double auc_n = 0.0;
  double auc_c = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  std::size_t n_pairs_n = 0;
  std::size_t n_pairs_c = 0;
};

// Area under the ROC curve as the Mann-Whitney statistic
// P(score+ > score-) + 0.5 P(equal), computed with tie-averaged ranks so the
// result does not depend on input order.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int a : labels) n_pos += static_cast<std::size_t>(a);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::domain_error("auc: undefined, both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

namespace detail {

// Pools (prediction, label) pairs over students and t = 1..T_i-1; `offset` 0
// scores the current question, 1 the next one.
inline std::pair<std::vector<double>, std::vector<int>> pooled_pairs(
    const std::vector<PredictionTrace>& traces, const std::vector<InteractionSequence>& seqs,
    std::size_t offset) {
  check_aligned(traces, seqs);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& seq = seqs[i];
    const auto& outs = traces[i].outputs;
    for (std::size_t t = 0; t + 1 < seq.length(); ++t) {
      const auto q = static_cast<std::size_t>(seq.questions[t + offset]);
      scores.push_back(outs[t][q]);
      labels.push_back(seq.answers[t + offset]);
    }
  }
  return {std::move(scores), std::move(labels)};
}

}  // namespace detail

inline double auc_next(const std::vector<PredictionTrace>& traces,
                       const std::vector<InteractionSequence>& seqs) {
  const auto [scores, labels] = detail::pooled_pairs(traces, seqs, 1);
  return auc(scores, labels);
}

inline double auc_current(const std::vector<PredictionTrace>& traces,
                          const std::vector<InteractionSequence>& seqs) {
  const auto [scores, labels] = detail::pooled_pairs(traces, seqs, 0);
  return auc(scores, labels);
}

// Signed agreement between each observed answer and the change in its own
// prediction: for t = 2..T_i, delta = (y_t - y_{t-1}) at the question just
// answered; m1 accumulates the sign, m2 the magnitude, both flipped when the
// answer was wrong and normalized by sum(T_i - 1).
inline std::pair<double, double> consistency_m(const std::vector<PredictionTrace>& traces,
                                               const std::vector<InteractionSequence>& seqs) {
  detail::check_aligned(traces, seqs);
  const std::size_t n = detail::term_count(seqs);
  if (n == 0) throw std::invalid_argument("consistency_m: no sequences of length >= 2");
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& seq = seqs[i];
    const auto& outs = traces[i].outputs;
    for (std::size_t t = 1; t < seq.length(); ++t) {
      const auto q = static_cast<std::size_t>(seq.questions[t]);
      const double delta = outs[t][q] - outs[t - 1][q];
      const double direction = seq.answers[t] == 1 ? 1.0 : -1.0;
      m1 += direction * static_cast<double>((delta > 0.0) - (delta < 0.0));
      m2 += direction * delta;
    }
  }
  const auto denom = static_cast<double>(n);
  return {m1 / denom, m2 / denom};
}

// 2x2 frequency counts of (current answer, next answer) over all adjacent
// occurrences of the ordered skill pair (s_a -> s_b).
struct CorrectnessMatrix {
  int skill_current = 0;
  int skill_next = 0;
  // cells[cur][next], index 1 = correct, 0 = incorrect
  std::array<std::array<long, 2>, 2> cells{{{0, 0}, {0, 0}}};

  long row_total(int cur) const { return cells[cur][0] + cells[cur][1]; }
  long col_total(int nxt) const { return cells[0][nxt] + cells[1][nxt]; }
  long grand_total() const { return row_total(0) + row_total(1); }
};

inline CorrectnessMatrix correctness_matrix(const Dataset& d, int s_a, int s_b) {
  if (s_a < 0 || s_a >= d.num_skills || s_b < 0 || s_b >= d.num_skills)
    throw std::invalid_argument("correctness_matrix: skill id out of range");
  CorrectnessMatrix m;
  m.skill_current = s_a;
  m.skill_next = s_b;
  for (const auto& seq : d.sequences)
    for (std::size_t t = 0; t + 1 < seq.length(); ++t)
      if (seq.questions[t] == s_a && seq.questions[t + 1] == s_b)
        ++m.cells[seq.answers[t]][seq.answers[t + 1]];
  return m;
}

inline MetricsReport full_report(const std::vector<PredictionTrace>& traces,
                                 const std::vector<InteractionSequence>& seqs, int m) {
  MetricsReport report;
  {
    const auto [scores, labels] = detail::pooled_pairs(traces, seqs, 1);
    report.n_pairs_n = scores.size();
    report.auc_n = auc(scores, labels);
  }
  {
    const auto [scores, labels] = detail::pooled_pairs(traces, seqs, 0);
    report.n_pairs_c = scores.size();
    report.auc_c = auc(scores, labels);
  }
  const auto [w1, w2] = waviness(traces, m);
  report.w1 = w1;
  report.w2 = w2;
  const auto [m1, m2] = consistency_m(traces, seqs);
  report.m1 = m1;
  report.m2 = m2;
  return report;
}

// Flat key-value record, one metric per line, for machine diffing across
// runs. Doubles are printed with round-trip precision.
inline std::string to_kv_text(const MetricsReport& r) {
  char buf[64];
  std::string out;
  auto emit = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s=%.17g\n", key, v);
    out += buf;
  };
  emit("auc_n", r.auc_n);
  emit("auc_c", r.auc_c);
  emit("w1", r.w1);
  emit("w2", r.w2);
  emit("m1", r.m1);
  emit("m2", r.m2);
  out += "n_pairs_n=" + std::to_string(r.n_pairs_n) + "\n";
  out += "n_pairs_c=" + std::to_string(r.n_pairs_c) + "\n";
  return out;
}

inline MetricsReport metrics_from_kv_text(const std::string& text) {
  MetricsReport r;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "n_pairs_n")
      r.n_pairs_n = std::stoull(value);
    else if (key == "n_pairs_c")
      r.n_pairs_c = std::stoull(value);
    else {
      const double v = std::stod(value);
      if (key == "auc_n") r.auc_n = v;
      else if (key == "auc_c") r.auc_c = v;
      else if (key == "w1") r.w1 = v;
      else if (key == "w2") r.w2 = v;
      else if (key == "m1") r.m1 = v;
      else if (key == "m2") r.m2 = v;
    }
  }
  return r;
}

}  // namespace dkt
