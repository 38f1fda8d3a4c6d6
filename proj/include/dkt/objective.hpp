#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dkt/model.hpp"

namespace dkt {

// Weights of the three regularization terms. (0,0,0) reproduces the plain
// next-step objective and routes around the regularizer code entirely.
struct LossConfig {
  double lambda_r = 0.0;
  double lambda_w1 = 0.0;
  double lambda_w2 = 0.0;

  bool is_plain() const { return lambda_r == 0.0 && lambda_w1 == 0.0 && lambda_w2 == 0.0; }

  void validate() const {
    if (lambda_r < 0.0 || lambda_w1 < 0.0 || lambda_w2 < 0.0)
      throw std::invalid_argument("LossConfig: regularization weights must be >= 0");
  }
};

struct BatchLossReport {
  double next_loss = 0.0;  // L
  double recon = 0.0;      // r
  double w1 = 0.0;
  double w2 = 0.0;         // reported as the root of the mean squared change
  double total = 0.0;      // L + lr*r + lw1*w1 + lw2*w2^2
  std::size_t n_terms = 0; // sum over students of (T_i - 1)
};

constexpr double kProbClamp = 1e-12;

// Cross-entropy of a Bernoulli label; the probability is clamped away from
// {0,1} before the logs so the result stays finite.
inline double xent(double p, int a) {
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return a == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

// d xent(p, a) / dp under the same clamping (zero in the clamped region).
inline double xent_grad(double p, int a) {
  if (p <= kProbClamp || p >= 1.0 - kProbClamp) return 0.0;
  return (p - static_cast<double>(a)) / (p * (1.0 - p));
}

namespace detail {

inline void check_aligned(const std::vector<PredictionTrace>& traces,
                          const std::vector<InteractionSequence>& seqs) {
  if (traces.size() != seqs.size())
    throw std::invalid_argument("objective: traces/sequences count mismatch");
  for (std::size_t i = 0; i < traces.size(); ++i)
    if (traces[i].length() != seqs[i].length())
      throw std::invalid_argument("objective: trace/sequence length mismatch");
}

inline std::size_t term_count(const std::vector<InteractionSequence>& seqs) {
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.length() > 0 ? s.length() - 1 : 0;
  return n;
}

}  // namespace detail

// Mean cross-entropy of the next-step predictions: for every student and
// t = 1..T_i-1, the model's output for the *next* question is scored against
// the next answer. Normalized by sum(T_i - 1).
inline double next_step_loss(const std::vector<PredictionTrace>& traces,
                             const std::vector<InteractionSequence>& seqs) {
  detail::check_aligned(traces, seqs);
  const std::size_t n = detail::term_count(seqs);
  if (n == 0) throw std::invalid_argument("next_step_loss: no sequences of length >= 2");
  double acc = 0.0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& seq = seqs[i];
    const auto& outs = traces[i].outputs;
    for (std::size_t t = 0; t + 1 < seq.length(); ++t)
      acc += xent(outs[t][static_cast<std::size_t>(seq.questions[t + 1])], seq.answers[t + 1]);
  }
  return acc / static_cast<double>(n);
}

// Reconstruction term: same normalizer and time range as the next-step loss,
// but each output is scored against the *current* question and answer.
inline double reconstruction_reg(const std::vector<PredictionTrace>& traces,
                                 const std::vector<InteractionSequence>& seqs) {
  detail::check_aligned(traces, seqs);
  const std::size_t n = detail::term_count(seqs);
  if (n == 0) throw std::invalid_argument("reconstruction_reg: no sequences of length >= 2");
  double acc = 0.0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& seq = seqs[i];
    const auto& outs = traces[i].outputs;
    for (std::size_t t = 0; t + 1 < seq.length(); ++t)
      acc += xent(outs[t][static_cast<std::size_t>(seq.questions[t])], seq.answers[t]);
  }
  return acc / static_cast<double>(n);
}

// Waviness of consecutive prediction vectors, averaged over time-steps and
// the M output components. w1 is the mean absolute change per component; the
// squared-change mean enters the loss as-is, while the *reported* w2 is its
// square root.
inline std::pair<double, double> waviness(const std::vector<PredictionTrace>& traces, int m) {
  if (traces.empty()) throw std::invalid_argument("waviness: no traces");
  double l1 = 0.0, l2sq = 0.0;
  std::size_t steps = 0;
  for (const auto& trace : traces) {
    for (std::size_t t = 0; t + 1 < trace.length(); ++t) {
      const auto [d1, d2] = diff_norms(trace.outputs[t + 1], trace.outputs[t]);
      l1 += d1;
      l2sq += d2;
      ++steps;
    }
  }
  if (steps == 0) throw std::invalid_argument("waviness: all traces shorter than 2 steps");
  const double denom = static_cast<double>(m) * static_cast<double>(steps);
  return {l1 / denom, std::sqrt(l2sq / denom)};
}

inline BatchLossReport total_loss(const std::vector<PredictionTrace>& traces,
                                  const std::vector<InteractionSequence>& seqs,
                                  const LossConfig& cfg) {
  cfg.validate();
  detail::check_aligned(traces, seqs);
  const int m = traces.empty() || traces[0].outputs.empty()
                    ? 0
                    : static_cast<int>(traces[0].outputs[0].size());
  BatchLossReport report;
  report.n_terms = detail::term_count(seqs);
  report.next_loss = next_step_loss(traces, seqs);
  report.recon = reconstruction_reg(traces, seqs);
  const auto [w1, w2] = waviness(traces, m);
  report.w1 = w1;
  report.w2 = w2;
  report.total = report.next_loss;
  if (cfg.lambda_r != 0.0) report.total += cfg.lambda_r * report.recon;
  if (cfg.lambda_w1 != 0.0) report.total += cfg.lambda_w1 * report.w1;
  if (cfg.lambda_w2 != 0.0) report.total += cfg.lambda_w2 * (report.w2 * report.w2);
  return report;
}

// Analytic d total_loss / d y_t for every trace and step: the gradient seeds
// consumed by backward_sequence. Cross-entropy terms touch one coordinate per
// step (q_{t+1} from L, q_t from r); the waviness terms touch all coordinates
// with boundary terms dropped at the first and last step. sign(0) = 0.
inline std::vector<std::vector<Vector>> loss_output_grads(
    const std::vector<PredictionTrace>& traces, const std::vector<InteractionSequence>& seqs,
    const LossConfig& cfg) {
  cfg.validate();
  detail::check_aligned(traces, seqs);
  const std::size_t n = detail::term_count(seqs);
  if (n == 0) throw std::invalid_argument("loss_output_grads: no sequences of length >= 2");
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<std::vector<Vector>> grads(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& seq = seqs[i];
    const auto& outs = traces[i].outputs;
    const std::size_t t_len = outs.size();
    auto& seq_grads = grads[i];
    seq_grads.resize(t_len);
    const std::size_t m = t_len > 0 ? outs[0].size() : 0;
    for (auto& g : seq_grads) g.assign(m, 0.0);

    for (std::size_t t = 0; t + 1 < t_len; ++t) {
      const auto q_next = static_cast<std::size_t>(seq.questions[t + 1]);
      seq_grads[t][q_next] += inv_n * xent_grad(outs[t][q_next], seq.answers[t + 1]);
      if (cfg.lambda_r != 0.0) {
        const auto q_cur = static_cast<std::size_t>(seq.questions[t]);
        seq_grads[t][q_cur] += cfg.lambda_r * inv_n * xent_grad(outs[t][q_cur], seq.answers[t]);
      }
    }

    if ((cfg.lambda_w1 != 0.0 || cfg.lambda_w2 != 0.0) && t_len >= 2) {
      const double wav_denom = inv_n / static_cast<double>(m);
      for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t j = 0; j < m; ++j) {
          const double back = t > 0 ? outs[t][j] - outs[t - 1][j] : 0.0;
          const double fwd = t + 1 < t_len ? outs[t + 1][j] - outs[t][j] : 0.0;
          double g = 0.0;
          if (cfg.lambda_w1 != 0.0) {
            const double sign_back = t > 0 ? (back > 0.0) - (back < 0.0) : 0.0;
            const double sign_fwd = t + 1 < t_len ? (fwd > 0.0) - (fwd < 0.0) : 0.0;
            g += cfg.lambda_w1 * (sign_back - sign_fwd) * wav_denom;
          }
          if (cfg.lambda_w2 != 0.0) {
            double delta = 0.0;
            if (t > 0) delta += back;
            if (t + 1 < t_len) delta -= fwd;
            g += cfg.lambda_w2 * 2.0 * delta * wav_denom;
          }
          seq_grads[t][j] += g;
        }
      }
    }
  }
  return grads;
}

}  // namespace dkt
