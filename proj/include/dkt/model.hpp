#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dkt/core.hpp"
#include "dkt/data.hpp"
#include "dkt/rng.hpp"

namespace dkt {

enum class CellKind { lstm, vanilla };

inline const char* to_string(CellKind k) { return k == CellKind::lstm ? "lstm" : "vanilla"; }

inline CellKind cell_kind_from_string(const std::string& s) {
  if (s == "lstm") return CellKind::lstm;
  if (s == "vanilla") return CellKind::vanilla;
  throw std::invalid_argument("unknown cell kind '" + s + "'");
}

struct ModelConfig {
  int hidden_size = 200;
  CellKind cell_kind = CellKind::lstm;
  EncodingScheme encoding = EncodingScheme::compressed;
  double dropout_rate = 0.5;
  double init_stddev = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden_size < 1) throw std::invalid_argument("ModelConfig: hidden_size must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw std::invalid_argument("ModelConfig: dropout_rate must be in [0,1)");
    if (!(init_stddev >= 0.0))
      throw std::invalid_argument("ModelConfig: init_stddev must be >= 0");
  }
};

// Gate weights act on the concatenation [x_t, h_{t-1}], so each gate matrix
// is H x (2M + H) and the hidden block starts at column 2M.
struct LstmParams {
  int num_skills = 0;  // M
  int hidden = 0;      // H
  Matrix w_f, w_i, w_o, w_c;
  Vector b_f, b_i, b_o, b_c;
  Matrix w_hy;  // M x H
  Vector b_y;   // M

  static LstmParams zeros(int num_skills, int hidden) {
    LstmParams p;
    p.num_skills = num_skills;
    p.hidden = hidden;
    const auto h = static_cast<std::size_t>(hidden);
    const auto m = static_cast<std::size_t>(num_skills);
    const std::size_t cols = 2 * m + h;
    p.w_f = Matrix(h, cols);
    p.w_i = Matrix(h, cols);
    p.w_o = Matrix(h, cols);
    p.w_c = Matrix(h, cols);
    p.b_f.assign(h, 0.0);
    p.b_i.assign(h, 0.0);
    p.b_o.assign(h, 0.0);
    p.b_c.assign(h, 0.0);
    p.w_hy = Matrix(m, h);
    p.b_y.assign(m, 0.0);
    return p;
  }

  std::size_t hidden_col_offset() const { return 2 * static_cast<std::size_t>(num_skills); }
};

struct RnnParams {
  int num_skills = 0;
  int hidden = 0;
  Matrix w_hx;  // H x 2M
  Matrix w_hh;  // H x H
  Vector b_h;   // H
  Matrix w_hy;  // M x H
  Vector b_y;   // M

  static RnnParams zeros(int num_skills, int hidden) {
    RnnParams p;
    p.num_skills = num_skills;
    p.hidden = hidden;
    const auto h = static_cast<std::size_t>(hidden);
    const auto m = static_cast<std::size_t>(num_skills);
    p.w_hx = Matrix(h, 2 * m);
    p.w_hh = Matrix(h, h);
    p.b_h.assign(h, 0.0);
    p.w_hy = Matrix(m, h);
    p.b_y.assign(m, 0.0);
    return p;
  }
};

using ModelParams = std::variant<LstmParams, RnnParams>;

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;  // {rows, cols} or {len}
  double* data = nullptr;
  std::size_t size = 0;
};

namespace detail {
inline NamedTensor ref(const char* name, Matrix& m) {
  return {name, {m.rows(), m.cols()}, m.data().data(), m.size()};
}
inline NamedTensor ref(const char* name, Vector& v) { return {name, {v.size()}, v.data(), v.size()}; }
}  // namespace detail

inline std::vector<NamedTensor> named_tensors(LstmParams& p) {
  return {detail::ref("w_f", p.w_f), detail::ref("w_i", p.w_i), detail::ref("w_o", p.w_o),
          detail::ref("w_c", p.w_c), detail::ref("b_f", p.b_f), detail::ref("b_i", p.b_i),
          detail::ref("b_o", p.b_o), detail::ref("b_c", p.b_c), detail::ref("w_hy", p.w_hy),
          detail::ref("b_y", p.b_y)};
}

inline std::vector<NamedTensor> named_tensors(RnnParams& p) {
  return {detail::ref("w_hx", p.w_hx), detail::ref("w_hh", p.w_hh), detail::ref("b_h", p.b_h),
          detail::ref("w_hy", p.w_hy), detail::ref("b_y", p.b_y)};
}

inline std::vector<NamedTensor> named_tensors(ModelParams& p) {
  return std::visit([](auto& alt) { return named_tensors(alt); }, p);
}

inline std::vector<std::span<double>> tensor_spans(ModelParams& p) {
  std::vector<std::span<double>> spans;
  for (auto& t : named_tensors(p)) spans.emplace_back(t.data, t.size);
  return spans;
}

inline int model_num_skills(const ModelParams& p) {
  return std::visit([](const auto& alt) { return alt.num_skills; }, p);
}

inline int model_hidden(const ModelParams& p) {
  return std::visit([](const auto& alt) { return alt.hidden; }, p);
}

inline ModelParams zeros_like(const ModelParams& p) {
  if (std::holds_alternative<LstmParams>(p))
    return LstmParams::zeros(model_num_skills(p), model_hidden(p));
  return RnnParams::zeros(model_num_skills(p), model_hidden(p));
}

// Weight matrices ~ Normal(0, init_stddev^2) drawn in a fixed tensor order;
// all biases stay zero. Deterministic given cfg.seed.
inline ModelParams init_params(const ModelConfig& cfg, int num_skills) {
  cfg.validate();
  if (num_skills < 1) throw std::invalid_argument("init_params: num_skills must be >= 1");
  Rng rng(cfg.seed);
  auto fill = [&](Matrix& m) {
    for (double& v : m.data()) v = rng.normal(0.0, cfg.init_stddev);
  };
  if (cfg.cell_kind == CellKind::lstm) {
    LstmParams p = LstmParams::zeros(num_skills, cfg.hidden_size);
    fill(p.w_f);
    fill(p.w_i);
    fill(p.w_o);
    fill(p.w_c);
    fill(p.w_hy);
    return p;
  }
  RnnParams p = RnnParams::zeros(num_skills, cfg.hidden_size);
  fill(p.w_hx);
  fill(p.w_hh);
  fill(p.w_hy);
  return p;
}

enum class RunMode { train, infer };

// Per-step activations retained for backpropagation through time.
struct StepCache {
  InputHots hots;
  Vector h;
  Vector c;       // lstm only
  Vector gate_f, gate_i, gate_o, gate_g;  // lstm only; g is the tanh candidate
  Vector tanh_c;  // lstm only
  Vector dropout_mask;  // empty unless train mode with dropout_rate > 0
};

struct PredictionTrace {
  std::vector<Vector> outputs;   // y_t, one per consumed input
  std::vector<StepCache> steps;  // populated in train mode
  bool training = false;

  std::size_t length() const { return outputs.size(); }
};

// ---------------------------------------------------------------------------
// Reference single-step ops (dense input). forward_sequence below uses an
// equivalent path that exploits the one-hot structure of x_t.
// ---------------------------------------------------------------------------

struct LstmStepResult {
  Vector h, c;
  Vector f, i, o, g;  // gate activations, cached for BPTT
};

// f,i,o = sigmoid(W.[x,h_prev] + b.); g = tanh(W_c[x,h_prev] + b_c);
// c = f*c_prev + i*g; h = o*tanh(c)
inline LstmStepResult lstm_step(const Vector& x, const Vector& h_prev, const Vector& c_prev,
                                const LstmParams& p) {
  const auto h_len = static_cast<std::size_t>(p.hidden);
  if (x.size() != 2 * static_cast<std::size_t>(p.num_skills) || h_prev.size() != h_len ||
      c_prev.size() != h_len)
    throw std::invalid_argument("lstm_step: shape mismatch");
  Vector z;
  z.reserve(x.size() + h_prev.size());
  z.insert(z.end(), x.begin(), x.end());
  z.insert(z.end(), h_prev.begin(), h_prev.end());

  LstmStepResult r;
  r.f = sigmoid(affine(p.w_f, z, p.b_f));
  r.i = sigmoid(affine(p.w_i, z, p.b_i));
  r.o = sigmoid(affine(p.w_o, z, p.b_o));
  r.g = tanh_vec(affine(p.w_c, z, p.b_c));
  r.c.resize(h_len);
  r.h.resize(h_len);
  for (std::size_t j = 0; j < h_len; ++j) {
    r.c[j] = r.f[j] * c_prev[j] + r.i[j] * r.g[j];
    r.h[j] = r.o[j] * std::tanh(r.c[j]);
  }
  return r;
}

// y = sigmoid(W_hy * (h (*) mask/keep) + b_y); the mask is inverted-dropout
// style and only present in training.
inline Vector output_step(const Vector& h, const Matrix& w_hy, const Vector& b_y,
                          const Vector* dropout_mask = nullptr, double keep_prob = 1.0) {
  if (h.size() != w_hy.cols() || b_y.size() != w_hy.rows())
    throw std::invalid_argument("output_step: shape mismatch");
  Vector hd = h;
  if (dropout_mask != nullptr) {
    if (dropout_mask->size() != h.size())
      throw std::invalid_argument("output_step: mask shape mismatch");
    for (std::size_t j = 0; j < hd.size(); ++j) hd[j] *= (*dropout_mask)[j] / keep_prob;
  }
  return sigmoid(affine(w_hy, hd, b_y));
}

namespace detail {

// pre = b + sum of W columns at the hot input indices + W[:, h_offset:] * h_prev
inline void gate_preactivation(const Matrix& w, const Vector& b, const InputHots& hots,
                               const Vector& h_prev, std::size_t h_offset, Vector& pre) {
  const std::size_t h_len = h_prev.size();
  pre.resize(b.size());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* row = w.row(r);
    double acc = b[r];
    for (int k = 0; k < hots.count; ++k) acc += row[hots.idx[k]];
    acc += dot(row + h_offset, h_prev.data(), h_len);
    pre[r] = acc;
  }
}

inline void apply_dropout(const Vector& h, const Vector& mask, double keep, Vector& hd) {
  hd.resize(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) hd[j] = h[j] * mask[j] / keep;
}

inline Vector draw_mask(std::size_t h_len, double keep, Rng& rng) {
  Vector mask(h_len);
  for (double& m : mask) m = rng.bernoulli(keep) ? 1.0 : 0.0;
  return mask;
}

}  // namespace detail

// Runs the recurrence over one sequence from h_0 = c_0 = 0. In train mode a
// dropout mask is drawn per step (from `rng`, or replayed from `fixed_masks`)
// and all gate/state activations are cached for backward_sequence.
inline PredictionTrace forward_sequence(const InteractionSequence& seq, const ModelParams& params,
                                        const ModelConfig& cfg, RunMode mode, Rng* rng = nullptr,
                                        const std::vector<Vector>* fixed_masks = nullptr) {
  cfg.validate();
  const std::size_t t_len = seq.length();
  if (seq.answers.size() != t_len)
    throw std::invalid_argument("forward_sequence: question/answer length mismatch");
  const int m = model_num_skills(params);
  const auto h_len = static_cast<std::size_t>(model_hidden(params));
  const bool training = mode == RunMode::train;
  const bool use_dropout = training && cfg.dropout_rate > 0.0;
  const double keep = 1.0 - cfg.dropout_rate;
  if (use_dropout && rng == nullptr && fixed_masks == nullptr)
    throw std::invalid_argument("forward_sequence: train mode with dropout needs an rng");
  if (fixed_masks != nullptr && fixed_masks->size() != t_len)
    throw std::invalid_argument("forward_sequence: fixed_masks length mismatch");

  PredictionTrace trace;
  trace.training = training;
  trace.outputs.reserve(t_len);
  if (training) trace.steps.reserve(t_len);

  const bool is_lstm = std::holds_alternative<LstmParams>(params);
  Vector h(h_len, 0.0), c(h_len, 0.0);
  Vector pre_f, pre_i, pre_o, pre_g, hd;
  for (std::size_t t = 0; t < t_len; ++t) {
    const InputHots hots = input_hots(seq.questions[t], seq.answers[t], m, cfg.encoding);
    StepCache step;
    step.hots = hots;
    if (is_lstm) {
      const auto& p = std::get<LstmParams>(params);
      const std::size_t off = p.hidden_col_offset();
      detail::gate_preactivation(p.w_f, p.b_f, hots, h, off, pre_f);
      detail::gate_preactivation(p.w_i, p.b_i, hots, h, off, pre_i);
      detail::gate_preactivation(p.w_o, p.b_o, hots, h, off, pre_o);
      detail::gate_preactivation(p.w_c, p.b_c, hots, h, off, pre_g);
      step.gate_f = sigmoid(std::move(pre_f));
      step.gate_i = sigmoid(std::move(pre_i));
      step.gate_o = sigmoid(std::move(pre_o));
      step.gate_g = tanh_vec(std::move(pre_g));
      step.c.resize(h_len);
      step.tanh_c.resize(h_len);
      step.h.resize(h_len);
      for (std::size_t j = 0; j < h_len; ++j) {
        step.c[j] = step.gate_f[j] * c[j] + step.gate_i[j] * step.gate_g[j];
        step.tanh_c[j] = std::tanh(step.c[j]);
        step.h[j] = step.gate_o[j] * step.tanh_c[j];
      }
      c = step.c;
    } else {
      const auto& p = std::get<RnnParams>(params);
      Vector pre(h_len);
      for (std::size_t r = 0; r < h_len; ++r) {
        const double* xrow = p.w_hx.row(r);
        double acc = p.b_h[r];
        for (int k = 0; k < hots.count; ++k) acc += xrow[hots.idx[k]];
        acc += dot(p.w_hh.row(r), h.data(), h_len);
        pre[r] = acc;
      }
      step.h = tanh_vec(std::move(pre));
    }
    h = step.h;

    const Vector* mask = nullptr;
    if (use_dropout) {
      step.dropout_mask = fixed_masks != nullptr ? (*fixed_masks)[t]
                                                 : detail::draw_mask(h_len, keep, *rng);
      mask = &step.dropout_mask;
    }
    const Vector* hv = &h;
    if (mask != nullptr) {
      detail::apply_dropout(h, *mask, keep, hd);
      hv = &hd;
    }
    const auto& w_hy = is_lstm ? std::get<LstmParams>(params).w_hy : std::get<RnnParams>(params).w_hy;
    const auto& b_y = is_lstm ? std::get<LstmParams>(params).b_y : std::get<RnnParams>(params).b_y;
    Vector y(b_y);
    for (std::size_t r = 0; r < w_hy.rows(); ++r) y[r] += dot(w_hy.row(r), hv->data(), h_len);
    trace.outputs.push_back(sigmoid(std::move(y)));

    if (training) trace.steps.push_back(std::move(step));
  }
  return trace;
}

// Exact gradients of sum_t dL/dy_t . y_t through the full unrolled
// recurrence (no truncation). Gradients are accumulated into `grads`, which
// must be shaped like `params`; accumulation lets the caller reduce a batch
// in sequence-index order.
inline void backward_sequence(const PredictionTrace& trace, const InteractionSequence& seq,
                              const std::vector<Vector>& output_grads, const ModelParams& params,
                              const ModelConfig& cfg, ModelParams& grads) {
  const std::size_t t_len = trace.length();
  if (!trace.training || trace.steps.size() != t_len)
    throw std::invalid_argument("backward_sequence: trace was not produced in train mode");
  if (output_grads.size() != t_len)
    throw std::invalid_argument("backward_sequence: output_grads length mismatch");
  if (seq.length() != t_len)
    throw std::invalid_argument("backward_sequence: sequence/trace length mismatch");
  if (grads.index() != params.index())
    throw std::invalid_argument("backward_sequence: grads/params cell kind mismatch");
  const auto h_len = static_cast<std::size_t>(model_hidden(params));
  const auto m_len = static_cast<std::size_t>(model_num_skills(params));
  const double keep = 1.0 - cfg.dropout_rate;

  const bool is_lstm = std::holds_alternative<LstmParams>(params);
  Vector dh_next(h_len, 0.0), dc_next(h_len, 0.0);
  Vector dpre_y(m_len), dhd(h_len), dh(h_len), hd(h_len);
  Vector dpre_f(h_len), dpre_i(h_len), dpre_o(h_len), dpre_g(h_len), dc(h_len);
  const Vector zeros(h_len, 0.0);

  for (std::size_t t = t_len; t-- > 0;) {
    const StepCache& step = trace.steps[t];
    const Vector& y = trace.outputs[t];
    const Vector& dy = output_grads[t];
    if (y.size() != m_len || dy.size() != m_len)
      throw std::invalid_argument("backward_sequence: output gradient shape mismatch");
    const Vector& h_prev = t > 0 ? trace.steps[t - 1].h : zeros;
    const bool has_mask = !step.dropout_mask.empty();

    // Output layer: y = sigmoid(w_hy hd + b_y)
    for (std::size_t r = 0; r < m_len; ++r) dpre_y[r] = dy[r] * y[r] * (1.0 - y[r]);
    const Vector* hv = &step.h;
    if (has_mask) {
      detail::apply_dropout(step.h, step.dropout_mask, keep, hd);
      hv = &hd;
    }
    auto& g_w_hy = is_lstm ? std::get<LstmParams>(grads).w_hy : std::get<RnnParams>(grads).w_hy;
    auto& g_b_y = is_lstm ? std::get<LstmParams>(grads).b_y : std::get<RnnParams>(grads).b_y;
    const auto& w_hy =
        is_lstm ? std::get<LstmParams>(params).w_hy : std::get<RnnParams>(params).w_hy;
    std::fill(dhd.begin(), dhd.end(), 0.0);
    for (std::size_t r = 0; r < m_len; ++r) {
      const double d = dpre_y[r];
      g_b_y[r] += d;
      if (d == 0.0) continue;
      double* grow = g_w_hy.row(r);
      const double* wrow = w_hy.row(r);
      for (std::size_t j = 0; j < h_len; ++j) {
        grow[j] += d * (*hv)[j];
        dhd[j] += d * wrow[j];
      }
    }
    for (std::size_t j = 0; j < h_len; ++j) {
      const double through_mask = has_mask ? dhd[j] * step.dropout_mask[j] / keep : dhd[j];
      dh[j] = through_mask + dh_next[j];
    }

    if (is_lstm) {
      const auto& p = std::get<LstmParams>(params);
      auto& g = std::get<LstmParams>(grads);
      const Vector& c_prev = t > 0 ? trace.steps[t - 1].c : zeros;
      for (std::size_t j = 0; j < h_len; ++j) {
        const double o = step.gate_o[j], f = step.gate_f[j], i = step.gate_i[j];
        const double gc = step.gate_g[j], tc = step.tanh_c[j];
        dpre_o[j] = dh[j] * tc * o * (1.0 - o);
        dc[j] = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
        dpre_f[j] = dc[j] * c_prev[j] * f * (1.0 - f);
        dpre_i[j] = dc[j] * gc * i * (1.0 - i);
        dpre_g[j] = dc[j] * i * (1.0 - gc * gc);
        dc_next[j] = dc[j] * f;
      }
      const std::size_t off = p.hidden_col_offset();
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      auto accumulate_gate = [&](const Matrix& w, Matrix& gw, Vector& gb, const Vector& dpre) {
        for (std::size_t r = 0; r < h_len; ++r) {
          const double d = dpre[r];
          gb[r] += d;
          if (d == 0.0) continue;
          double* grow = gw.row(r);
          for (int k = 0; k < step.hots.count; ++k) grow[step.hots.idx[k]] += d;
          double* ghrow = grow + off;
          const double* wrow = w.row(r) + off;
          for (std::size_t j = 0; j < h_len; ++j) {
            ghrow[j] += d * h_prev[j];
            dh_next[j] += d * wrow[j];
          }
        }
      };
      accumulate_gate(p.w_f, g.w_f, g.b_f, dpre_f);
      accumulate_gate(p.w_i, g.w_i, g.b_i, dpre_i);
      accumulate_gate(p.w_o, g.w_o, g.b_o, dpre_o);
      accumulate_gate(p.w_c, g.w_c, g.b_c, dpre_g);
    } else {
      const auto& p = std::get<RnnParams>(params);
      auto& g = std::get<RnnParams>(grads);
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (std::size_t r = 0; r < h_len; ++r) {
        const double hval = step.h[r];
        const double d = dh[r] * (1.0 - hval * hval);
        g.b_h[r] += d;
        if (d == 0.0) continue;
        double* gxrow = g.w_hx.row(r);
        for (int k = 0; k < step.hots.count; ++k) gxrow[step.hots.idx[k]] += d;
        double* ghrow = g.w_hh.row(r);
        const double* wrow = p.w_hh.row(r);
        for (std::size_t j = 0; j < h_len; ++j) {
          ghrow[j] += d * h_prev[j];
          dh_next[j] += d * wrow[j];
        }
      }
    }
  }
}

}  // namespace dkt
