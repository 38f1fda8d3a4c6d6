#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "dkt/objective.hpp"
#include "test_util.hpp"

using dkt::InteractionSequence;
using dkt::LossConfig;
using dkt::PredictionTrace;
using dkt::Vector;

namespace {

constexpr double kLn2 = 0.6931471805599453;

std::vector<PredictionTrace> constant_traces(const std::vector<InteractionSequence>& seqs, int m,
                                             double value) {
  std::vector<PredictionTrace> traces(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i)
    traces[i].outputs.assign(seqs[i].length(), Vector(static_cast<std::size_t>(m), value));
  return traces;
}

}  // namespace

TEST_CASE("cross-entropy", "[objective]") {
  CHECK(dkt::xent(0.5, 1) == Catch::Approx(kLn2).epsilon(1e-15));
  CHECK(dkt::xent(0.5, 0) == Catch::Approx(kLn2).epsilon(1e-15));
  CHECK(dkt::xent(0.9, 1) == Catch::Approx(0.10536051565782630).epsilon(1e-12));
  // clamping keeps the loss finite at the boundary
  CHECK(std::isfinite(dkt::xent(0.0, 1)));
  CHECK(std::isfinite(dkt::xent(1.0, 0)));
}

TEST_CASE("next-step loss", "[objective]") {
  SECTION("constant 0.5 predictions give exactly ln 2") {
    const std::vector<InteractionSequence> seqs{{{0, 1, 0}, {1, 0, 1}}, {{1, 0}, {0, 1}}};
    const auto traces = constant_traces(seqs, 2, 0.5);
    CHECK(dkt::next_step_loss(traces, seqs) == Catch::Approx(kLn2).epsilon(1e-15));
  }
  SECTION("single term reduction") {
    const std::vector<InteractionSequence> seqs{{{0, 1}, {0, 1}}};
    std::vector<PredictionTrace> traces(1);
    traces[0].outputs = {Vector{0.2, 0.9}, Vector{0.5, 0.5}};
    // only t=1 contributes: y_1 . delta(q_2) = outputs[0][1] = 0.9, label a_2 = 1
    CHECK(dkt::next_step_loss(traces, seqs) ==
          Catch::Approx(0.10536051565782630).epsilon(1e-12));
  }
  SECTION("perfect predictions drive the loss toward zero") {
    const std::vector<InteractionSequence> seqs{{{0, 1, 0}, {1, 0, 1}}};
    std::vector<PredictionTrace> traces(1);
    for (std::size_t t = 0; t < 3; ++t) {
      Vector y(2, 0.5);
      if (t < 2) y[static_cast<std::size_t>(seqs[0].questions[t + 1])] =
          seqs[0].answers[t + 1] == 1 ? 1.0 - 1e-9 : 1e-9;
      traces[0].outputs.push_back(y);
    }
    CHECK(dkt::next_step_loss(traces, seqs) < 1e-8);
  }
  SECTION("no qualifying sequences throws") {
    const std::vector<InteractionSequence> seqs{{{0}, {1}}};
    const auto traces = constant_traces(seqs, 1, 0.5);
    CHECK_THROWS_AS(dkt::next_step_loss(traces, seqs), std::invalid_argument);
  }
}

TEST_CASE("reconstruction regularizer", "[objective]") {
  SECTION("constant 0.5 gives ln 2") {
    const std::vector<InteractionSequence> seqs{{{0, 1, 1}, {1, 0, 0}}};
    const auto traces = constant_traces(seqs, 2, 0.5);
    CHECK(dkt::reconstruction_reg(traces, seqs) == Catch::Approx(kLn2).epsilon(1e-15));
  }
  SECTION("single term: scored at the current question and answer") {
    const std::vector<InteractionSequence> seqs{{{1, 0}, {1, 0}}};
    std::vector<PredictionTrace> traces(1);
    traces[0].outputs = {Vector{0.3, 0.8}, Vector{0.5, 0.5}};
    // t=1 only: y_1 . delta(q_1) = outputs[0][1] = 0.8 with a_1 = 1
    CHECK(dkt::reconstruction_reg(traces, seqs) ==
          Catch::Approx(0.22314355131420976).epsilon(1e-12));
  }
}

TEST_CASE("waviness", "[objective]") {
  SECTION("constant trace has zero waviness") {
    const std::vector<InteractionSequence> seqs{{{0, 1, 0}, {1, 1, 0}}};
    const auto traces = constant_traces(seqs, 2, 0.37);
    const auto [w1, w2] = dkt::waviness(traces, 2);
    CHECK(w1 == 0.0);
    CHECK(w2 == 0.0);
  }
  SECTION("hand-computed two-step case") {
    std::vector<PredictionTrace> traces(1);
    traces[0].outputs = {Vector{0.5, 0.5}, Vector{0.7, 0.5}};
    const auto [w1, w2] = dkt::waviness(traces, 2);
    CHECK(w1 == Catch::Approx(0.1).epsilon(1e-15));
    CHECK(w2 == Catch::Approx(std::sqrt(0.02)).epsilon(1e-15));
  }
  SECTION("w1 is homogeneous in the step size") {
    std::vector<PredictionTrace> base(1), scaled(1);
    base[0].outputs = {Vector{0.4, 0.6, 0.5}, Vector{0.45, 0.55, 0.52}};
    scaled[0].outputs = {Vector{0.4, 0.6, 0.5}, Vector{0.55, 0.45, 0.56}};  // deltas x3
    const auto [w1a, w2a] = dkt::waviness(base, 3);
    const auto [w1b, w2b] = dkt::waviness(scaled, 3);
    CHECK(w1b == Catch::Approx(3.0 * w1a).epsilon(1e-12));
    (void)w2a;
    (void)w2b;
  }
  SECTION("all traces too short throws") {
    std::vector<PredictionTrace> traces(1);
    traces[0].outputs = {Vector{0.5}};
    CHECK_THROWS_AS(dkt::waviness(traces, 1), std::invalid_argument);
  }
}

TEST_CASE("total loss", "[objective]") {
  dkt::Rng rng(15);
  const dkt::Dataset d = testutil::random_dataset(rng, 3, 4, 2, 6);
  const auto traces = testutil::random_traces(rng, d.sequences, 3);

  SECTION("plain config reproduces the next-step loss bitwise") {
    const auto report = dkt::total_loss(traces, d.sequences, LossConfig{});
    CHECK(report.total == dkt::next_step_loss(traces, d.sequences));
  }
  SECTION("reconstruction-only on constant 0.5 traces doubles ln 2") {
    const auto traces_half = constant_traces(d.sequences, 3, 0.5);
    const auto report = dkt::total_loss(traces_half, d.sequences, LossConfig{1.0, 0.0, 0.0});
    CHECK(report.total == Catch::Approx(2.0 * kLn2).epsilon(1e-15));
  }
  SECTION("the report satisfies its own invariant") {
    const LossConfig cfg{0.3, 0.02, 4.0};
    const auto r = dkt::total_loss(traces, d.sequences, cfg);
    CHECK(r.total == Catch::Approx(r.next_loss + cfg.lambda_r * r.recon +
                                   cfg.lambda_w1 * r.w1 + cfg.lambda_w2 * r.w2 * r.w2)
                         .epsilon(1e-15));
    CHECK(r.w1 >= 0.0);
    CHECK(r.w2 >= 0.0);
    CHECK(r.n_terms == d.prediction_terms());
  }
  SECTION("terms are reported even at zero weight") {
    const auto r = dkt::total_loss(traces, d.sequences, LossConfig{});
    CHECK(r.recon > 0.0);
    CHECK(r.w1 > 0.0);
    CHECK(r.total == r.next_loss);
  }
  SECTION("invariant under permutation of students") {
    std::vector<InteractionSequence> seqs_perm(d.sequences.rbegin(), d.sequences.rend());
    std::vector<PredictionTrace> traces_perm(traces.rbegin(), traces.rend());
    const LossConfig cfg{0.2, 0.1, 1.5};
    const auto a = dkt::total_loss(traces, d.sequences, cfg);
    const auto b = dkt::total_loss(traces_perm, seqs_perm, cfg);
    CHECK(a.total == Catch::Approx(b.total).epsilon(1e-12));
  }
  SECTION("w1 and w2 are invariant under time reversal") {
    std::vector<PredictionTrace> reversed = traces;
    for (auto& tr : reversed) std::reverse(tr.outputs.begin(), tr.outputs.end());
    const auto [w1a, w2a] = dkt::waviness(traces, 3);
    const auto [w1b, w2b] = dkt::waviness(reversed, 3);
    CHECK(w1a == Catch::Approx(w1b).epsilon(1e-12));
    CHECK(w2a == Catch::Approx(w2b).epsilon(1e-12));
  }
  SECTION("seminorm inequalities on random traces") {
    const auto [w1, w2] = dkt::waviness(traces, 3);
    double max_delta = 0.0;
    for (const auto& tr : traces)
      for (std::size_t t = 0; t + 1 < tr.length(); ++t)
        for (std::size_t j = 0; j < tr.outputs[t].size(); ++j)
          max_delta = std::max(max_delta, std::abs(tr.outputs[t + 1][j] - tr.outputs[t][j]));
    CHECK(w2 * w2 <= w1 * max_delta * (1.0 + 1e-12));
    CHECK(w1 <= std::sqrt(3.0) * w2 * (1.0 + 1e-12));
  }
}

TEST_CASE("loss output gradients", "[objective]") {
  dkt::Rng rng(33);
  const dkt::Dataset d = testutil::random_dataset(rng, 3, 3, 3, 6);
  auto traces = testutil::random_traces(rng, d.sequences, 3);

  SECTION("plain config touches only the next-question coordinate") {
    const auto grads = dkt::loss_output_grads(traces, d.sequences, LossConfig{});
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const auto& seq = d.sequences[i];
      const std::size_t t_len = seq.length();
      for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
          const bool expected_nonzero =
              t + 1 < t_len && j == static_cast<std::size_t>(seq.questions[t + 1]);
          if (expected_nonzero)
            CHECK(grads[i][t][j] != 0.0);
          else
            CHECK(grads[i][t][j] == 0.0);
        }
      }
    }
  }
  SECTION("constant traces make the waviness gradient vanish") {
    std::vector<PredictionTrace> flat(d.sequences.size());
    for (std::size_t i = 0; i < flat.size(); ++i)
      flat[i].outputs.assign(d.sequences[i].length(), Vector(3, 0.42));
    const auto with_wave = dkt::loss_output_grads(flat, d.sequences, LossConfig{0.0, 1.0, 1.0});
    const auto without = dkt::loss_output_grads(flat, d.sequences, LossConfig{});
    for (std::size_t i = 0; i < with_wave.size(); ++i)
      for (std::size_t t = 0; t < with_wave[i].size(); ++t)
        CHECK(with_wave[i][t] == without[i][t]);
  }
  SECTION("matches finite differences of the total loss") {
    for (const LossConfig cfg : {LossConfig{0.1, 0.003, 3.0}, LossConfig{0.7, 0.2, 0.5},
                                 LossConfig{0.0, 0.0, 0.0}}) {
      const auto grads = dkt::loss_output_grads(traces, d.sequences, cfg);
      constexpr double eps = 1e-6;
      for (std::size_t i = 0; i < traces.size(); ++i) {
        for (std::size_t t = 0; t < traces[i].length(); ++t) {
          for (std::size_t j = 0; j < 3; ++j) {
            // skip within eps of an L1 kink: |y_{t+1,j} - y_{t,j}| tiny
            bool near_kink = false;
            if (cfg.lambda_w1 != 0.0) {
              if (t > 0 &&
                  std::abs(traces[i].outputs[t][j] - traces[i].outputs[t - 1][j]) < 1e-3)
                near_kink = true;
              if (t + 1 < traces[i].length() &&
                  std::abs(traces[i].outputs[t + 1][j] - traces[i].outputs[t][j]) < 1e-3)
                near_kink = true;
            }
            if (near_kink) continue;
            const double saved = traces[i].outputs[t][j];
            traces[i].outputs[t][j] = saved + eps;
            const double plus = dkt::total_loss(traces, d.sequences, cfg).total;
            traces[i].outputs[t][j] = saved - eps;
            const double minus = dkt::total_loss(traces, d.sequences, cfg).total;
            traces[i].outputs[t][j] = saved;
            const double fd = (plus - minus) / (2.0 * eps);
            CHECK(grads[i][t][j] == Catch::Approx(fd).margin(1e-6));
          }
        }
      }
    }
  }
}
