// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero if any
// criterion fails (skips are reported but do not fail the suite).

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "dkt/checkpoint.hpp"
#include "dkt/data.hpp"
#include "dkt/metrics.hpp"
#include "dkt/model.hpp"
#include "dkt/objective.hpp"
#include "dkt/simulate.hpp"
#include "dkt/trainer.hpp"

namespace {

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %d (%s): %s — %s\n", id, name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void report_skip(int id, const char* name, const std::string& detail) {
  std::printf("criterion %d (%s): SKIP — %s\n", id, name, detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness: BPTT + analytic loss gradients vs central finite
//    differences on randomized small models.
// ---------------------------------------------------------------------------
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  dkt::ModelConfig cfg;
  cfg.hidden_size = 6;
  cfg.init_stddev = 0.3;
  double worst = 0.0;
  int checks = 0;
  for (const dkt::LossConfig lcfg : {dkt::LossConfig{0.0, 0.0, 0.0},
                                     dkt::LossConfig{0.1, 0.003, 3.0}}) {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
      worst = std::max(worst, dkt::gradient_check(cfg, lcfg, seed));
      ++checks;
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = worst < 1e-4 && elapsed < 30.0;
  report(1, "gradient correctness", pass,
         fmt("max rel err %.3g over %d randomized checks (< 1e-4) in %.1f s (< 30 s)", worst,
             checks, elapsed));
}

// ---------------------------------------------------------------------------
// 2. Metric oracle equivalence: rank-based AUC vs O(n^2) pair counting, and
//    full_report vs its independently computed components.
// ---------------------------------------------------------------------------
double auc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

void criterion_2() {
  dkt::Rng rng(77);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 10 + rng.uniform_below(40);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform01() * 10.0) / 10.0;  // ties likely
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    worst = std::max(worst, std::abs(dkt::auc(scores, labels) - auc_bruteforce(scores, labels)));
  }

  bool components_bitwise = true;
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 3 + static_cast<int>(rng.uniform_below(4));
    std::vector<dkt::InteractionSequence> seqs;
    for (int i = 0; i < 6; ++i) {
      dkt::InteractionSequence s;
      const int t_len = 2 + static_cast<int>(rng.uniform_below(8));
      for (int t = 0; t < t_len; ++t) {
        s.questions.push_back(static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(m))));
        s.answers.push_back(rng.bernoulli(0.5) ? 1 : 0);
      }
      seqs.push_back(std::move(s));
    }
    std::vector<dkt::PredictionTrace> traces(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i)
      for (std::size_t t = 0; t < seqs[i].length(); ++t) {
        dkt::Vector y(static_cast<std::size_t>(m));
        for (double& v : y) v = 0.05 + 0.9 * rng.uniform01();
        traces[i].outputs.push_back(std::move(y));
      }
    try {
      const auto r = dkt::full_report(traces, seqs, m);
      const auto [w1, w2] = dkt::waviness(traces, m);
      const auto [m1, m2] = dkt::consistency_m(traces, seqs);
      components_bitwise = components_bitwise && r.auc_n == dkt::auc_next(traces, seqs) &&
                           r.auc_c == dkt::auc_current(traces, seqs) && r.w1 == w1 &&
                           r.w2 == w2 && r.m1 == m1 && r.m2 == m2;
    } catch (const std::domain_error&) {
      // single-class pool in a random draw; regenerate implicitly next rep
    }
  }

  const bool pass = worst < 1e-12 && components_bitwise;
  report(2, "metric oracle equivalence", pass,
         fmt("auc vs pair-counting oracle max |diff| %.3g over 200 instances (< 1e-12); "
             "full_report components bitwise: %s",
             worst, components_bitwise ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 3. Simulated-5 qualitative reproduction at desk scale.
// ---------------------------------------------------------------------------
struct TrainedPair {
  dkt::MetricsReport dkt, dktplus;
};

dkt::MetricsReport run_model(const dkt::Dataset& train_full, const dkt::Dataset& test,
                             const dkt::LossConfig& lcfg, int hidden, int max_epochs,
                             int patience, std::uint64_t seed) {
  dkt::ModelConfig mcfg;
  mcfg.hidden_size = hidden;
  mcfg.seed = seed;
  dkt::TrainConfig tcfg;
  tcfg.max_epochs = max_epochs;
  tcfg.patience = patience;
  tcfg.optimizer = dkt::Optimizer::adam;  // the provided fast-training option
  tcfg.seed = seed + 1;
  auto [train_used, val] = dkt::split_train_test(train_full, 0.1, seed + 2);
  const auto result = dkt::train(train_used, val, mcfg, lcfg, tcfg);
  return dkt::evaluate(result.params, test, mcfg);
}

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  // 1000 students halves the default dataset to fit slow single-core
  // machines; every threshold below stays at its full-size value.
  dkt::SimConfig sim;
  sim.n_students = 1000;
  sim.seed = 424242;
  const dkt::Dataset data = dkt::generate_simulated(sim);
  const auto [train_full, test] = dkt::split_train_test(data, 0.2, 91);

  const dkt::MetricsReport base = run_model(train_full, test, {0.0, 0.0, 0.0}, 200, 15, 5, 1);
  const dkt::MetricsReport plus =
      run_model(train_full, test, {0.20, 0.001, 10.0}, 200, 15, 5, 1);
  const double elapsed = seconds_since(t0);

  const bool a = base.auc_n >= 0.72 && base.auc_n <= 0.90;
  const bool b = std::abs(plus.auc_n - base.auc_n) <= 0.02;
  const bool c = plus.auc_c >= base.auc_c + 0.05;
  const bool d = plus.w1 <= 0.7 * base.w1;
  const bool e = plus.m1 > base.m1;
  const bool runtime_ok = elapsed < 1200.0;
  const bool pass = a && b && c && d && e && runtime_ok;
  report(3, "Simulated-5 qualitative reproduction", pass,
         fmt("DKT auc_n=%.4f in [0.72,0.90]:%s | dAUC(N)=%+.4f within 0.02:%s | "
             "auc_c %.4f->%.4f (+>=0.05):%s | w1 %.4f->%.4f (ratio %.2f<=0.7):%s | "
             "m1 %+.4f->%+.4f (up):%s | %.0f s (< 1200 s):%s",
             base.auc_n, a ? "y" : "N", plus.auc_n - base.auc_n, b ? "y" : "N", base.auc_c,
             plus.auc_c, c ? "y" : "N", base.w1, plus.w1, plus.w1 / base.w1, d ? "y" : "N",
             base.m1, plus.m1, e ? "y" : "N", elapsed, runtime_ok ? "y" : "N"));
}

// ---------------------------------------------------------------------------
// 4. Regularizer monotonicity: test w1 strictly decreases as lambda_w1 grows,
//    averaged over 3 seeds (Simulated-5 generator at reduced scale).
// ---------------------------------------------------------------------------
void criterion_4() {
  // One fixed synthetic dataset and split; the three seeds vary only the
  // training stochasticity (init, shuffling, dropout), so the lambda sweep
  // is a paired comparison.
  const std::vector<double> lambdas{0.0, 0.03, 0.3, 1.0};
  std::vector<double> mean_w1(lambdas.size(), 0.0);
  dkt::SimConfig sim;
  sim.n_students = 500;
  sim.seed = 777;
  const dkt::Dataset data = dkt::generate_simulated(sim);
  const auto [train_full, test] = dkt::split_train_test(data, 0.2, 778);
  for (std::uint64_t s = 1; s <= 3; ++s) {
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      const dkt::MetricsReport r =
          run_model(train_full, test, {0.0, lambdas[li], 0.0}, 64, 25, 25, 500 + s);
      mean_w1[li] += r.w1 / 3.0;
    }
  }
  bool strictly_decreasing = true;
  for (std::size_t i = 0; i + 1 < mean_w1.size(); ++i)
    strictly_decreasing = strictly_decreasing && mean_w1[i + 1] < mean_w1[i];
  report(4, "regularizer monotonicity", strictly_decreasing,
         fmt("mean test w1 over 3 seeds at lambda_w1={0,0.03,0.3,1.0}: "
             "%.4f > %.4f > %.4f > %.4f expected strictly decreasing",
             mean_w1[0], mean_w1[1], mean_w1[2], mean_w1[3]));
}

// ---------------------------------------------------------------------------
// 5. Baseline identity: the (0,0,0) configuration is bitwise the plain
//    next-step objective, in both the loss value and the gradient seeds.
// ---------------------------------------------------------------------------

// The next-step gradient exactly as loss_output_grads computes it with every
// regularizer code path deleted.
std::vector<std::vector<dkt::Vector>> plain_grads_reference(
    const std::vector<dkt::PredictionTrace>& traces,
    const std::vector<dkt::InteractionSequence>& seqs) {
  std::size_t n = 0;
  for (const auto& s : seqs) n += s.length() - 1;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<std::vector<dkt::Vector>> grads(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& seq = seqs[i];
    grads[i].assign(seq.length(), dkt::Vector(traces[i].outputs[0].size(), 0.0));
    for (std::size_t t = 0; t + 1 < seq.length(); ++t) {
      const auto q = static_cast<std::size_t>(seq.questions[t + 1]);
      grads[i][t][q] += inv_n * dkt::xent_grad(traces[i].outputs[t][q], seq.answers[t + 1]);
    }
  }
  return grads;
}

void criterion_5() {
  dkt::Rng rng(505);
  bool loss_bitwise = true, grads_bitwise = true;
  for (int rep = 0; rep < 50; ++rep) {
    const int m = 2 + static_cast<int>(rng.uniform_below(5));
    std::vector<dkt::InteractionSequence> seqs;
    std::vector<dkt::PredictionTrace> traces;
    const int n_seq = 1 + static_cast<int>(rng.uniform_below(5));
    for (int i = 0; i < n_seq; ++i) {
      dkt::InteractionSequence s;
      const int t_len = 2 + static_cast<int>(rng.uniform_below(7));
      dkt::PredictionTrace tr;
      for (int t = 0; t < t_len; ++t) {
        s.questions.push_back(static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(m))));
        s.answers.push_back(rng.bernoulli(0.5) ? 1 : 0);
        dkt::Vector y(static_cast<std::size_t>(m));
        for (double& v : y) v = 0.01 + 0.98 * rng.uniform01();
        tr.outputs.push_back(std::move(y));
      }
      seqs.push_back(std::move(s));
      traces.push_back(std::move(tr));
    }
    const dkt::LossConfig plain{};
    loss_bitwise = loss_bitwise &&
                   dkt::total_loss(traces, seqs, plain).total == dkt::next_step_loss(traces, seqs);
    const auto full_path = dkt::loss_output_grads(traces, seqs, plain);
    const auto reference = plain_grads_reference(traces, seqs);
    for (std::size_t i = 0; i < full_path.size(); ++i)
      for (std::size_t t = 0; t < full_path[i].size(); ++t)
        grads_bitwise = grads_bitwise && full_path[i][t] == reference[i][t];
  }

  // Determinism of the trainer closes the loop: identical gradient seeds
  // imply byte-identical training trajectories.
  dkt::Dataset d;
  d.num_skills = 3;
  for (int i = 0; i < 10; ++i) {
    dkt::InteractionSequence s;
    for (int t = 0; t < 6; ++t) {
      s.questions.push_back(static_cast<int>(rng.uniform_below(3)));
      s.answers.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    d.sequences.push_back(std::move(s));
  }
  dkt::ModelConfig mcfg;
  mcfg.hidden_size = 8;
  mcfg.seed = 5;
  dkt::TrainConfig tcfg;
  tcfg.max_epochs = 4;
  tcfg.patience = 4;
  tcfg.seed = 6;
  const auto r1 = dkt::train(d, d, mcfg, dkt::LossConfig{}, tcfg);
  const auto r2 = dkt::train(d, d, mcfg, dkt::LossConfig{}, tcfg);
  bool train_identical = true;
  auto s1 = dkt::tensor_spans(const_cast<dkt::ModelParams&>(r1.params));
  auto s2 = dkt::tensor_spans(const_cast<dkt::ModelParams&>(r2.params));
  for (std::size_t t = 0; t < s1.size(); ++t)
    for (std::size_t k = 0; k < s1[t].size(); ++k)
      train_identical = train_identical && s1[t][k] == s2[t][k];

  const bool pass = loss_bitwise && grads_bitwise && train_identical;
  report(5, "baseline identity", pass,
         fmt("total_loss(0,0,0)==next_step_loss bitwise: %s; gradient seeds match the "
             "regularizer-free path bitwise: %s; repeated training byte-identical: %s",
             loss_bitwise ? "yes" : "no", grads_bitwise ? "yes" : "no",
             train_identical ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 6. Reproducibility of the CLI: identical flags, byte-identical artifacts.
// ---------------------------------------------------------------------------
int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void criterion_6() {
  const std::string cli = DKT_CLI_PATH;
  const auto dir = std::filesystem::temp_directory_path() / "dkt_acceptance_c6";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string data = (dir / "sim.txt").string();
  const std::string log = (dir / "log.txt").string();
  bool pass = shell("'" + cli + "' simulate --students 60 --exercises 12 --concepts 3 --seed 9 "
                    "--out '" + data + "' >'" + log + "' 2>&1") == 0;
  const std::string flags = " train --data '" + data +
                            "' --hidden-size 16 --max-epochs 4 --patience 4 --batch-size 12 "
                            "--dropout-rate 0.5 --lambda-r 0.1 --lambda-w1 0.01 --lambda-w2 1.0 "
                            "--seed 31 --out-prefix '";
  const std::string p1 = (dir / "r1").string(), p2 = (dir / "r2").string();
  pass = pass && shell("'" + cli + "'" + flags + p1 + "' >>'" + log + "' 2>&1") == 0;
  pass = pass && shell("'" + cli + "'" + flags + p2 + "' >>'" + log + "' 2>&1") == 0;
  const bool ckpt_equal = pass && slurp(p1 + ".ckpt.json") == slurp(p2 + ".ckpt.json");
  const bool report_equal = pass && slurp(p1 + ".report.txt") == slurp(p2 + ".report.txt");
  const bool nonempty = pass && !slurp(p1 + ".ckpt.json").empty();
  report(6, "reproducibility", pass && ckpt_equal && report_equal && nonempty,
         fmt("two cmd_train runs with identical flags: checkpoints byte-identical: %s, "
             "reports byte-identical: %s",
             ckpt_equal ? "yes" : "no", report_equal ? "yes" : "no"));
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
}

// ---------------------------------------------------------------------------
// 7. Real-data note: Table 1 counts on user-supplied ASSIST2009.
// ---------------------------------------------------------------------------
void criterion_7() {
  const char* path = std::getenv("DKT_ASSIST2009");
  if (path == nullptr || std::string(path).empty()) {
    report_skip(7, "real-data note",
                "third-party ASSIST2009 dataset not supplied; set DKT_ASSIST2009 to a triplet "
                "log to check the s32->s33 correctness matrix (1543/159/81/367, total 2510)");
    return;
  }
  std::ifstream in(path);
  if (!in) {
    report(7, "real-data note", false, fmt("cannot open %s", path));
    return;
  }
  const auto parsed = dkt::parse_triplet_log(in);
  const auto m = dkt::correctness_matrix(parsed.dataset, 32, 33);
  const bool pass = m.cells[1][1] == 1543 && m.cells[1][0] == 159 && m.cells[0][1] == 81 &&
                    m.cells[0][0] == 367 && m.grand_total() == 2510;
  report(7, "real-data note", pass,
         fmt("s32->s33 cells CC/CI/IC/II = %ld/%ld/%ld/%ld total %ld, expected "
             "1543/159/81/367 total 2510; directional DKT+ effects at (0.1,0.003,3.0) "
             "carry no numeric promise",
             m.cells[1][1], m.cells[1][0], m.cells[0][1], m.cells[0][0], m.grand_total()));
}

}  // namespace

int main(int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();
  void (*criteria[])() = {criterion_1, criterion_2, criterion_3, criterion_4,
                          criterion_5, criterion_6, criterion_7};
  if (argc > 1) {
    // run only the listed criteria (development convenience)
    for (int i = 1; i < argc; ++i) {
      const int id = std::atoi(argv[i]);
      if (id >= 1 && id <= 7) criteria[id - 1]();
    }
  } else {
    for (auto* c : criteria) c();
  }
  std::printf("acceptance total: %s (%.0f s)\n", g_failures == 0 ? "PASS" : "FAIL",
              seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
