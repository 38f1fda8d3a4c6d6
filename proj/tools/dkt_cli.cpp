// Command-line front end: simulate / train / eval / grid-search / heatmap /
// matrix. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
// failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dkt/checkpoint.hpp"
#include "dkt/data.hpp"
#include "dkt/heatmap.hpp"
#include "dkt/metrics.hpp"
#include "dkt/model.hpp"
#include "dkt/objective.hpp"
#include "dkt/simulate.hpp"
#include "dkt/trainer.hpp"

namespace {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

dkt::ParseResult load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path);
  auto result = dkt::parse_triplet_log(in);
  if (result.dropped_short > 0)
    std::cerr << "note: dropped " << result.dropped_short
              << " sequence(s) shorter than 2 interactions\n";
  return result;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

struct ModelFlags {
  int hidden_size = 200;
  std::string cell = "lstm";
  std::string encoding = "compressed";
  double dropout_rate = 0.5;
  double init_stddev = 0.05;

  void attach(CLI::App* cmd) {
    cmd->add_option("--hidden-size", hidden_size, "RNN state size")->capture_default_str();
    cmd->add_option("--cell", cell, "Recurrent cell: lstm or vanilla")->capture_default_str();
    cmd->add_option("--encoding", encoding, "Input encoding: compressed or concat")
        ->capture_default_str();
    cmd->add_option("--dropout-rate", dropout_rate, "Dropout on the hidden state before the output layer")
        ->capture_default_str();
    cmd->add_option("--init-stddev", init_stddev, "Stddev of the Gaussian weight init")
        ->capture_default_str();
  }

  dkt::ModelConfig to_config(std::uint64_t seed) const {
    dkt::ModelConfig cfg;
    cfg.hidden_size = hidden_size;
    cfg.cell_kind = dkt::cell_kind_from_string(cell);
    cfg.encoding = dkt::encoding_from_string(encoding);
    cfg.dropout_rate = dropout_rate;
    cfg.init_stddev = init_stddev;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

struct TrainFlags {
  double learning_rate = 0.01;
  double clip_threshold = 3.0;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 5;
  std::string optimizer = "sgd";

  void attach(CLI::App* cmd) {
    cmd->add_option("--learning-rate", learning_rate, "SGD/Adam step size")->capture_default_str();
    cmd->add_option("--clip-threshold", clip_threshold, "Global gradient-norm clip")
        ->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "Sequences per minibatch")->capture_default_str();
    cmd->add_option("--max-epochs", max_epochs, "Epoch budget")->capture_default_str();
    cmd->add_option("--patience", patience, "Early-stopping patience in epochs")
        ->capture_default_str();
    cmd->add_option("--optimizer", optimizer, "sgd or adam")->capture_default_str();
  }

  dkt::TrainConfig to_config(std::uint64_t seed, dkt::StopSet stop) const {
    dkt::TrainConfig cfg;
    cfg.learning_rate = learning_rate;
    cfg.clip_threshold = clip_threshold;
    cfg.batch_size = batch_size;
    cfg.max_epochs = max_epochs;
    cfg.patience = patience;
    cfg.optimizer = dkt::optimizer_from_string(optimizer);
    cfg.early_stop_on = stop;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

void print_matrix(const dkt::CorrectnessMatrix& m, std::ostream& out) {
  char buf[128];
  out << "Current = s" << m.skill_current << ", Next = s" << m.skill_next << "\n";
  std::snprintf(buf, sizeof buf, "%-12s %10s %10s %10s\n", "", "Correct", "Incorrect", "Total");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-12s %10ld %10ld %10ld\n", "Correct", m.cells[1][1],
                m.cells[1][0], m.row_total(1));
  out << buf;
  std::snprintf(buf, sizeof buf, "%-12s %10ld %10ld %10ld\n", "Incorrect", m.cells[0][1],
                m.cells[0][0], m.row_total(0));
  out << buf;
  std::snprintf(buf, sizeof buf, "%-12s %10ld %10ld %10ld\n", "Total", m.col_total(1),
                m.col_total(0), m.grand_total());
  out << buf;
}

int run(int argc, char** argv) {
  CLI::App app{"Knowledge tracing with an LSTM and prediction-consistent regularization"};
  app.require_subcommand(1);

  // --- simulate -------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic student dataset");
  dkt::SimConfig sim_cfg;
  std::string sim_out;
  sim->add_option("--students", sim_cfg.n_students, "Number of virtual students")
      ->capture_default_str();
  sim->add_option("--exercises", sim_cfg.n_exercises, "Exercises per student")
      ->capture_default_str();
  sim->add_option("--concepts", sim_cfg.n_concepts, "Number of underlying concepts")
      ->capture_default_str();
  sim->add_option("--guess", sim_cfg.guess_c, "Guessing probability floor")
      ->capture_default_str();
  sim->add_option("--ability-stddev", sim_cfg.ability_stddev,
                  "Spread of per-concept student abilities")
      ->capture_default_str();
  sim->add_option("--seed", sim_cfg.seed, "Generator seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Output triplet-log path")->required();
  sim->callback([&] {
    const dkt::Dataset d = dkt::generate_simulated(sim_cfg);
    std::ofstream out(sim_out);
    if (!out) throw DataError("cannot write " + sim_out);
    dkt::serialize_triplet_log(d, out);
    if (!out) throw DataError("failed writing " + sim_out);
    std::printf("wrote %s: students=%zu skills=%d interactions=%zu mean_correctness=%.4f\n",
                sim_out.c_str(), d.sequences.size(), d.num_skills, d.total_interactions(),
                d.mean_correctness());
  });

  // --- train ----------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train a model and report test metrics");
  std::string tr_data, tr_prefix = "dkt_run";
  double tr_test_fraction = 0.2, tr_val_fraction = 0.1;
  std::uint64_t tr_seed = 0;
  dkt::LossConfig tr_loss;
  std::string tr_stop = "validation";
  bool tr_paper_faithful = false;
  ModelFlags tr_model;
  TrainFlags tr_train;
  tr->add_option("--data", tr_data, "Triplet-log dataset")->required();
  tr->add_option("--out-prefix", tr_prefix,
                 "Prefix for .ckpt.json/.history.txt/.report.txt/.test.txt outputs")
      ->capture_default_str();
  tr->add_option("--test-fraction", tr_test_fraction, "Held-out test fraction")
      ->capture_default_str();
  tr->add_option("--val-fraction", tr_val_fraction,
                 "Validation fraction carved from the training split")
      ->capture_default_str();
  tr->add_option("--seed", tr_seed, "Master seed (init, shuffling, dropout, splits)")
      ->capture_default_str();
  tr->add_option("--lambda-r", tr_loss.lambda_r, "Reconstruction weight")->capture_default_str();
  tr->add_option("--lambda-w1", tr_loss.lambda_w1, "L1 waviness weight")->capture_default_str();
  tr->add_option("--lambda-w2", tr_loss.lambda_w2, "Squared-L2 waviness weight")
      ->capture_default_str();
  tr->add_option("--early-stop-on", tr_stop, "Split monitored for early stopping: validation or test")
      ->capture_default_str();
  tr->add_flag("--paper-faithful", tr_paper_faithful,
               "Early-stop on the test set, mirroring the original experimental setup");
  tr_model.attach(tr);
  tr_train.attach(tr);
  tr->callback([&] {
    if (tr_stop != "validation" && tr_stop != "test")
      throw CLI::ValidationError("--early-stop-on", "must be 'validation' or 'test'");
    const dkt::StopSet stop = (tr_paper_faithful || tr_stop == "test") ? dkt::StopSet::test
                                                                       : dkt::StopSet::validation;
    const dkt::ModelConfig mcfg = tr_model.to_config(tr_seed);
    const dkt::TrainConfig tcfg = tr_train.to_config(tr_seed + 1, stop);
    tr_loss.validate();

    const dkt::Dataset data = load_dataset(tr_data).dataset;
    auto [train_full, test] = dkt::split_train_test(data, tr_test_fraction, tr_seed + 2);
    dkt::Dataset train_used = train_full;
    dkt::Dataset monitor = test;
    if (stop == dkt::StopSet::validation) {
      auto [rest, val] = dkt::split_train_test(train_full, tr_val_fraction, tr_seed + 3);
      train_used = std::move(rest);
      monitor = std::move(val);
    }

    const auto progress = [](int epoch, const dkt::EpochRecord& rec) {
      std::fprintf(stderr, "epoch %d: train_loss=%.4f monitor_auc_n=%.4f (%.1f s)\n", epoch,
                   rec.train_loss, rec.monitor.auc_n, rec.wall_seconds);
    };
    const dkt::TrainResult result = dkt::train(train_used, monitor, mcfg, tr_loss, tcfg, progress);
    const dkt::MetricsReport report = dkt::evaluate(result.params, test, mcfg);

    dkt::save_checkpoint_file(tr_prefix + ".ckpt.json", result.params, mcfg);
    write_text_file(tr_prefix + ".history.txt", dkt::history_to_text(result.history));
    write_text_file(tr_prefix + ".report.txt", dkt::to_kv_text(report));
    {
      std::ofstream out(tr_prefix + ".test.txt");
      if (!out) throw DataError("cannot write " + tr_prefix + ".test.txt");
      dkt::serialize_triplet_log(test, out);
    }
    std::printf("trained %zu epochs (best %d), test metrics:\n%s", result.history.epochs.size(),
                result.history.best_epoch, dkt::to_kv_text(report).c_str());
  });

  // --- eval -----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
  ev->add_option("--data", ev_data, "Triplet-log dataset")->required();
  ev->add_option("--out", ev_out, "Report output path (printed to stdout regardless)");
  ev->callback([&] {
    const dkt::Checkpoint ckpt = dkt::load_checkpoint_file(ev_ckpt);
    const dkt::Dataset data = load_dataset(ev_data).dataset;
    if (data.num_skills > dkt::model_num_skills(ckpt.params))
      throw DataError("skill-count mismatch: dataset has ids up to " +
                      std::to_string(data.num_skills - 1) + " but the model covers " +
                      std::to_string(dkt::model_num_skills(ckpt.params)) + " skills");
    const dkt::MetricsReport report = dkt::evaluate(ckpt.params, data, ckpt.config);
    const std::string text = dkt::to_kv_text(report);
    if (!ev_out.empty()) write_text_file(ev_out, text);
    std::fputs(text.c_str(), stdout);
  });

  // --- grid-search ------------------------------------------------------------
  auto* gs = app.add_subcommand("grid-search",
                                "Cross-validated search over the regularization weights");
  std::string gs_data, gs_out;
  double gs_test_fraction = 0.2;
  int gs_folds = 5;
  std::uint64_t gs_seed = 0;
  dkt::GridSpec gs_grid;
  ModelFlags gs_model;
  TrainFlags gs_train;
  gs->add_option("--data", gs_data, "Triplet-log dataset")->required();
  gs->add_option("--test-fraction", gs_test_fraction,
                 "Test fraction excluded before cross-validation")
      ->capture_default_str();
  gs->add_option("--folds", gs_folds, "Cross-validation folds")->capture_default_str();
  gs->add_option("--seed", gs_seed, "Master seed")->capture_default_str();
  gs->add_option("--grid-r", gs_grid.lambda_r, "Candidate lambda_r values")
      ->delimiter(',')
      ->capture_default_str();
  gs->add_option("--grid-w1", gs_grid.lambda_w1, "Candidate lambda_w1 values")
      ->delimiter(',')
      ->capture_default_str();
  gs->add_option("--grid-w2", gs_grid.lambda_w2, "Candidate lambda_w2 values")
      ->delimiter(',')
      ->capture_default_str();
  gs->add_option("--out", gs_out, "Results table output path");
  gs_model.attach(gs);
  gs_train.attach(gs);
  gs->callback([&] {
    gs_grid.validate();
    const bool has_zero_r = std::count(gs_grid.lambda_r.begin(), gs_grid.lambda_r.end(), 0.0) > 0;
    const bool has_zero_w1 =
        std::count(gs_grid.lambda_w1.begin(), gs_grid.lambda_w1.end(), 0.0) > 0;
    const bool has_zero_w2 =
        std::count(gs_grid.lambda_w2.begin(), gs_grid.lambda_w2.end(), 0.0) > 0;
    if (!has_zero_r || !has_zero_w1 || !has_zero_w2)
      throw CLI::ValidationError("--grid-r/--grid-w1/--grid-w2",
                                 "each grid must contain 0 so the baseline (0,0,0) is searched");
    const dkt::ModelConfig mcfg = gs_model.to_config(gs_seed);
    const dkt::TrainConfig tcfg = gs_train.to_config(gs_seed + 1, dkt::StopSet::validation);

    const dkt::Dataset data = load_dataset(gs_data).dataset;
    auto [train_full, test] = dkt::split_train_test(data, gs_test_fraction, gs_seed + 2);
    (void)test;  // reserved for a final refit; the search itself never sees it

    const auto results = dkt::grid_search(train_full, gs_grid, gs_folds, mcfg, tcfg);
    const dkt::MetricsReport* baseline = nullptr;
    for (const auto& r : results)
      if (r.lambdas.is_plain()) baseline = &r.mean;
    const dkt::BestSelection best = dkt::select_best(results, *baseline);

    std::string text = dkt::grid_results_to_text(results);
    char buf[160];
    std::snprintf(buf, sizeof buf, "selected lambda_r=%g lambda_w1=%g lambda_w2=%g%s\n",
                  best.lambdas.lambda_r, best.lambdas.lambda_w1, best.lambdas.lambda_w2,
                  best.fell_back_to_baseline
                      ? " (warning: no candidate improved w1; baseline returned)"
                      : "");
    text += buf;
    if (!gs_out.empty()) write_text_file(gs_out, text);
    std::fputs(text.c_str(), stdout);
  });

  // --- heatmap ----------------------------------------------------------------
  auto* hm = app.add_subcommand("heatmap", "Export one student's prediction heatmap data");
  std::string hm_ckpt, hm_data, hm_prefix;
  std::size_t hm_student = 0;
  hm->add_option("--checkpoint", hm_ckpt, "Checkpoint path")->required();
  hm->add_option("--data", hm_data, "Triplet-log dataset")->required();
  hm->add_option("--student", hm_student, "Student index within the dataset")->required();
  hm->add_option("--out-prefix", hm_prefix, "Prefix for .csv/.heatmap.svg/.lines.svg")
      ->required();
  hm->callback([&] {
    const dkt::Checkpoint ckpt = dkt::load_checkpoint_file(hm_ckpt);
    const dkt::Dataset data = load_dataset(hm_data).dataset;
    if (hm_student >= data.sequences.size())
      throw DataError("student index " + std::to_string(hm_student) + " out of range [0," +
                      std::to_string(data.sequences.size()) + ")");
    if (data.num_skills > dkt::model_num_skills(ckpt.params))
      throw DataError("skill-count mismatch between dataset and checkpoint");
    const auto& seq = data.sequences[hm_student];
    const auto trace = dkt::forward_sequence(seq, ckpt.params, ckpt.config, dkt::RunMode::infer);
    const dkt::HeatmapExport h = dkt::make_heatmap(trace, seq);
    {
      std::ofstream out(hm_prefix + ".csv");
      if (!out) throw DataError("cannot write " + hm_prefix + ".csv");
      dkt::write_heatmap_csv(h, out);
    }
    {
      std::ofstream out(hm_prefix + ".heatmap.svg");
      if (!out) throw DataError("cannot write " + hm_prefix + ".heatmap.svg");
      dkt::write_heatmap_svg(h, out);
    }
    {
      std::ofstream out(hm_prefix + ".lines.svg");
      if (!out) throw DataError("cannot write " + hm_prefix + ".lines.svg");
      dkt::write_lineplot_svg(h, out);
    }
    std::printf("wrote %s.csv (+.heatmap.svg, .lines.svg): %zu skills x %zu steps\n",
                hm_prefix.c_str(), h.skills.size(), h.time_steps());
  });

  // --- matrix -----------------------------------------------------------------
  auto* mx = app.add_subcommand("matrix", "Correctness matrix for an ordered skill pair");
  std::string mx_data, mx_out;
  int mx_a = 0, mx_b = 0;
  mx->add_option("--data", mx_data, "Triplet-log dataset")->required();
  mx->add_option("--skill-a", mx_a, "Current skill id")->required();
  mx->add_option("--skill-b", mx_b, "Next skill id")->required();
  mx->add_option("--out", mx_out, "Optional output path");
  mx->callback([&] {
    const dkt::Dataset data = load_dataset(mx_data).dataset;
    if (mx_a < 0 || mx_a >= data.num_skills || mx_b < 0 || mx_b >= data.num_skills)
      throw DataError("skill id out of range [0," + std::to_string(data.num_skills) + ")");
    const dkt::CorrectnessMatrix m = dkt::correctness_matrix(data, mx_a, mx_b);
    print_matrix(m, std::cout);
    if (!mx_out.empty()) {
      std::ostringstream text;
      print_matrix(m, text);
      write_text_file(mx_out, text.str());
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dkt::TrainingDiverged& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const dkt::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const dkt::CheckpointError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
