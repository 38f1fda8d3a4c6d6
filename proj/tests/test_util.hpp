#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "dkt/data.hpp"
#include "dkt/model.hpp"
#include "dkt/rng.hpp"

namespace testutil {

// Scratch directory under the build tree, cleaned up on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& hint) {
    const auto base = std::filesystem::temp_directory_path() / "dkt_tests";
    std::filesystem::create_directories(base);
    for (int i = 0;; ++i) {
      auto candidate = base / (hint + "_" + std::to_string(::getpid()) + "_" + std::to_string(i));
      if (!std::filesystem::exists(candidate)) {
        std::filesystem::create_directories(candidate);
        path = candidate;
        break;
      }
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline dkt::InteractionSequence random_sequence(dkt::Rng& rng, int num_skills, int len) {
  dkt::InteractionSequence s;
  for (int t = 0; t < len; ++t) {
    s.questions.push_back(static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(num_skills))));
    s.answers.push_back(rng.bernoulli(0.5) ? 1 : 0);
  }
  return s;
}

inline dkt::Dataset random_dataset(dkt::Rng& rng, int num_skills, int n_seqs, int min_len,
                                   int max_len) {
  dkt::Dataset d;
  d.num_skills = num_skills;
  for (int i = 0; i < n_seqs; ++i) {
    const int len =
        min_len + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(max_len - min_len + 1)));
    d.sequences.push_back(random_sequence(rng, num_skills, len));
  }
  return d;
}

// Synthetic prediction traces with outputs in (lo, hi), independent of any
// model: the substrate for objective/metrics oracles.
inline std::vector<dkt::PredictionTrace> random_traces(dkt::Rng& rng,
                                                       const std::vector<dkt::InteractionSequence>& seqs,
                                                       int num_skills, double lo = 0.05,
                                                       double hi = 0.95) {
  std::vector<dkt::PredictionTrace> traces(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    for (std::size_t t = 0; t < seqs[i].length(); ++t) {
      dkt::Vector y(static_cast<std::size_t>(num_skills));
      for (double& v : y) v = lo + (hi - lo) * rng.uniform01();
      traces[i].outputs.push_back(std::move(y));
    }
  }
  return traces;
}

// Fills every parameter tensor (weights and biases) with Normal(0, stddev).
inline void randomize_params(dkt::ModelParams& params, dkt::Rng& rng, double stddev = 0.5) {
  for (auto& span : dkt::tensor_spans(params))
    for (double& v : span) v = rng.normal(0.0, stddev);
}

}  // namespace testutil
