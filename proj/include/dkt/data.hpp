#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkt/core.hpp"
#include "dkt/rng.hpp"

namespace dkt {

// One student's ordered (question id, correctness) pairs.
struct InteractionSequence {
  std::vector<int> questions;
  std::vector<int> answers;  // 0/1

  std::size_t length() const { return questions.size(); }
};

struct Dataset {
  std::vector<InteractionSequence> sequences;
  int num_skills = 0;  // M; at least 1 + max question id

  std::size_t total_interactions() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.length();
    return n;
  }

  // Normalizer of the per-step losses: sum over students of (T_i - 1).
  std::size_t prediction_terms() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.length() - 1;
    return n;
  }

  double mean_correctness() const {
    std::size_t total = 0, correct = 0;
    for (const auto& s : sequences) {
      total += s.length();
      for (int a : s.answers) correct += static_cast<std::size_t>(a);
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

struct ParseResult {
  Dataset dataset;
  std::size_t dropped_short = 0;                // sequences with T < 2, removed
  std::map<std::string, int> skill_labels;      // external tag ("s32") -> id, for report labeling
};

namespace detail {

inline long parse_int(const std::string& field, std::size_t line, const char* what) {
  std::size_t pos = 0;
  long value = 0;
  try {
    value = std::stol(field, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, std::string("malformed ") + what + " '" + field + "'");
  }
  while (pos < field.size() && (field[pos] == ' ' || field[pos] == '\t')) ++pos;
  if (pos != field.size())
    throw ParseError(line, std::string("malformed ") + what + " '" + field + "'");
  return value;
}

inline std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(text.substr(start));
      break;
    }
    fields.push_back(text.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace detail

// Triplet log format: records of exactly three text lines -- the sequence
// length T, then T comma-separated skill ids, then T comma-separated 0/1
// answers. This is the community "builder" export, so public datasets load
// without conversion. Sequences with T < 2 carry no prediction target and
// are dropped (counted in the result).
inline ParseResult parse_triplet_log(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && detail::is_blank(lines.back())) lines.pop_back();
  if (lines.size() % 3 != 0)
    throw ParseError(lines.size(), "incomplete record: line count not a multiple of 3");

  ParseResult result;
  int max_id = -1;
  for (std::size_t rec = 0; rec < lines.size(); rec += 3) {
    const std::size_t len_line = rec + 1;  // 1-based for messages
    const long t = detail::parse_int(lines[rec], len_line, "sequence length");
    if (t < 0) throw ParseError(len_line, "negative sequence length");

    const auto id_fields = detail::split_csv(lines[rec + 1]);
    if (static_cast<long>(id_fields.size()) != t)
      throw ParseError(len_line + 1, "expected " + std::to_string(t) + " skill ids, got " +
                                         std::to_string(id_fields.size()));
    const auto ans_fields = detail::split_csv(lines[rec + 2]);
    if (static_cast<long>(ans_fields.size()) != t)
      throw ParseError(len_line + 2, "expected " + std::to_string(t) + " answers, got " +
                                         std::to_string(ans_fields.size()));

    InteractionSequence seq;
    seq.questions.reserve(static_cast<std::size_t>(t));
    seq.answers.reserve(static_cast<std::size_t>(t));
    for (const auto& f : id_fields) {
      const long q = detail::parse_int(f, len_line + 1, "skill id");
      if (q < 0) throw ParseError(len_line + 1, "negative skill id");
      seq.questions.push_back(static_cast<int>(q));
      max_id = std::max(max_id, static_cast<int>(q));
    }
    for (const auto& f : ans_fields) {
      const long a = detail::parse_int(f, len_line + 2, "answer");
      if (a != 0 && a != 1)
        throw ParseError(len_line + 2, "answer outside {0,1}: " + std::to_string(a));
      seq.answers.push_back(static_cast<int>(a));
    }

    if (t < 2) {
      ++result.dropped_short;
      continue;
    }
    result.dataset.sequences.push_back(std::move(seq));
  }
  result.dataset.num_skills = max_id + 1;
  for (const auto& s : result.dataset.sequences)
    for (int q : s.questions) result.skill_labels.emplace("s" + std::to_string(q), q);
  return result;
}

inline void serialize_triplet_log(const Dataset& d, std::ostream& out) {
  for (const auto& s : d.sequences) {
    out << s.length() << '\n';
    for (std::size_t i = 0; i < s.questions.size(); ++i)
      out << (i ? "," : "") << s.questions[i];
    out << '\n';
    for (std::size_t i = 0; i < s.answers.size(); ++i) out << (i ? "," : "") << s.answers[i];
    out << '\n';
  }
}

enum class EncodingScheme { compressed, concat };

inline const char* to_string(EncodingScheme s) {
  return s == EncodingScheme::compressed ? "compressed" : "concat";
}

inline EncodingScheme encoding_from_string(const std::string& s) {
  if (s == "compressed") return EncodingScheme::compressed;
  if (s == "concat") return EncodingScheme::concat;
  throw std::invalid_argument("unknown encoding scheme '" + s + "'");
}

// Indices of the nonzero entries of the encoded input vector; at most two.
struct InputHots {
  std::array<int, 2> idx{};
  int count = 0;
};

// The nonzero structure of encode_input. compressed: a single 1 at q + a*M.
// concat: a 1 at q, plus a 1 at M + q iff the answer was correct.
inline InputHots input_hots(int q, int a, int num_skills, EncodingScheme scheme) {
  if (q < 0 || q >= num_skills)
    throw std::invalid_argument("encode_input: question id " + std::to_string(q) +
                                " out of range [0," + std::to_string(num_skills) + ")");
  if (a != 0 && a != 1) throw std::invalid_argument("encode_input: answer outside {0,1}");
  InputHots h;
  if (scheme == EncodingScheme::compressed) {
    h.idx[0] = q + a * num_skills;
    h.count = 1;
  } else {
    h.idx[0] = q;
    h.count = 1;
    if (a == 1) {
      h.idx[1] = num_skills + q;
      h.count = 2;
    }
  }
  return h;
}

inline Vector encode_input(int q, int a, int num_skills, EncodingScheme scheme) {
  const InputHots h = input_hots(q, a, num_skills, scheme);
  Vector x(2 * static_cast<std::size_t>(num_skills), 0.0);
  for (int i = 0; i < h.count; ++i) x[static_cast<std::size_t>(h.idx[i])] = 1.0;
  return x;
}

// Student-level partition: whole sequences, never split within a student.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double test_fraction,
                                                    std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split_train_test: test_fraction must be in (0,1)");
  const std::size_t n = d.sequences.size();
  if (n < 2) throw std::invalid_argument("split_train_test: need at least 2 sequences");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  Dataset train, test;
  train.num_skills = test.num_skills = d.num_skills;
  for (std::size_t i = 0; i < n; ++i)
    (i < n_test ? test : train).sequences.push_back(d.sequences[order[i]]);
  return {std::move(train), std::move(test)};
}

// k disjoint validation folds covering the dataset; deterministic given seed.
inline std::vector<std::pair<Dataset, Dataset>> kfold(const Dataset& d, int k,
                                                      std::uint64_t seed) {
  const std::size_t n = d.sequences.size();
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  if (static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("kfold: k exceeds number of sequences");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::pair<Dataset, Dataset>> folds(static_cast<std::size_t>(k));
  for (auto& [train, val] : folds) train.num_skills = val.num_skills = d.num_skills;
  for (std::size_t j = 0; j < n; ++j) {
    const auto fold_of_j = j % static_cast<std::size_t>(k);
    for (std::size_t f = 0; f < folds.size(); ++f)
      (f == fold_of_j ? folds[f].second : folds[f].first)
          .sequences.push_back(d.sequences[order[j]]);
  }
  return folds;
}

}  // namespace dkt
