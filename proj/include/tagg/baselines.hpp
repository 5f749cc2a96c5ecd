// Reference next-action predictors over ground-truth segment label
// sequences: transition matrix, longest-suffix lookup table, and a recurrent
// baseline trained on one-hot segment sequences.
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "tagg/model.hpp"

namespace tagg {

// Segment-level label sequence (consecutive duplicates collapsed at fit time).
struct LabeledSequence {
  std::vector<int> labels;
  int activity = -1;
};

std::vector<int> collapse_runs(const std::vector<int>& labels);

struct TransitionMatrix {
  int n_actions = 0;
  double alpha = 0.1;  // add-alpha smoothing
  std::vector<double> counts;                      // n_actions x n_actions
  std::map<int, std::vector<double>> per_activity; // same layout, keyed by Z
  std::vector<double> prior;                       // global next-action counts

  static TransitionMatrix fit(const std::vector<LabeledSequence>& seqs, int n_actions,
                              double alpha = 0.1);
  // Smoothed row distribution for `last` (activity-conditioned when a matrix
  // for that activity exists). Rows sum to 1.
  std::vector<double> row_probs(int last, int activity = -1) const;
  // Argmax of row_probs; with alpha == 0 an unseen action falls back to the
  // global next-action prior. Ties pick the lowest class.
  int predict(int last, int activity = -1) const;
};

struct LookupTable {
  int n_max = 3;
  std::map<std::vector<int>, std::vector<double>> table;  // context -> next counts
  TransitionMatrix tm;  // backoff chain: shorter suffix -> TM -> prior

  static LookupTable fit(const std::vector<LabeledSequence>& seqs, int n_actions, int n_max,
                         double alpha = 0.1);
  int predict(const std::vector<int>& context, int activity = -1) const;
};

struct RnnBaselineConfig {
  int hidden = 512;
  int epochs = 30;
  double lr = 1e-2;
  int batch = 16;
  uint64_t seed = 1;
};

struct RnnBaseline {
  int n_actions = 0;
  LstmParams rnn;
  Linear head;

  static RnnBaseline fit(const std::vector<LabeledSequence>& seqs, int n_actions,
                         const RnnBaselineConfig& cfg);
  // Next action after the given (collapsed) context.
  int predict(const std::vector<int>& context) const;
  std::vector<double> scores(const std::vector<int>& context) const;
};

}  // namespace tagg
