// Evaluation protocols: Top-k and class-mean accuracy, the Obs/Pred dense
// anticipation table, and segmentation scores (F1@overlap, edit, accuracy).
// All values are percentages in [0, 100].
#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tagg/snippets.hpp"
#include "tagg/synth.hpp"

namespace tagg {

// Fraction of samples whose target is among the k best scores. Equal scores
// rank by class index, lowest first.
double topk_accuracy(const std::vector<std::vector<double>>& scores,
                     const std::vector<int>& targets, int k);

// Unweighted mean over classes (present in the targets) of per-class recall.
double class_mean_accuracy(const std::vector<int>& predictions, const std::vector<int>& targets);

struct SegScores {
  double f1_10 = 0.0;
  double f1_25 = 0.0;
  double f1_50 = 0.0;
  double edit = 0.0;
  double frame_acc = 0.0;

  bool operator==(const SegScores&) const = default;
};

// Segment scores for one frame labeling. F1@tau matches predicted segments
// greedily by descending IoU against same-label ground-truth segments; edit
// is 100*(1 - Levenshtein / max(segment counts)).
SegScores segmentation_scores(const std::vector<int>& predicted, const std::vector<int>& truth);

// Raw match counts so callers can pool F1 across sequences.
struct SegMatchCounts {
  int matched_10 = 0, matched_25 = 0, matched_50 = 0;
  int n_pred = 0, n_truth = 0;
};
SegMatchCounts segmentation_matches(const std::vector<int>& predicted,
                                    const std::vector<int>& truth);

double levenshtein_edit_score(const std::vector<int>& predicted, const std::vector<int>& truth);

// Predicts frame labels for `horizon` frames following the cut (exclusive).
using DensePredictor =
    std::function<std::vector<int>(const FrameSequence& seq, int cut, int horizon)>;

using DenseTable = std::map<std::pair<double, double>, double>;

// For each (obs, pred) pair: cut at floor(obs*T), predict floor(pred*(T-cut))
// frames, pool frames across sequences and score class-mean accuracy.
// Sequences too short for a cell are skipped with a warning.
DenseTable dense_protocol(const std::vector<FrameSequence>& sequences,
                          const DensePredictor& predictor,
                          const std::vector<double>& obs_fracs,
                          const std::vector<double>& pred_fracs,
                          std::vector<std::string>* warnings = nullptr);

// Metric bundle with a lossless key=value text form (17 significant digits).
struct EvalReport {
  std::string task;
  double top1 = 0.0;
  double top5 = 0.0;
  double class_mean = 0.0;
  DenseTable dense;
  SegScores seg;
  double mean_segments_per_sequence = 0.0;
  int samples = 0;

  std::string to_text() const;
  static EvalReport from_text(const std::string& text);
  bool operator==(const EvalReport&) const = default;
};

}  // namespace tagg
