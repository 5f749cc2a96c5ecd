#include "tagg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace tagg {

double topk_accuracy(const std::vector<std::vector<double>>& scores,
                     const std::vector<int>& targets, int k) {
  if (scores.empty() || scores.size() != targets.size()) {
    throw std::invalid_argument("topk_accuracy: empty input or size mismatch");
  }
  if (k < 1) throw std::invalid_argument("topk_accuracy: k must be >= 1");
  int hits = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const int target = targets[i];
    if (target < 0 || target >= static_cast<int>(s.size())) {
      throw std::invalid_argument("topk_accuracy: target outside score vector");
    }
    // Rank = strictly better scores, plus equal scores at lower indices.
    int rank = 0;
    for (int c = 0; c < static_cast<int>(s.size()); ++c) {
      if (s[static_cast<size_t>(c)] > s[static_cast<size_t>(target)] ||
          (s[static_cast<size_t>(c)] == s[static_cast<size_t>(target)] && c < target)) {
        ++rank;
      }
    }
    if (rank < k) ++hits;
  }
  return 100.0 * hits / static_cast<double>(scores.size());
}

double class_mean_accuracy(const std::vector<int>& predictions, const std::vector<int>& targets) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("class_mean_accuracy: length mismatch");
  }
  if (targets.empty()) throw std::invalid_argument("class_mean_accuracy: empty input");
  std::map<int, std::pair<int, int>> per_class;  // class -> (correct, total)
  for (size_t i = 0; i < targets.size(); ++i) {
    auto& [correct, total] = per_class[targets[i]];
    correct += predictions[i] == targets[i];
    ++total;
  }
  double acc = 0.0;
  for (const auto& [cls, counts] : per_class) {
    acc += static_cast<double>(counts.first) / counts.second;
  }
  return 100.0 * acc / static_cast<double>(per_class.size());
}

namespace {

std::vector<Segment> to_segments(const std::vector<int>& labels) {
  FrameSequence seq;
  seq.features = Tensor::zeros({static_cast<int>(labels.size()), 1});
  seq.frame_labels = labels;
  return seq.segments();
}

int matched_at(const std::vector<Segment>& pred, const std::vector<Segment>& truth, double tau) {
  struct Cand {
    double iou;
    size_t p, t;
  };
  std::vector<Cand> cands;
  for (size_t p = 0; p < pred.size(); ++p) {
    for (size_t t = 0; t < truth.size(); ++t) {
      if (pred[p].action != truth[t].action) continue;
      const int inter = std::min(pred[p].end, truth[t].end) -
                        std::max(pred[p].begin, truth[t].begin) + 1;
      if (inter <= 0) continue;
      const int uni = std::max(pred[p].end, truth[t].end) -
                      std::min(pred[p].begin, truth[t].begin) + 1;
      const double iou = static_cast<double>(inter) / uni;
      if (iou >= tau) cands.push_back({iou, p, t});
    }
  }
  // Greedy matching in descending IoU; each side used once.
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.p != b.p) return a.p < b.p;
    return a.t < b.t;
  });
  std::vector<bool> p_used(pred.size(), false), t_used(truth.size(), false);
  int matched = 0;
  for (const Cand& c : cands) {
    if (p_used[c.p] || t_used[c.t]) continue;
    p_used[c.p] = t_used[c.t] = true;
    ++matched;
  }
  return matched;
}

double f1_from_counts(int matched, int n_pred, int n_truth) {
  if (n_pred == 0 && n_truth == 0) return 100.0;
  const double precision = n_pred ? static_cast<double>(matched) / n_pred : 0.0;
  const double recall = n_truth ? static_cast<double>(matched) / n_truth : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

}  // namespace

SegMatchCounts segmentation_matches(const std::vector<int>& predicted,
                                    const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("segmentation: label lengths differ (" +
                                std::to_string(predicted.size()) + " vs " +
                                std::to_string(truth.size()) + ")");
  }
  if (predicted.empty()) throw std::invalid_argument("segmentation: empty labeling");
  const auto pred_segs = to_segments(predicted);
  const auto true_segs = to_segments(truth);
  SegMatchCounts counts;
  counts.n_pred = static_cast<int>(pred_segs.size());
  counts.n_truth = static_cast<int>(true_segs.size());
  counts.matched_10 = matched_at(pred_segs, true_segs, 0.10);
  counts.matched_25 = matched_at(pred_segs, true_segs, 0.25);
  counts.matched_50 = matched_at(pred_segs, true_segs, 0.50);
  return counts;
}

double levenshtein_edit_score(const std::vector<int>& predicted, const std::vector<int>& truth) {
  const auto a = to_segments(predicted);
  const auto b = to_segments(truth);
  const size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) dp[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) dp[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int sub = a[i - 1].action == b[j - 1].action ? 0 : 1;
      dp[i][j] = std::min({dp[i - 1][j] + 1, dp[i][j - 1] + 1, dp[i - 1][j - 1] + sub});
    }
  }
  const double denom = static_cast<double>(std::max(n, m));
  if (denom == 0.0) return 100.0;
  return 100.0 * (1.0 - dp[n][m] / denom);
}

SegScores segmentation_scores(const std::vector<int>& predicted, const std::vector<int>& truth) {
  const SegMatchCounts counts = segmentation_matches(predicted, truth);
  SegScores s;
  s.f1_10 = f1_from_counts(counts.matched_10, counts.n_pred, counts.n_truth);
  s.f1_25 = f1_from_counts(counts.matched_25, counts.n_pred, counts.n_truth);
  s.f1_50 = f1_from_counts(counts.matched_50, counts.n_pred, counts.n_truth);
  s.edit = levenshtein_edit_score(predicted, truth);
  int correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  s.frame_acc = 100.0 * correct / static_cast<double>(truth.size());
  return s;
}

DenseTable dense_protocol(const std::vector<FrameSequence>& sequences,
                          const DensePredictor& predictor,
                          const std::vector<double>& obs_fracs,
                          const std::vector<double>& pred_fracs,
                          std::vector<std::string>* warnings) {
  DenseTable table;
  for (double obs : obs_fracs) {
    for (double pred : pred_fracs) {
      std::vector<int> all_pred, all_true;
      for (size_t s = 0; s < sequences.size(); ++s) {
        const FrameSequence& seq = sequences[s];
        const int total = seq.frames();
        const int cut = static_cast<int>(std::floor(obs * total));
        const int horizon = static_cast<int>(std::floor(pred * (total - cut)));
        if (cut < 1 || horizon < 1 || cut + horizon > total) {
          if (warnings) {
            warnings->push_back("sequence " + std::to_string(s) + " too short for obs=" +
                                std::to_string(obs) + " pred=" + std::to_string(pred) +
                                ", skipped");
          }
          continue;
        }
        std::vector<int> hat = predictor(seq, cut, horizon);
        if (static_cast<int>(hat.size()) != horizon) {
          throw std::invalid_argument("dense predictor returned " + std::to_string(hat.size()) +
                                      " frames, expected " + std::to_string(horizon));
        }
        all_pred.insert(all_pred.end(), hat.begin(), hat.end());
        all_true.insert(all_true.end(), seq.frame_labels.begin() + cut,
                        seq.frame_labels.begin() + cut + horizon);
      }
      if (!all_true.empty()) {
        table[{obs, pred}] = class_mean_accuracy(all_pred, all_true);
      }
    }
  }
  return table;
}

// --- report serialization ------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "task = " << task << "\n";
  os << "samples = " << samples << "\n";
  os << "top1 = " << fmt_double(top1) << "\n";
  os << "top5 = " << fmt_double(top5) << "\n";
  os << "class_mean = " << fmt_double(class_mean) << "\n";
  os << "seg.f1_10 = " << fmt_double(seg.f1_10) << "\n";
  os << "seg.f1_25 = " << fmt_double(seg.f1_25) << "\n";
  os << "seg.f1_50 = " << fmt_double(seg.f1_50) << "\n";
  os << "seg.edit = " << fmt_double(seg.edit) << "\n";
  os << "seg.frame_acc = " << fmt_double(seg.frame_acc) << "\n";
  os << "mean_segments_per_sequence = " << fmt_double(mean_segments_per_sequence) << "\n";
  for (const auto& [key, value] : dense) {
    os << "dense " << fmt_double(key.first) << " " << fmt_double(key.second) << " "
       << fmt_double(value) << "\n";
  }
  return os.str();
}

EvalReport EvalReport::from_text(const std::string& text) {
  EvalReport r;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "dense") {
      double obs, pred, value;
      ls >> obs >> pred >> value;
      r.dense[{obs, pred}] = value;
      continue;
    }
    std::string eq, value;
    ls >> eq >> value;
    if (eq != "=") throw IoError("malformed report line: " + line);
    if (key == "task") r.task = value;
    else if (key == "samples") r.samples = std::stoi(value);
    else if (key == "top1") r.top1 = std::stod(value);
    else if (key == "top5") r.top5 = std::stod(value);
    else if (key == "class_mean") r.class_mean = std::stod(value);
    else if (key == "seg.f1_10") r.seg.f1_10 = std::stod(value);
    else if (key == "seg.f1_25") r.seg.f1_25 = std::stod(value);
    else if (key == "seg.f1_50") r.seg.f1_50 = std::stod(value);
    else if (key == "seg.edit") r.seg.edit = std::stod(value);
    else if (key == "seg.frame_acc") r.seg.frame_acc = std::stod(value);
    else if (key == "mean_segments_per_sequence") r.mean_segments_per_sequence = std::stod(value);
    else throw IoError("unknown report key: " + key);
  }
  return r;
}

}  // namespace tagg
