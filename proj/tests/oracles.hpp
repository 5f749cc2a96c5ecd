// Brute-force metric oracles, independent of src/metrics.cpp.
#pragma once

#include <algorithm>
#include <map>
#include <vector>

namespace tagg::oracles {

inline double topk_bf(const std::vector<std::vector<double>>& scores,
                      const std::vector<int>& targets, int k) {
  int hits = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    std::vector<std::pair<double, int>> order;
    for (int c = 0; c < static_cast<int>(scores[i].size()); ++c) {
      order.emplace_back(scores[i][static_cast<size_t>(c)], c);
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int r = 0; r < k && r < static_cast<int>(order.size()); ++r) {
      if (order[static_cast<size_t>(r)].second == targets[i]) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * hits / static_cast<double>(scores.size());
}

inline double class_mean_bf(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::map<int, int> correct, total;
  for (size_t i = 0; i < truth.size(); ++i) {
    total[truth[i]] += 1;
    if (pred[i] == truth[i]) correct[truth[i]] += 1;
  }
  double acc = 0.0;
  for (const auto& [cls, n] : total) acc += static_cast<double>(correct[cls]) / n;
  return 100.0 * acc / static_cast<double>(total.size());
}

struct Run {
  int begin, end, action;
};

inline std::vector<Run> runs_of(const std::vector<int>& labels) {
  std::vector<Run> out;
  size_t begin = 0;
  for (size_t t = 1; t <= labels.size(); ++t) {
    if (t == labels.size() || labels[t] != labels[begin]) {
      out.push_back(Run{static_cast<int>(begin), static_cast<int>(t) - 1, labels[begin]});
      begin = t;
    }
  }
  return out;
}

// Same greedy-by-descending-IoU rule, re-derived with naive scans.
inline double f1_bf(const std::vector<int>& pred, const std::vector<int>& truth, double tau) {
  const auto ps = runs_of(pred);
  const auto ts = runs_of(truth);
  std::vector<bool> pu(ps.size(), false), tu(ts.size(), false);
  int matched = 0;
  while (true) {
    double best = -1.0;
    size_t bp = 0, bt = 0;
    for (size_t p = 0; p < ps.size(); ++p) {
      if (pu[p]) continue;
      for (size_t t = 0; t < ts.size(); ++t) {
        if (tu[t] || ps[p].action != ts[t].action) continue;
        const int inter =
            std::min(ps[p].end, ts[t].end) - std::max(ps[p].begin, ts[t].begin) + 1;
        if (inter <= 0) continue;
        const int uni = std::max(ps[p].end, ts[t].end) - std::min(ps[p].begin, ts[t].begin) + 1;
        const double iou = static_cast<double>(inter) / uni;
        if (iou >= tau && iou > best) {
          best = iou;
          bp = p;
          bt = t;
        }
      }
    }
    if (best < 0.0) break;
    pu[bp] = tu[bt] = true;
    ++matched;
  }
  const double precision = ps.empty() ? 0.0 : static_cast<double>(matched) / ps.size();
  const double recall = ts.empty() ? 0.0 : static_cast<double>(matched) / ts.size();
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

// Top-down memoized recursion (the implementation uses a bottom-up table).
inline int lev_bf(const std::vector<int>& a, const std::vector<int>& b, size_t i, size_t j,
                  std::vector<int>* memo = nullptr) {
  std::vector<int> local;
  if (!memo) {
    local.assign((a.size() + 1) * (b.size() + 1), -1);
    memo = &local;
  }
  if (i == 0) return static_cast<int>(j);
  if (j == 0) return static_cast<int>(i);
  int& slot = (*memo)[i * (b.size() + 1) + j];
  if (slot >= 0) return slot;
  const int sub = a[i - 1] == b[j - 1] ? 0 : 1;
  slot = std::min({lev_bf(a, b, i - 1, j, memo) + 1, lev_bf(a, b, i, j - 1, memo) + 1,
                   lev_bf(a, b, i - 1, j - 1, memo) + sub});
  return slot;
}

inline double edit_bf(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::vector<int> pa, ta;
  for (const Run& r : runs_of(pred)) pa.push_back(r.action);
  for (const Run& r : runs_of(truth)) ta.push_back(r.action);
  const double denom = static_cast<double>(std::max(pa.size(), ta.size()));
  if (denom == 0.0) return 100.0;
  return 100.0 * (1.0 - lev_bf(pa, ta, pa.size(), ta.size()) / denom);
}

}  // namespace tagg::oracles
