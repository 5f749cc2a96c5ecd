// Snippet pooling and the recent/spanning feature banks.
//
// A snippet is a contiguous block of frames reduced to one feature vector.
// pool_snippets partitions frames [i, j] (inclusive) into K near-equal parts
// and reduces each part per dimension; the recent bank pools fixed-size
// windows ending at the current frame with several start offsets, the
// spanning bank pools the observed past at several snippet counts.
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "tagg/common.hpp"
#include "tagg/tensor.hpp"

namespace tagg {

enum class Pooling { kMax, kMean, kSample };

Pooling pooling_from_string(const std::string& s);
std::string pooling_to_string(Pooling p);

// Maximal constant run of frame labels, frames [begin, end] inclusive.
struct Segment {
  int begin = 0;
  int end = 0;
  int action = -1;

  int frames() const { return end - begin + 1; }
  bool operator==(const Segment&) const = default;
};

struct FrameSequence {
  Tensor features;               // T x D, off-tape
  std::vector<int> frame_labels; // empty when absent, else length T
  int activity = -1;             // -1 when absent
  double fps = 1.0;

  int frames() const { return features.empty() ? 0 : features.extent(0); }
  int dim() const { return features.empty() ? 0 : features.extent(1); }
  bool has_labels() const { return !frame_labels.empty(); }
  void validate() const;

  // Maximal constant runs of frame_labels.
  std::vector<Segment> segments() const;
};

struct SnippetConfig {
  std::vector<double> recent_starts_s = {10.0, 20.0, 30.0};  // offsets before t
  int recent_count = 5;                                      // K_R
  std::vector<int> spanning_scales = {10, 15, 20};           // {K}
  double spanning_start_fraction = 0.0;                      // 0 = full past
  Pooling pooling = Pooling::kMax;
};

struct SnippetBank {
  std::vector<Tensor> recent;    // one D x K_R matrix per start offset
  std::vector<Tensor> spanning;  // one D x K matrix per scale
  Pooling pooling = Pooling::kMax;
};

// D x K matrix of pooled snippet features for frames [i, j]. When K exceeds
// the frame count, surplus parts repeat the nearest single frame.
Tensor pool_snippets(const FrameSequence& seq, int i, int j, int k_parts, Pooling pooling);

// Recent bank {R_i}: for each offset, frames [max(0, t - offset*fps), t]
// pooled into K_R parts.
std::vector<Tensor> build_recent_bank(const FrameSequence& seq, int t, const SnippetConfig& cfg);

// Spanning bank {S_K}: frames [floor(fraction * t), t] pooled at each scale.
std::vector<Tensor> build_spanning_bank(const FrameSequence& seq, int t, const SnippetConfig& cfg);

SnippetBank build_banks(const FrameSequence& seq, int t, const SnippetConfig& cfg);

// Copy of frames [first, last] inclusive (labels follow; activity kept).
FrameSequence slice_frames(const FrameSequence& seq, int first, int last);

// Replaces features with one-hot rows of the frame labels ("frame GT" input).
FrameSequence labels_to_onehot(const FrameSequence& seq, int n_actions);

// Part boundaries used by pool_snippets: K pairs (lo, hi) inclusive; empty
// parts are returned as (f, f) for the repeated frame.
std::vector<std::pair<int, int>> snippet_partition(int i, int j, int k_parts);

}  // namespace tagg
