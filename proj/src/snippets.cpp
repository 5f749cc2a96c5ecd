#include "tagg/snippets.hpp"

#include <algorithm>
#include <cmath>

namespace tagg {

Pooling pooling_from_string(const std::string& s) {
  if (s == "max") return Pooling::kMax;
  if (s == "mean") return Pooling::kMean;
  if (s == "sample") return Pooling::kSample;
  throw ConfigError("unknown pooling '" + s + "' (expected max|mean|sample)");
}

std::string pooling_to_string(Pooling p) {
  switch (p) {
    case Pooling::kMax: return "max";
    case Pooling::kMean: return "mean";
    case Pooling::kSample: return "sample";
  }
  return "max";
}

void FrameSequence::validate() const {
  if (features.empty() || features.rank() != 2 || frames() < 1) {
    throw std::invalid_argument("frame sequence needs a T x D feature matrix with T >= 1");
  }
  if (has_labels() && static_cast<int>(frame_labels.size()) != frames()) {
    throw std::invalid_argument("frame label count " + std::to_string(frame_labels.size()) +
                                " does not match T=" + std::to_string(frames()));
  }
  if (fps <= 0.0) throw std::invalid_argument("fps must be positive");
}

std::vector<Segment> FrameSequence::segments() const {
  std::vector<Segment> out;
  if (!has_labels()) return out;
  int begin = 0;
  for (int t = 1; t <= static_cast<int>(frame_labels.size()); ++t) {
    if (t == static_cast<int>(frame_labels.size()) || frame_labels[t] != frame_labels[begin]) {
      out.push_back(Segment{begin, t - 1, frame_labels[begin]});
      begin = t;
    }
  }
  return out;
}

std::vector<std::pair<int, int>> snippet_partition(int i, int j, int k_parts) {
  if (j < i) {
    throw std::invalid_argument("snippet range end " + std::to_string(j) + " precedes start " +
                                std::to_string(i));
  }
  if (k_parts < 1) throw std::invalid_argument("snippet count must be >= 1");
  const int64_t len = j - i + 1;
  std::vector<std::pair<int, int>> parts;
  parts.reserve(static_cast<size_t>(k_parts));
  for (int p = 0; p < k_parts; ++p) {
    const int lo = i + static_cast<int>(static_cast<int64_t>(p) * len / k_parts);
    int hi = i + static_cast<int>(static_cast<int64_t>(p + 1) * len / k_parts) - 1;
    // Surplus parts (K > frame count) collapse onto the nearest single frame.
    if (hi < lo) hi = lo;
    parts.emplace_back(lo, hi);
  }
  return parts;
}

Tensor pool_snippets(const FrameSequence& seq, int i, int j, int k_parts, Pooling pooling) {
  seq.validate();
  if (i < 0 || j >= seq.frames()) {
    throw std::invalid_argument("snippet range [" + std::to_string(i) + "," + std::to_string(j) +
                                "] outside sequence of " + std::to_string(seq.frames()) +
                                " frames");
  }
  const auto parts = snippet_partition(i, j, k_parts);
  const int dim = seq.dim();
  const double* feat = seq.features.data();
  std::vector<double> out(static_cast<size_t>(dim) * k_parts);
  for (int p = 0; p < k_parts; ++p) {
    const auto [lo, hi] = parts[static_cast<size_t>(p)];
    for (int d = 0; d < dim; ++d) {
      double v;
      switch (pooling) {
        case Pooling::kMax: {
          v = feat[static_cast<int64_t>(lo) * dim + d];
          for (int t = lo + 1; t <= hi; ++t)
            v = std::max(v, feat[static_cast<int64_t>(t) * dim + d]);
          break;
        }
        case Pooling::kMean: {
          double acc = 0.0;
          for (int t = lo; t <= hi; ++t) acc += feat[static_cast<int64_t>(t) * dim + d];
          v = acc / (hi - lo + 1);
          break;
        }
        case Pooling::kSample: {
          const int center = lo + (hi - lo) / 2;
          v = feat[static_cast<int64_t>(center) * dim + d];
          break;
        }
        default: v = 0.0;
      }
      out[static_cast<size_t>(d) * k_parts + p] = v;
    }
  }
  return Tensor::from({dim, k_parts}, std::move(out));
}

std::vector<Tensor> build_recent_bank(const FrameSequence& seq, int t, const SnippetConfig& cfg) {
  if (t < 1) throw std::invalid_argument("recent bank needs t >= 1");
  std::vector<Tensor> bank;
  bank.reserve(cfg.recent_starts_s.size());
  for (double offset_s : cfg.recent_starts_s) {
    const int start = std::max(0, t - static_cast<int>(std::llround(offset_s * seq.fps)));
    bank.push_back(pool_snippets(seq, start, t, cfg.recent_count, cfg.pooling));
  }
  return bank;
}

std::vector<Tensor> build_spanning_bank(const FrameSequence& seq, int t, const SnippetConfig& cfg) {
  if (t < 1) throw std::invalid_argument("spanning bank needs t >= 1");
  const int start = std::min(t - 1, static_cast<int>(std::floor(cfg.spanning_start_fraction * t)));
  std::vector<Tensor> bank;
  bank.reserve(cfg.spanning_scales.size());
  for (int k : cfg.spanning_scales) {
    bank.push_back(pool_snippets(seq, std::max(0, start), t, k, cfg.pooling));
  }
  return bank;
}

SnippetBank build_banks(const FrameSequence& seq, int t, const SnippetConfig& cfg) {
  SnippetBank bank;
  bank.recent = build_recent_bank(seq, t, cfg);
  bank.spanning = build_spanning_bank(seq, t, cfg);
  bank.pooling = cfg.pooling;
  return bank;
}

FrameSequence slice_frames(const FrameSequence& seq, int first, int last) {
  seq.validate();
  first = std::max(0, first);
  last = std::min(seq.frames() - 1, last);
  if (last < first) throw std::invalid_argument("empty frame slice");
  const int dim = seq.dim();
  const int n = last - first + 1;
  std::vector<double> vals(static_cast<size_t>(n) * dim);
  std::copy_n(seq.features.data() + static_cast<int64_t>(first) * dim,
              static_cast<int64_t>(n) * dim, vals.begin());
  FrameSequence out;
  out.features = Tensor::from({n, dim}, std::move(vals));
  if (seq.has_labels()) {
    out.frame_labels.assign(seq.frame_labels.begin() + first, seq.frame_labels.begin() + last + 1);
  }
  out.activity = seq.activity;
  out.fps = seq.fps;
  return out;
}

FrameSequence labels_to_onehot(const FrameSequence& seq, int n_actions) {
  seq.validate();
  if (!seq.has_labels()) throw std::invalid_argument("one-hot input mode requires frame labels");
  const int n = seq.frames();
  std::vector<double> vals(static_cast<size_t>(n) * n_actions, 0.0);
  for (int t = 0; t < n; ++t) {
    const int label = seq.frame_labels[static_cast<size_t>(t)];
    if (label < 0 || label >= n_actions) {
      throw std::invalid_argument("frame label " + std::to_string(label) +
                                  " outside action vocabulary of " + std::to_string(n_actions));
    }
    vals[static_cast<size_t>(t) * n_actions + label] = 1.0;
  }
  FrameSequence out;
  out.features = Tensor::from({n, n_actions}, std::move(vals));
  out.frame_labels = seq.frame_labels;
  out.activity = seq.activity;
  out.fps = seq.fps;
  return out;
}

}  // namespace tagg
