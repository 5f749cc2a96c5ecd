#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tagg/snippets.hpp"
#include "testutil.hpp"

using namespace tagg;

namespace {

FrameSequence make_seq(int frames, int dim, double fps, Rng& rng) {
  FrameSequence seq;
  seq.features = testutil::random_tensor({frames, dim}, rng);
  seq.fps = fps;
  return seq;
}

FrameSequence column_seq(std::vector<double> vals, double fps = 1.0) {
  FrameSequence seq;
  const int n = static_cast<int>(vals.size());
  seq.features = Tensor::from({n, 1}, std::move(vals));
  seq.fps = fps;
  return seq;
}

}  // namespace

TEST_CASE("pool_snippets on hand inputs") {
  FrameSequence seq = column_seq({1, 5, 3, 2});

  Tensor mx = pool_snippets(seq, 0, 3, 2, Pooling::kMax);
  CHECK(mx.shape() == std::vector<int>{1, 2});
  CHECK(mx.at({0, 0}) == 5);
  CHECK(mx.at({0, 1}) == 3);

  Tensor mean = pool_snippets(seq, 0, 3, 2, Pooling::kMean);
  CHECK(mean.at({0, 0}) == 3.0);
  CHECK(mean.at({0, 1}) == 2.5);

  CHECK_THROWS_AS(pool_snippets(seq, 2, 1, 1, Pooling::kMax), std::invalid_argument);
  CHECK_THROWS_AS(pool_snippets(seq, 0, 9, 1, Pooling::kMax), std::invalid_argument);
}

TEST_CASE("constant features pool to identical columns") {
  FrameSequence seq;
  seq.features = Tensor::full({7, 3}, 4.25);
  seq.fps = 1.0;
  for (int k : {1, 3, 7, 11}) {
    for (Pooling p : {Pooling::kMax, Pooling::kMean, Pooling::kSample}) {
      Tensor pooled = pool_snippets(seq, 0, 6, k, p);
      for (int d = 0; d < 3; ++d)
        for (int c = 0; c < k; ++c) CHECK(pooled.at({d, c}) == 4.25);
    }
  }
}

TEST_CASE("surplus parts repeat the nearest frame") {
  FrameSequence seq = column_seq({7, 9});
  Tensor pooled = pool_snippets(seq, 0, 1, 5, Pooling::kMax);
  CHECK(pooled.shape() == std::vector<int>{1, 5});
  for (int c = 0; c < 5; ++c) {
    CHECK((pooled.at({0, c}) == 7 || pooled.at({0, c}) == 9));
  }
  // Single frame, any K.
  Tensor one = pool_snippets(seq, 1, 1, 4, Pooling::kMean);
  for (int c = 0; c < 4; ++c) CHECK(one.at({0, c}) == 9);
}

TEST_CASE("partition covers the range contiguously") {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const int i = static_cast<int>(rng.below(20));
    const int len = 1 + static_cast<int>(rng.below(50));
    const int k = 1 + static_cast<int>(rng.below(12));
    const auto parts = snippet_partition(i, i + len - 1, k);
    REQUIRE(parts.size() == static_cast<size_t>(k));
    if (k <= len) {
      CHECK(parts.front().first == i);
      CHECK(parts.back().second == i + len - 1);
      for (size_t p = 1; p < parts.size(); ++p) {
        CHECK(parts[p].first == parts[p - 1].second + 1);  // contiguous, no overlap
      }
    } else {
      // Degenerate case still touches every frame.
      std::vector<bool> seen(static_cast<size_t>(len), false);
      for (auto [lo, hi] : parts)
        for (int t = lo; t <= hi; ++t) seen[static_cast<size_t>(t - i)] = true;
      CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    }
  }
}

TEST_CASE("max-pool dominance vs brute-force scan") {
  Rng rng(23);
  FrameSequence seq = make_seq(40, 5, 1.0, rng);
  const auto parts = snippet_partition(3, 33, 7);
  Tensor pooled = pool_snippets(seq, 3, 33, 7, Pooling::kMax);
  for (int p = 0; p < 7; ++p) {
    auto [lo, hi] = parts[static_cast<size_t>(p)];
    for (int d = 0; d < 5; ++d) {
      double mx = seq.features.at({lo, d});
      for (int t = lo; t <= hi; ++t) mx = std::max(mx, seq.features.at({t, d}));
      CHECK(pooled.at({d, p}) == mx);
    }
  }
}

TEST_CASE("recent bank windows and cardinality") {
  Rng rng(29);
  FrameSequence seq = make_seq(31, 4, 1.0, rng);

  SnippetConfig cfg;
  cfg.recent_starts_s = {10, 20};
  cfg.recent_count = 5;
  auto bank = build_recent_bank(seq, 30, cfg);
  REQUIRE(bank.size() == 2);
  CHECK(bank[0].values() == pool_snippets(seq, 20, 30, 5, Pooling::kMax).values());
  CHECK(bank[1].values() == pool_snippets(seq, 10, 30, 5, Pooling::kMax).values());

  // Offset reaching past the sequence start clamps to frame 0.
  cfg.recent_starts_s = {100};
  auto clamped = build_recent_bank(seq, 12, cfg);
  CHECK(clamped[0].values() == pool_snippets(seq, 0, 12, 5, Pooling::kMax).values());

  cfg.recent_starts_s = {5, 10, 15};
  auto three = build_recent_bank(seq, 30, cfg);
  REQUIRE(three.size() == 3);
  for (const Tensor& r : three) CHECK(r.shape() == std::vector<int>{4, 5});

  CHECK_THROWS_AS(build_recent_bank(seq, 0, cfg), std::invalid_argument);
}

TEST_CASE("spanning bank scales and start fraction") {
  Rng rng(31);
  FrameSequence seq = make_seq(64, 3, 1.0, rng);

  SnippetConfig cfg;
  cfg.spanning_scales = {10, 15, 20};
  auto bank = build_spanning_bank(seq, 60, cfg);
  REQUIRE(bank.size() == 3);
  CHECK(bank[0].shape() == std::vector<int>{3, 10});
  CHECK(bank[1].shape() == std::vector<int>{3, 15});
  CHECK(bank[2].shape() == std::vector<int>{3, 20});
  CHECK(bank[0].values() == pool_snippets(seq, 0, 60, 10, Pooling::kMax).values());

  cfg.spanning_start_fraction = 0.5;
  auto half = build_spanning_bank(seq, 60, cfg);
  CHECK(half[0].values() == pool_snippets(seq, 30, 60, 10, Pooling::kMax).values());

  // Fraction high enough that the start clamps to t-1: recent-only regime.
  cfg.spanning_start_fraction = 1.0;
  auto tail = build_spanning_bank(seq, 60, cfg);
  CHECK(tail[0].values() == pool_snippets(seq, 59, 60, 10, Pooling::kMax).values());
}

TEST_CASE("banks built at an earlier t ignore appended frames") {
  Rng rng(37);
  FrameSequence longer = make_seq(50, 4, 1.0, rng);
  FrameSequence shorter = slice_frames(longer, 0, 39);

  SnippetConfig cfg;
  cfg.recent_starts_s = {8, 16};
  cfg.recent_count = 4;
  cfg.spanning_scales = {6, 9};
  SnippetBank a = build_banks(shorter, 39, cfg);
  SnippetBank b = build_banks(longer, 39, cfg);
  for (size_t i = 0; i < a.recent.size(); ++i) CHECK(a.recent[i].values() == b.recent[i].values());
  for (size_t i = 0; i < a.spanning.size(); ++i)
    CHECK(a.spanning[i].values() == b.spanning[i].values());
}

TEST_CASE("pooling modes coincide on length-1 parts") {
  Rng rng(41);
  FrameSequence seq = make_seq(6, 3, 1.0, rng);
  Tensor mx = pool_snippets(seq, 0, 5, 6, Pooling::kMax);
  Tensor mean = pool_snippets(seq, 0, 5, 6, Pooling::kMean);
  Tensor sample = pool_snippets(seq, 0, 5, 6, Pooling::kSample);
  CHECK(mx.values() == mean.values());
  CHECK(mx.values() == sample.values());
}

TEST_CASE("segments and one-hot features") {
  FrameSequence seq;
  seq.features = Tensor::zeros({7, 2});
  seq.frame_labels = {0, 0, 1, 1, 1, 0, 2};
  seq.fps = 1.0;
  auto segs = seq.segments();
  REQUIRE(segs.size() == 4);
  CHECK(segs[0] == Segment{0, 1, 0});
  CHECK(segs[1] == Segment{2, 4, 1});
  CHECK(segs[2] == Segment{5, 5, 0});
  CHECK(segs[3] == Segment{6, 6, 2});

  FrameSequence hot = labels_to_onehot(seq, 3);
  CHECK(hot.dim() == 3);
  for (int t = 0; t < 7; ++t) {
    for (int d = 0; d < 3; ++d) {
      CHECK(hot.features.at({t, d}) == (seq.frame_labels[static_cast<size_t>(t)] == d ? 1.0 : 0.0));
    }
  }
  CHECK_THROWS_AS(labels_to_onehot(seq, 2), std::invalid_argument);
}
