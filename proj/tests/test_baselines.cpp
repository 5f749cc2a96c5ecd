#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tagg/baselines.hpp"
#include "tagg/rng.hpp"

using namespace tagg;

namespace {

LabeledSequence seq(std::vector<int> labels, int activity = -1) {
  return LabeledSequence{std::move(labels), activity};
}

}  // namespace

TEST_CASE("collapse_runs") {
  CHECK(collapse_runs({0, 0, 1, 1, 1, 0, 2, 2}) == std::vector<int>{0, 1, 0, 2});
  CHECK(collapse_runs({}) == std::vector<int>{});
}

TEST_CASE("transition matrix counts and prediction") {
  // A=0, B=1, C=2; training {A->B, A->B, B->C}.
  auto tm = TransitionMatrix::fit({seq({0, 1}), seq({0, 1}), seq({1, 2})}, 3);
  CHECK(tm.predict(0) == 1);
  CHECK(tm.predict(1) == 2);

  auto single = TransitionMatrix::fit({seq({0, 1})}, 3);
  CHECK(single.predict(0) == 1);

  CHECK_THROWS_AS(TransitionMatrix::fit({seq({0})}, 3), std::invalid_argument);
  CHECK_THROWS_AS(tm.predict(7), std::invalid_argument);
}

TEST_CASE("transition rows normalize to one after smoothing") {
  auto tm = TransitionMatrix::fit({seq({0, 1, 2, 0, 2, 1})}, 4, 0.1);
  for (int last = 0; last < 4; ++last) {
    auto row = tm.row_probs(last);
    double total = 0.0;
    for (double p : row) total += p;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("unsmoothed unseen action falls back to the global prior") {
  // Action 3 never occurs as a predecessor; prior argmax is 1 (appears twice
  // as a successor).
  auto tm = TransitionMatrix::fit({seq({0, 1}), seq({2, 1})}, 4, 0.0);
  CHECK(tm.predict(3) == 1);
}

TEST_CASE("per-activity matrices override the global one when supplied") {
  auto tm = TransitionMatrix::fit({seq({0, 1}, 7), seq({0, 1}, 7), seq({0, 2}, 8)}, 3);
  CHECK(tm.predict(0, 7) == 1);
  CHECK(tm.predict(0, 8) == 2);
  CHECK(tm.predict(0) == 1);       // global counts: 0->1 twice, 0->2 once
  CHECK(tm.predict(0, 99) == 1);   // unknown activity uses the global matrix
}

TEST_CASE("lookup table longest-suffix match and backoff") {
  // Contexts (A,B)->C and (B)->D: suffix (A,B) must win over (B).
  auto lut = LookupTable::fit({seq({0, 1, 2}), seq({3, 1, 3, 1, 3}),
                               seq({4, 1, 3}), seq({4, 1, 3})},
                              5, 2);
  // (0,1) seen once with next 2; (1) alone has next counts favoring 3.
  CHECK(lut.predict({0, 1}) == 2);
  CHECK(lut.predict({1}) == 3);

  // Unseen suffix of any stored length backs off to the transition matrix.
  CHECK(lut.predict({2}) == lut.tm.predict(2));

  // Empty context degenerates to the prior.
  CHECK(lut.predict({}) == argmax_lowest(lut.tm.prior));
}

TEST_CASE("lookup table with n_max 1 agrees with the transition matrix") {
  Rng rng(5);
  std::vector<LabeledSequence> data;
  for (int s = 0; s < 12; ++s) {
    std::vector<int> labels{static_cast<int>(rng.below(4))};
    for (int i = 0; i < 9; ++i) {
      int next = static_cast<int>(rng.below(4));
      if (next == labels.back()) next = (next + 1) % 4;
      labels.push_back(next);
    }
    data.push_back(seq(std::move(labels)));
  }
  auto lut = LookupTable::fit(data, 4, 1);
  auto tm = TransitionMatrix::fit(data, 4);
  for (int last = 0; last < 4; ++last) {
    CHECK(lut.predict({last}) == tm.predict(last));
  }
}

TEST_CASE("unbounded lookup table memorizes a deterministic grammar") {
  // next = (last + 1) mod 5, random start.
  Rng rng(9);
  std::vector<LabeledSequence> data;
  for (int s = 0; s < 20; ++s) {
    std::vector<int> labels{static_cast<int>(rng.below(5))};
    for (int i = 0; i < 10; ++i) labels.push_back((labels.back() + 1) % 5);
    data.push_back(seq(std::move(labels)));
  }
  auto lut = LookupTable::fit(data, 5, 64);
  int correct = 0, total = 0;
  for (const auto& s : data) {
    for (size_t i = 1; i < s.labels.size(); ++i) {
      std::vector<int> ctx(s.labels.begin(), s.labels.begin() + static_cast<int>(i));
      correct += lut.predict(ctx) == s.labels[i];
      ++total;
    }
  }
  CHECK(correct == total);
}

TEST_CASE("recurrent baseline learns a deterministic first-order grammar") {
  Rng rng(33);
  auto make = [&](int count) {
    std::vector<LabeledSequence> out;
    for (int s = 0; s < count; ++s) {
      std::vector<int> labels{static_cast<int>(rng.below(5))};
      for (int i = 0; i < 10; ++i) labels.push_back((labels.back() + 1) % 5);
      out.push_back(seq(std::move(labels)));
    }
    return out;
  };
  auto train = make(30);
  auto test = make(8);

  RnnBaselineConfig cfg;
  cfg.hidden = 32;
  cfg.epochs = 25;
  cfg.lr = 1e-2;
  cfg.batch = 16;
  cfg.seed = 4;
  auto rnn = RnnBaseline::fit(train, 5, cfg);

  int correct = 0, total = 0;
  for (const auto& s : test) {
    for (size_t i = 1; i < s.labels.size(); ++i) {
      std::vector<int> ctx(s.labels.begin(), s.labels.begin() + static_cast<int>(i));
      correct += rnn.predict(ctx) == s.labels[i];
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total >= 0.99);
}

TEST_CASE("recurrent baseline beats the transition matrix on an order-2 grammar") {
  // Two alternating tracks; each track carries an independent random bit, so
  // the next label is deterministic given two steps of history but uniform
  // given one.
  Rng rng(41);
  auto make = [&](int count) {
    std::vector<LabeledSequence> out;
    for (int s = 0; s < count; ++s) {
      const int a = static_cast<int>(rng.below(2));      // track 1 symbol: 0|1
      const int b = 2 + static_cast<int>(rng.below(2));  // track 2 symbol: 2|3
      std::vector<int> labels;
      for (int i = 0; i < 6; ++i) {
        labels.push_back(a);
        labels.push_back(b);
      }
      out.push_back(seq(std::move(labels)));
    }
    return out;
  };
  auto train = make(40);
  auto test = make(12);

  RnnBaselineConfig cfg;
  cfg.hidden = 32;
  cfg.epochs = 25;
  cfg.lr = 1e-2;
  cfg.batch = 16;
  cfg.seed = 6;
  auto rnn = RnnBaseline::fit(train, 4, cfg);
  auto tm = TransitionMatrix::fit(train, 4);

  int rnn_correct = 0, tm_correct = 0, total = 0;
  for (const auto& s : test) {
    for (size_t i = 2; i < s.labels.size(); ++i) {
      std::vector<int> ctx(s.labels.begin(), s.labels.begin() + static_cast<int>(i));
      rnn_correct += rnn.predict(ctx) == s.labels[i];
      tm_correct += tm.predict(ctx.back()) == s.labels[i];
      ++total;
    }
  }
  CHECK(static_cast<double>(rnn_correct) / total >= 0.95);
  CHECK(static_cast<double>(tm_correct) / total <= 0.60);  // ~ chance over 2 options
}

TEST_CASE("recurrent baseline memorizes a single training sequence") {
  auto data = std::vector<LabeledSequence>{seq({0, 2, 1, 3, 0, 3, 2, 4, 1})};
  RnnBaselineConfig cfg;
  cfg.hidden = 24;
  cfg.epochs = 150;
  cfg.lr = 1e-2;
  cfg.batch = 8;
  cfg.seed = 11;
  auto rnn = RnnBaseline::fit(data, 5, cfg);
  const auto& labels = data[0].labels;
  for (size_t i = 1; i < labels.size(); ++i) {
    std::vector<int> ctx(labels.begin(), labels.begin() + static_cast<int>(i));
    CHECK(rnn.predict(ctx) == labels[i]);
  }
}
