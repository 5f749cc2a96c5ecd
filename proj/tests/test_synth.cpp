#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "tagg/baselines.hpp"
#include "tagg/synth.hpp"

using namespace tagg;

namespace {

ActivityGrammar chain_grammar(std::vector<int> actions, double mean_s = 4.0, double jitter = 0.0) {
  ActivityGrammar g;
  int max_action = 0;
  for (int a : actions) max_action = std::max(max_action, a);
  g.durations.assign(static_cast<size_t>(max_action) + 1, DurationLaw{mean_s, jitter});
  for (int a : actions) g.slots.push_back(GrammarSlot{{a}, -1, false, 1, 1});
  return g;
}

// Plug-in conditional entropy H(next | context of length n) over a corpus.
double conditional_entropy(const std::vector<std::vector<int>>& seqs, int n) {
  std::map<std::vector<int>, std::map<int, int>> counts;
  int total = 0;
  for (const auto& s : seqs) {
    for (size_t i = static_cast<size_t>(n); i < s.size(); ++i) {
      std::vector<int> ctx(s.begin() + static_cast<int>(i) - n, s.begin() + static_cast<int>(i));
      counts[ctx][s[i]] += 1;
      ++total;
    }
  }
  double h = 0.0;
  for (const auto& [ctx, nexts] : counts) {
    int ctx_total = 0;
    for (const auto& [a, c] : nexts) ctx_total += c;
    for (const auto& [a, c] : nexts) {
      const double p = static_cast<double>(c) / ctx_total;
      h -= (static_cast<double>(ctx_total) / total) * p * std::log2(p);
    }
  }
  return h;
}

}  // namespace

TEST_CASE("corpus generation is deterministic under the seed") {
  Preset p = make_preset("desk", 7);
  Corpus a = generate_corpus(p.grammars, p.emitter, 6, p.fps, 99);
  Corpus b = generate_corpus(p.grammars, p.emitter, 6, p.fps, 99);
  REQUIRE(a.sequences.size() == b.sequences.size());
  for (size_t i = 0; i < a.sequences.size(); ++i) {
    CHECK(a.sequences[i].features.values() == b.sequences[i].features.values());
    CHECK(a.sequences[i].frame_labels == b.sequences[i].frame_labels);
    CHECK(a.sequences[i].activity == b.sequences[i].activity);
  }
  Corpus c = generate_corpus(p.grammars, p.emitter, 6, p.fps, 100);
  CHECK(c.sequences[0].features.values() != a.sequences[0].features.values());
}

TEST_CASE("deterministic chain grammar always derives the same segment labels") {
  ActivityGrammar g = chain_grammar({0, 1, 2});
  FeatureEmitter em = make_emitter(3, 4, 1.0, 0.0, 1);
  Corpus corpus = generate_corpus({g}, em, 10, 2.0, 5);
  for (const FrameSequence& seq : corpus.sequences) {
    auto segs = seq.segments();
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].action == 0);
    CHECK(segs[1].action == 1);
    CHECK(segs[2].action == 2);
    CHECK(segs[0].frames() == 8);  // 4s at 2 fps
  }
}

TEST_CASE("grammar validation names the offending rule") {
  ActivityGrammar g = chain_grammar({0, 5});
  FeatureEmitter em = make_emitter(3, 4, 1.0, 0.0, 1);
  CHECK_THROWS_WITH_AS(generate_corpus({g}, em, 1, 2.0, 5), doctest::Contains("slot 1"),
                       GrammarError);

  ActivityGrammar empty;
  CHECK_THROWS_AS(generate_corpus({empty}, em, 1, 2.0, 5), GrammarError);

  ActivityGrammar bad_dep = chain_grammar({0, 1});
  bad_dep.slots.push_back(GrammarSlot{{0, 1}, /*depends_on=*/5, false, 1, 1});
  CHECK_THROWS_AS(generate_corpus({bad_dep}, em, 1, 2.0, 5), GrammarError);
}

TEST_CASE("label and feature lengths agree; zero sigma reproduces prototypes") {
  FeatureEmitter em = make_emitter(3, 5, 2.0, 0.0, 1);
  Rng rng(3);
  std::vector<int> labels{0, 0, 2, 1, 1, 1};
  Tensor feats = emit_features(labels, em, rng);
  REQUIRE(feats.shape() == std::vector<int>{6, 5});
  for (int t = 0; t < 6; ++t) {
    for (int d = 0; d < 5; ++d) {
      CHECK(feats.at({t, d}) == em.prototypes.at({labels[static_cast<size_t>(t)], d}));
    }
  }
  // Max-pool of a single-action snippet reproduces the prototype exactly.
  FrameSequence seq;
  seq.features = feats;
  seq.frame_labels = labels;
  seq.fps = 1.0;
  Tensor pooled = pool_snippets(seq, 3, 5, 1, Pooling::kMax);
  for (int d = 0; d < 5; ++d) CHECK(pooled.at({d, 0}) == em.prototypes.at({1, d}));

  CHECK_THROWS_AS(emit_features({0, 7}, em, rng), std::invalid_argument);
}

TEST_CASE("well-separated prototypes survive noise at the frame level") {
  // Nearest-prototype probe with separation 4 sigma.
  const double sigma = 0.25;
  FeatureEmitter em = make_emitter(4, 6, 4 * sigma * 2, sigma, 1);
  ActivityGrammar g;
  g.activity = 0;
  g.durations.assign(4, DurationLaw{3.0, 1.0});
  for (int s = 0; s < 8; ++s) g.slots.push_back(GrammarSlot{{0, 1, 2, 3}, -1, true, 1, 1});
  Corpus corpus = generate_corpus({g}, em, 10, 5.0, 11);

  int correct = 0, total = 0;
  for (const FrameSequence& seq : corpus.sequences) {
    for (int t = 0; t < seq.frames(); ++t) {
      int best = 0;
      double best_d = 1e300;
      for (int a = 0; a < 4; ++a) {
        double d2 = 0;
        for (int d = 0; d < 6; ++d) {
          const double diff = seq.features.at({t, d}) - em.prototypes.at({a, d});
          d2 += diff * diff;
        }
        if (d2 < best_d) {
          best_d = d2;
          best = a;
        }
      }
      correct += best == seq.frame_labels[static_cast<size_t>(t)];
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total >= 0.99);
}

TEST_CASE("markov_order 2 grammar has lower entropy given two-step context") {
  ActivityGrammar g;
  g.activity = 0;
  g.markov_order = 2;
  g.table_key = 29;
  g.durations.assign(4, DurationLaw{2.0, 0.0});
  for (int s = 0; s < 2; ++s) g.slots.push_back(GrammarSlot{{0, 1, 2, 3}, -1, true, 1, 1});
  for (int s = 0; s < 12; ++s) g.slots.push_back(GrammarSlot{{0, 1, 2, 3}, -1, false, 1, 1});
  FeatureEmitter em = make_emitter(4, 4, 1.0, 0.0, 1);
  Corpus corpus = generate_corpus({g}, em, 120, 1.0, 31);

  std::vector<std::vector<int>> seg_seqs;
  for (const FrameSequence& seq : corpus.sequences) {
    seg_seqs.push_back(collapse_runs(seq.frame_labels));
  }
  const double h1 = conditional_entropy(seg_seqs, 1);
  const double h2 = conditional_entropy(seg_seqs, 2);
  CHECK(h1 > h2);
  CHECK(h1 - h2 > 0.2);
}

TEST_CASE("longrange preset: late branches copy the early mode") {
  Preset p = make_preset("longrange", 13);
  Corpus corpus = generate_corpus(p.grammars, p.emitter, 30, p.fps, 77);
  for (const FrameSequence& seq : corpus.sequences) {
    auto segs = collapse_runs(seq.frame_labels);
    const int mode = segs[0];
    REQUIRE((mode == 0 || mode == 1));
    // Branch actions are 5/6, 7/8, 9/10 -> low option iff mode is 0.
    for (int b : {4, 8, 12}) {
      const int action = segs[static_cast<size_t>(b)];
      CHECK(action % 2 == (mode == 0 ? 1 : 0));
    }
  }
}

TEST_CASE("all presets generate usable corpora") {
  for (const std::string& name : preset_names()) {
    Preset p = make_preset(name, 3);
    Corpus corpus = generate_corpus(p.grammars, p.emitter, 4, p.fps, 5);
    CHECK(corpus.sequences.size() == 4);
    CHECK(corpus.n_actions == p.emitter.n_actions());
    for (const FrameSequence& seq : corpus.sequences) {
      CHECK(seq.frames() >= 1);
      CHECK(seq.has_labels());
      seq.validate();
    }
  }
  CHECK_THROWS_AS(make_preset("bogus", 1), ConfigError);
}

TEST_CASE("desk preset repeats the first marker choice") {
  Preset p = make_preset("desk", 21);
  Corpus corpus = generate_corpus(p.grammars, p.emitter, 9, p.fps, 23);
  for (const FrameSequence& seq : corpus.sequences) {
    auto segs = collapse_runs(seq.frame_labels);
    const int base = 4 * seq.activity;
    // Segment layout: intro, filler, M, filler, M, filler, M, filler, M, filler.
    REQUIRE(segs.size() == 10);
    const int mode = segs[2];
    CHECK((mode == base + 2 || mode == base + 3));
    for (size_t i = 4; i <= 8; i += 2) CHECK(segs[i] == mode);
  }
}
