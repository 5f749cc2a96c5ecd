// Grammar-driven generator of procedural-activity corpora.
//
// A grammar is an ordered list of slots. A slot with one option is a fixed
// action; a slot with several options is a branch whose choice is either
// uniform random, a deterministic hash of the last markov_order emitted
// actions, or a copy of an earlier slot's choice (long-range dependency).
// Every corpus is a pure function of (grammars, emitter, seed).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagg/rng.hpp"
#include "tagg/snippets.hpp"

namespace tagg {

struct DurationLaw {
  double mean_s = 8.0;
  double jitter_s = 0.0;  // uniform in +-jitter
};

struct GrammarSlot {
  std::vector<int> options;   // candidate action ids, >= 1
  int depends_on = -1;        // earlier slot index whose choice selects ours
  bool random_branch = false; // force uniform choice even under markov_order
  int repeat_min = 1;
  int repeat_max = 1;
};

struct ActivityGrammar {
  int activity = 0;
  std::vector<GrammarSlot> slots;
  std::vector<DurationLaw> durations;  // indexed by action id
  int markov_order = 0;                // branch-choice dependency depth
  uint64_t table_key = 0;              // seeds the deterministic branch table
  // When set, branch tables hash the unordered multiset of the last
  // markov_order actions instead of the ordered tuple.
  bool unordered_context = false;

  void validate(int n_actions) const;  // GrammarError names the bad rule
};

struct FeatureEmitter {
  Tensor prototypes;        // n_actions x D
  double sigma = 0.0;       // gaussian noise per frame and dimension
  int distractor_dims = 0;  // trailing all-zero prototype dimensions

  int n_actions() const { return prototypes.empty() ? 0 : prototypes.extent(0); }
  int dim() const { return prototypes.empty() ? 0 : prototypes.extent(1); }
};

struct Corpus {
  std::vector<FrameSequence> sequences;
  int n_actions = 0;
  int n_activities = 0;
  double fps = 1.0;
};

// Segment-level derivation of one sequence (no features).
std::vector<Segment> derive_segments(const ActivityGrammar& grammar, double fps, Rng& rng);

// f_t = prototype(label_t) + gaussian(0, sigma).
Tensor emit_features(const std::vector<int>& frame_labels, const FeatureEmitter& emitter,
                     Rng& rng);

Corpus generate_corpus(const std::vector<ActivityGrammar>& grammars,
                       const FeatureEmitter& emitter, int n_sequences, double fps,
                       uint64_t seed);

// Prototype matrix: one strong dimension per action plus an optional shared
// per-group dimension; trailing distractor dims stay zero.
FeatureEmitter make_emitter(int n_actions, int dim, double amplitude, double sigma,
                            uint64_t seed);

// --- corpus presets -----------------------------------------------------------------

struct Preset {
  std::vector<ActivityGrammar> grammars;
  FeatureEmitter emitter;
  double fps = 5.0;
  int default_sequences = 60;
  std::string description;
};

// Named presets; throws ConfigError for unknown names.
Preset make_preset(const std::string& name, uint64_t seed);
std::vector<std::string> preset_names();

}  // namespace tagg
