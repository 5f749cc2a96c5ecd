#include "tagg/synth.hpp"

#include <algorithm>
#include <cmath>

namespace tagg {

namespace {

uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58'476d'1ce4'e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d0'49bb'1331'11ebULL;
  z ^= z >> 31;
  return z;
}

// Deterministic branch table: hash of the last `order` emitted actions,
// optionally as an unordered multiset.
uint64_t history_hash(uint64_t key, const std::vector<int>& history, int order,
                      bool unordered = false) {
  uint64_t h = mix64(key ^ 0x51'7c'c1'b7'27'22'0a'95ULL);
  const int take = std::min<int>(order, static_cast<int>(history.size()));
  std::vector<int> window(history.end() - take, history.end());
  if (unordered) std::sort(window.begin(), window.end());
  for (int a : window) {
    h = mix64(h ^ (static_cast<uint64_t>(a) + 0x9e37u));
  }
  return h;
}

}  // namespace

void ActivityGrammar::validate(int n_actions) const {
  if (slots.empty()) throw GrammarError("grammar for activity " + std::to_string(activity) +
                                        " has no slots");
  for (size_t s = 0; s < slots.size(); ++s) {
    const GrammarSlot& slot = slots[s];
    const std::string where = "activity " + std::to_string(activity) + " slot " + std::to_string(s);
    if (slot.options.empty()) throw GrammarError(where + " has no action options");
    for (int a : slot.options) {
      if (a < 0 || a >= n_actions) {
        throw GrammarError(where + " names action " + std::to_string(a) +
                           " outside the vocabulary of " + std::to_string(n_actions));
      }
      if (a >= static_cast<int>(durations.size()) || durations[static_cast<size_t>(a)].mean_s <= 0.0) {
        throw GrammarError(where + " uses action " + std::to_string(a) +
                           " without a positive duration law");
      }
    }
    if (slot.repeat_min < 1 || slot.repeat_max < slot.repeat_min) {
      throw GrammarError(where + " has invalid repeat bounds");
    }
    if (slot.depends_on >= 0) {
      if (slot.depends_on >= static_cast<int>(s)) {
        throw GrammarError(where + " depends on a later slot");
      }
      const GrammarSlot& target = slots[static_cast<size_t>(slot.depends_on)];
      if (target.options.size() < 2 || target.repeat_max != 1) {
        throw GrammarError(where + " depends on slot " + std::to_string(slot.depends_on) +
                           " which is not a single-shot branch");
      }
    }
  }
}

std::vector<Segment> derive_segments(const ActivityGrammar& grammar, double fps, Rng& rng) {
  std::vector<int> history;          // emitted action ids
  std::vector<int> choices(grammar.slots.size(), -1);
  std::vector<Segment> segments;
  int frame = 0;
  for (size_t s = 0; s < grammar.slots.size(); ++s) {
    const GrammarSlot& slot = grammar.slots[s];
    const int repeats =
        slot.repeat_min + static_cast<int>(rng.below(
                              static_cast<uint64_t>(slot.repeat_max - slot.repeat_min + 1)));
    for (int rep = 0; rep < repeats; ++rep) {
      const int n_opts = static_cast<int>(slot.options.size());
      int idx = 0;
      if (n_opts > 1) {
        if (slot.depends_on >= 0) {
          idx = choices[static_cast<size_t>(slot.depends_on)] % n_opts;
        } else if (grammar.markov_order > 0 && !slot.random_branch) {
          idx = static_cast<int>(history_hash(grammar.table_key, history, grammar.markov_order,
                                              grammar.unordered_context) %
                                 static_cast<uint64_t>(n_opts));
        } else {
          idx = static_cast<int>(rng.below(static_cast<uint64_t>(n_opts)));
        }
        // Avoid an adjacent duplicate segment, which would merge on collapse.
        if (!history.empty() && slot.options[static_cast<size_t>(idx)] == history.back()) {
          idx = (idx + 1) % n_opts;
        }
      }
      choices[s] = idx;
      const int action = slot.options[static_cast<size_t>(idx)];
      const DurationLaw& law = grammar.durations[static_cast<size_t>(action)];
      const double seconds =
          std::max(0.2, law.mean_s + (law.jitter_s > 0.0 ? rng.uniform(-law.jitter_s, law.jitter_s)
                                                         : 0.0));
      const int frames = std::max(1, static_cast<int>(std::llround(seconds * fps)));
      segments.push_back(Segment{frame, frame + frames - 1, action});
      frame += frames;
      history.push_back(action);
    }
  }
  return segments;
}

Tensor emit_features(const std::vector<int>& frame_labels, const FeatureEmitter& emitter,
                     Rng& rng) {
  if (emitter.prototypes.empty()) throw std::invalid_argument("emitter has no prototypes");
  const int dim = emitter.dim();
  const int n = static_cast<int>(frame_labels.size());
  std::vector<double> vals(static_cast<size_t>(n) * dim);
  for (int t = 0; t < n; ++t) {
    const int label = frame_labels[static_cast<size_t>(t)];
    if (label < 0 || label >= emitter.n_actions()) {
      throw std::invalid_argument("frame label " + std::to_string(label) +
                                  " has no prototype (have " +
                                  std::to_string(emitter.n_actions()) + ")");
    }
    for (int d = 0; d < dim; ++d) {
      double v = emitter.prototypes.at({label, d});
      if (emitter.sigma > 0.0) v += rng.gaussian(0.0, emitter.sigma);
      vals[static_cast<size_t>(t) * dim + d] = v;
    }
  }
  return Tensor::from({n, dim}, std::move(vals));
}

Corpus generate_corpus(const std::vector<ActivityGrammar>& grammars,
                       const FeatureEmitter& emitter, int n_sequences, double fps,
                       uint64_t seed) {
  if (n_sequences < 1) throw std::invalid_argument("need at least one sequence");
  if (grammars.empty()) throw GrammarError("no grammars supplied");
  for (const ActivityGrammar& g : grammars) g.validate(emitter.n_actions());

  Corpus corpus;
  corpus.fps = fps;
  corpus.n_actions = emitter.n_actions();
  int max_activity = -1;
  const Rng master(seed);
  for (int i = 0; i < n_sequences; ++i) {
    Rng stream = master.split(1000 + static_cast<uint64_t>(i));
    const ActivityGrammar& grammar = grammars[static_cast<size_t>(i) % grammars.size()];
    const auto segments = derive_segments(grammar, fps, stream);
    std::vector<int> labels;
    for (const Segment& s : segments) {
      labels.insert(labels.end(), static_cast<size_t>(s.frames()), s.action);
    }
    FrameSequence seq;
    seq.features = emit_features(labels, emitter, stream);
    seq.frame_labels = std::move(labels);
    seq.activity = grammar.activity;
    seq.fps = fps;
    corpus.sequences.push_back(std::move(seq));
    max_activity = std::max(max_activity, grammar.activity);
  }
  corpus.n_activities = max_activity + 1;
  return corpus;
}

FeatureEmitter make_emitter(int n_actions, int dim, double amplitude, double sigma,
                            uint64_t seed) {
  if (dim < n_actions) throw std::invalid_argument("emitter needs dim >= n_actions");
  (void)seed;
  FeatureEmitter emitter;
  emitter.prototypes = Tensor::zeros({n_actions, dim});
  for (int a = 0; a < n_actions; ++a) emitter.prototypes.data()[a * dim + a] = amplitude;
  emitter.sigma = sigma;
  emitter.distractor_dims = dim - n_actions;
  return emitter;
}

// --- presets ---------------------------------------------------------------------------

namespace {

GrammarSlot fixed(int action) { return GrammarSlot{{action}, -1, false, 1, 1}; }

GrammarSlot branch(std::vector<int> options, bool random = false, int depends_on = -1) {
  GrammarSlot s;
  s.options = std::move(options);
  s.depends_on = depends_on;
  s.random_branch = random;
  return s;
}

// Three activities of four actions each: intro, long filler, and a pair of
// short "marker" actions whose first occurrence fixes the later ones. Short
// markers inside long spanning snippets are what max-pooling preserves and
// mean/sampling dilute.
Preset desk_preset(uint64_t seed) {
  Preset p;
  p.fps = 5.0;
  p.default_sequences = 60;
  p.description = "3 activities x 4 actions, short salient markers, long fillers";
  const int dim = 32;
  FeatureEmitter em;
  em.prototypes = Tensor::zeros({12, dim});
  for (int z = 0; z < 3; ++z) {
    const int base = 4 * z;
    em.prototypes.data()[(base + 0) * dim + (base + 0)] = 1.0;  // intro
    em.prototypes.data()[(base + 1) * dim + (base + 1)] = 1.0;  // filler
    em.prototypes.data()[(base + 2) * dim + (base + 2)] = 2.0;  // marker a
    em.prototypes.data()[(base + 3) * dim + (base + 3)] = 2.0;  // marker b
    for (int a = 0; a < 4; ++a) {
      em.prototypes.data()[(base + a) * dim + 12 + z] = 0.5;  // shared activity dim
    }
  }
  em.sigma = 0.4;
  em.distractor_dims = dim - 15;
  p.emitter = em;

  for (int z = 0; z < 3; ++z) {
    const int base = 4 * z;
    ActivityGrammar g;
    g.activity = z;
    g.table_key = seed * 3 + static_cast<uint64_t>(z);
    g.durations.assign(12, DurationLaw{});
    g.durations[static_cast<size_t>(base + 0)] = {6.0, 1.0};
    g.durations[static_cast<size_t>(base + 1)] = {24.0, 4.0};
    g.durations[static_cast<size_t>(base + 2)] = {1.6, 0.4};
    g.durations[static_cast<size_t>(base + 3)] = {1.6, 0.4};
    g.slots.push_back(fixed(base + 0));
    g.slots.push_back(fixed(base + 1));
    g.slots.push_back(branch({base + 2, base + 3}, /*random=*/true));  // the mode
    for (int rep = 0; rep < 3; ++rep) {
      g.slots.push_back(fixed(base + 1));
      g.slots.push_back(branch({base + 2, base + 3}, false, /*depends_on=*/2));
    }
    g.slots.push_back(fixed(base + 1));
    p.grammars.push_back(std::move(g));
  }
  return p;
}

// Deterministic order-3 grammar over 5 actions: the first three slots are
// uniform, every later slot is a fixed hash of the last three actions.
Preset order3_preset(uint64_t seed) {
  Preset p;
  p.fps = 5.0;
  p.default_sequences = 75;
  p.description = "order-3 deterministic branch table over 5 actions";
  p.emitter = make_emitter(5, 8, 1.0, 0.1, seed);

  ActivityGrammar g;
  g.activity = 0;
  g.markov_order = 3;
  g.unordered_context = true;
  g.table_key = seed;
  g.durations.assign(5, DurationLaw{8.0, 0.0});
  std::vector<int> all{0, 1, 2, 3, 4};
  for (int s = 0; s < 3; ++s) g.slots.push_back(branch(all, /*random=*/true));
  for (int s = 0; s < 11; ++s) g.slots.push_back(branch(all));
  p.grammars.push_back(std::move(g));
  return p;
}

// An early two-way mode decides three later branches; long fillers keep the
// mode and every previous branch outside the recent windows.
Preset longrange_preset(uint64_t seed) {
  Preset p;
  p.fps = 5.0;
  p.default_sequences = 60;
  p.description = "early mode decides late branches across 36s fillers";
  p.emitter = make_emitter(11, 16, 1.0, 0.15, seed);
  // The mode actions carry a stronger prototype so they stay salient inside
  // long max-pooled spanning snippets.
  p.emitter.prototypes.data()[0 * 16 + 0] = 2.0;
  p.emitter.prototypes.data()[1 * 16 + 1] = 2.0;

  ActivityGrammar g;
  g.activity = 0;
  g.table_key = seed;
  g.durations.assign(11, DurationLaw{});
  g.durations[0] = g.durations[1] = {8.0, 0.5};  // modes
  for (int a : {2, 3, 4}) g.durations[static_cast<size_t>(a)] = {12.0, 1.0};
  for (int a : {5, 6, 7, 8, 9, 10}) g.durations[static_cast<size_t>(a)] = {8.0, 0.5};

  g.slots.push_back(branch({0, 1}, /*random=*/true));  // mode
  const std::vector<std::vector<int>> pairs{{5, 6}, {7, 8}, {9, 10}};
  for (const auto& pair : pairs) {
    for (int f : {2, 3, 4}) g.slots.push_back(fixed(f));
    g.slots.push_back(branch(pair, false, /*depends_on=*/0));
  }
  p.grammars.push_back(std::move(g));
  return p;
}

// Control for the spanning sweep: everything is first-order predictable.
// The table key is advanced until the induced next-action map is a single
// 5-cycle, so sequences visit every action and windows never alias.
Preset markov1_preset(uint64_t seed) {
  Preset p;
  p.fps = 5.0;
  p.default_sequences = 60;
  p.description = "order-1 deterministic branch table over 5 actions";
  p.emitter = make_emitter(5, 16, 1.0, 0.15, seed);

  ActivityGrammar g;
  g.activity = 0;
  g.markov_order = 1;
  g.durations.assign(5, DurationLaw{8.0, 0.5});
  std::vector<int> all{0, 1, 2, 3, 4};

  auto next_of = [&](uint64_t key, int a) {
    const int idx = static_cast<int>(history_hash(key, {a}, 1) % 5);
    return idx != a ? idx : (idx + 1) % 5;
  };
  uint64_t key = seed;
  for (;; ++key) {
    int at = 0;
    int steps = 0;
    do {
      at = next_of(key, at);
      ++steps;
    } while (at != 0 && steps <= 5);
    if (steps == 5) {
      bool visited[5] = {true, false, false, false, false};
      int node = 0;
      bool ok = true;
      for (int s = 0; s < 4; ++s) {
        node = next_of(key, node);
        if (visited[node]) ok = false;
        visited[node] = true;
      }
      if (ok) break;
    }
  }
  g.table_key = key;

  g.slots.push_back(branch(all, /*random=*/true));
  for (int s = 0; s < 13; ++s) g.slots.push_back(branch(all));
  p.grammars.push_back(std::move(g));
  return p;
}

// Deterministic three-action chain for dense anticipation. The long middle
// action makes early cuts land inside it with the phase (elapsed time)
// visible through the recent windows.
Preset dense3_preset(uint64_t seed) {
  Preset p;
  p.fps = 5.0;
  p.default_sequences = 20;
  p.description = "deterministic A->B->C chain, fixed durations";
  p.emitter = make_emitter(3, 8, 1.0, 0.1, seed);

  ActivityGrammar g;
  g.activity = 0;
  g.durations = {DurationLaw{6.0, 0.0}, DurationLaw{12.0, 0.0}, DurationLaw{6.0, 0.0}};
  g.slots = {fixed(0), fixed(1), fixed(2)};
  p.grammars.push_back(std::move(g));
  return p;
}

// Noisy alternation of three overlapping actions for the segmentation
// smoothing comparison.
Preset segnoise_preset(uint64_t seed) {
  Preset p;
  p.fps = 5.0;
  p.default_sequences = 40;
  p.description = "noisy 3-action alternation with overlapping prototypes";
  const int dim = 8;
  FeatureEmitter em;
  em.prototypes = Tensor::zeros({3, dim});
  for (int a = 0; a < 3; ++a) {
    em.prototypes.data()[a * dim + a] = 1.0;
    em.prototypes.data()[a * dim + 3] = 0.6;  // shared dimension
  }
  em.sigma = 0.7;
  em.distractor_dims = dim - 4;
  p.emitter = em;

  ActivityGrammar g;
  g.activity = 0;
  g.table_key = seed;
  g.durations.assign(3, DurationLaw{8.0, 2.0});
  for (int s = 0; s < 14; ++s) g.slots.push_back(branch({0, 1, 2}, /*random=*/true));
  p.grammars.push_back(std::move(g));
  return p;
}

// Featureless smoke corpus: labels carry no signal at all.
Preset noise_preset(uint64_t seed) {
  Preset p;
  p.fps = 5.0;
  p.default_sequences = 12;
  p.description = "zero prototypes, pure noise features";
  p.emitter = make_emitter(2, 4, 0.0, 1.0, seed);

  ActivityGrammar g;
  g.activity = 0;
  g.table_key = seed;
  g.durations.assign(2, DurationLaw{8.0, 2.0});
  for (int s = 0; s < 10; ++s) g.slots.push_back(branch({0, 1}, /*random=*/true));
  p.grammars.push_back(std::move(g));
  return p;
}

}  // namespace

Preset make_preset(const std::string& name, uint64_t seed) {
  if (name == "desk") return desk_preset(seed);
  if (name == "order3") return order3_preset(seed);
  if (name == "longrange") return longrange_preset(seed);
  if (name == "markov1") return markov1_preset(seed);
  if (name == "dense3") return dense3_preset(seed);
  if (name == "segnoise") return segnoise_preset(seed);
  if (name == "noise") return noise_preset(seed);
  throw ConfigError("unknown corpus preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"desk", "order3", "longrange", "markov1", "dense3", "segnoise", "noise"};
}

}  // namespace tagg
