#include "tagg/model.hpp"

#include <algorithm>
#include <cmath>

namespace tagg {

// --- params ---------------------------------------------------------------------

Linear Linear::create(int out, int in, Rng& rng, double init_scale) {
  Linear l;
  l.w = init_scale == 1.0 ? xavier_uniform(out, in, rng)
                          : scale(xavier_uniform(out, in, rng), init_scale);
  l.b = Tensor::zeros({out});
  return l;
}

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", w);
  fn(prefix + ".b", b);
}

LstmParams LstmParams::create(int input, int hidden, Rng& rng) {
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  const int in_all = input + hidden;
  p.gate_i = Linear::create(hidden, in_all, rng);
  p.gate_f = Linear::create(hidden, in_all, rng);
  p.gate_o = Linear::create(hidden, in_all, rng);
  p.gate_c = Linear::create(hidden, in_all, rng);
  return p;
}

void LstmParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  gate_i.visit(prefix + ".gate_i", fn);
  gate_f.visit(prefix + ".gate_f", fn);
  gate_o.visit(prefix + ".gate_o", fn);
  gate_c.visit(prefix + ".gate_c", fn);
}

LstmState LstmState::zeros(int hidden) {
  return LstmState{Tensor::zeros({hidden}), Tensor::zeros({hidden})};
}

LstmState lstm_step(const LstmParams& p, const Tensor& x, const LstmState& prev) {
  Tensor z = concat({x, prev.h}, 0);
  Tensor i = sigmoid(p.gate_i.apply(z));
  Tensor f = sigmoid(p.gate_f.apply(z));
  Tensor o = sigmoid(p.gate_o.apply(z));
  Tensor g = tanh_t(p.gate_c.apply(z));
  LstmState next;
  next.c = add(mul(f, prev.c), mul(i, g));
  next.h = mul(o, tanh_t(next.c));
  return next;
}

void ModelConfig::validate() const {
  if (feat_dim < 1) throw ConfigError("model feat_dim must be >= 1");
  if (n_actions < 2) throw ConfigError("model needs at least 2 action classes");
  if (n_recent < 1 || n_scales < 1) throw ConfigError("model needs >= 1 start and scale");
  if (hidden < 1) throw ConfigError("model hidden width must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (with_dense && n_duration_bins < 1) {
    throw ConfigError("dense head needs n_duration_bins >= 1");
  }
}

Model Model::create(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  for (int r = 0; r < cfg.n_recent; ++r) {
    m.tabs.push_back(TabParams::create(cfg.n_scales, cfg.feat_dim, cfg.attn(), cfg.hidden,
                                       cfg.dropout, cfg.nlb_mode, cfg.cb_mode, rng));
  }
  constexpr double kHeadInitScale = 0.1;
  m.cls.action_head = Linear::create(cfg.n_actions, cfg.hidden, rng, kHeadInitScale);
  if (cfg.n_activities > 0) {
    m.cls.activity_head =
        Linear::create(cfg.n_activities, cfg.n_recent * cfg.hidden, rng, kHeadInitScale);
  }
  if (cfg.with_dense) {
    DenseParams d;
    d.duration_head =
        Linear::create(cfg.n_duration_bins, cfg.n_recent * cfg.hidden, rng, kHeadInitScale);
    const int rollout_in = cfg.n_recent * (2 * cfg.hidden + cfg.n_actions);
    d.rollout_in = Linear::create(cfg.rnn_hidden, rollout_in, rng);
    d.rnn = LstmParams::create(cfg.rnn_hidden + cfg.n_actions + cfg.n_duration_bins,
                               cfg.rnn_hidden, rng);
    d.step_action = Linear::create(cfg.n_actions, cfg.rnn_hidden, rng, kHeadInitScale);
    d.step_duration = Linear::create(cfg.n_duration_bins, cfg.rnn_hidden, rng, kHeadInitScale);
    m.dense = std::move(d);
  }
  return m;
}

void Model::visit_params(const ParamVisitor& fn) {
  for (size_t r = 0; r < tabs.size(); ++r) tabs[r].visit("tab" + std::to_string(r), fn);
  cls.action_head.visit("action_head", fn);
  if (cls.activity_head) cls.activity_head->visit("activity_head", fn);
  if (dense) {
    dense->duration_head.visit("dense.duration_head", fn);
    dense->rollout_in.visit("dense.rollout_in", fn);
    dense->rnn.visit("dense.rnn", fn);
    dense->step_action.visit("dense.step_action", fn);
    dense->step_duration.visit("dense.step_duration", fn);
  }
}

std::vector<Tensor*> Model::params() {
  std::vector<Tensor*> out;
  visit_params([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_params() {
  std::vector<std::pair<std::string, Tensor*>> out;
  visit_params([&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

int64_t Model::param_count() {
  int64_t n = 0;
  visit_params([&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

// --- classification ---------------------------------------------------------------

Aggregates aggregate(const Model& model, const SnippetBank& banks, const Fwd& fwd) {
  if (banks.recent.size() != model.tabs.size()) {
    throw ConfigError("bank has " + std::to_string(banks.recent.size()) +
                      " recent starts, model expects " + std::to_string(model.tabs.size()));
  }
  Aggregates agg;
  for (size_t r = 0; r < banks.recent.size(); ++r) {
    auto [r3, s3] = tab_forward(banks.recent[r], banks.spanning, model.tabs[r], fwd);
    agg.recent.push_back(r3);
    agg.spanning.push_back(s3);
  }
  return agg;
}

ClassifyOut classify(const Model& model, const SnippetBank& banks, const Fwd& fwd,
                     const std::optional<ClassTargets>& targets) {
  ClassifyOut out;
  out.aggregates = aggregate(model, banks, fwd);
  for (const Tensor& r3 : out.aggregates.recent) {
    out.action_logits.push_back(model.cls.action_head.apply(r3));
  }
  if (model.cls.activity_head) {
    out.activity_logits = model.cls.activity_head->apply(concat(out.aggregates.spanning, 0));
  }
  if (targets) {
    if (targets->action < 0) {
      throw std::invalid_argument("training requires an action label");
    }
    Tensor loss;
    if (out.activity_logits) {
      if (targets->activity < 0) {
        throw std::invalid_argument("training requires an activity label (model has a Z head)");
      }
      loss = cross_entropy(*out.activity_logits, targets->activity);
    }
    for (const Tensor& logits : out.action_logits) {
      Tensor ce = cross_entropy(logits, targets->action);
      loss = loss.empty() ? ce : add(loss, ce);
    }
    out.loss = loss;
  }
  return out;
}

std::vector<double> ensemble_scores(const std::vector<Tensor>& per_start_logits) {
  if (per_start_logits.empty()) {
    throw std::invalid_argument("ensemble_infer needs at least one logit vector");
  }
  const int n = per_start_logits[0].extent(0);
  std::vector<std::vector<double>> probs;
  for (const Tensor& logits : per_start_logits) {
    if (logits.rank() != 1 || logits.extent(0) != n) {
      throw DimError("ensemble_infer: logit shape mismatch");
    }
    probs.push_back(softmax(logits, 0).values());
  }
  std::vector<double> scores(static_cast<size_t>(n), 0.0);
  std::vector<double> column(probs.size());
  for (int c = 0; c < n; ++c) {
    for (size_t r = 0; r < probs.size(); ++r) column[r] = probs[r][static_cast<size_t>(c)];
    // Sorted accumulation makes the sum independent of start order.
    std::sort(column.begin(), column.end());
    double acc = 0.0;
    for (double v : column) acc += v;
    scores[static_cast<size_t>(c)] = acc;
  }
  return scores;
}

int ensemble_infer(const std::vector<Tensor>& per_start_logits) {
  return argmax_lowest(ensemble_scores(per_start_logits));
}

// --- dense anticipation -------------------------------------------------------------

int duration_to_bin(double seconds, double interval_s, int n_bins) {
  if (interval_s <= 0.0) throw ConfigError("duration interval must be positive");
  const int bin = static_cast<int>(std::floor(seconds / interval_s));
  return std::clamp(bin, 0, n_bins - 1);
}

double bin_to_duration_s(int bin, double interval_s) { return (bin + 0.5) * interval_s; }

namespace {

Tensor onehot(int index, int n) {
  Tensor t = Tensor::zeros({n});
  t.data()[index] = 1.0;
  return t;
}

const DenseParams& need_dense(const Model& model) {
  if (!model.dense) throw ConfigError("model has no dense anticipation head");
  return *model.dense;
}

// Shared encoder for rollout: linear over concat(all R''', all S''', all
// softmax(Y_hat)), per-start logits reused from the classification pass.
Tensor rollout_encoding(const DenseParams& d, const ClassifyOut& cls) {
  std::vector<Tensor> parts = cls.aggregates.recent;
  parts.insert(parts.end(), cls.aggregates.spanning.begin(), cls.aggregates.spanning.end());
  for (const Tensor& logits : cls.action_logits) parts.push_back(softmax(logits, 0));
  return d.rollout_in.apply(concat(parts, 0));
}

}  // namespace

Tensor dense_loss(const Model& model, const SnippetBank& banks, const DenseTargets& targets,
                  const Fwd& fwd) {
  const DenseParams& d = need_dense(model);
  ClassifyOut cls = classify(model, banks, fwd, targets.cls);

  Tensor dur_logits = d.duration_head.apply(concat(cls.aggregates.recent, 0));
  Tensor loss = add(cls.loss, cross_entropy(dur_logits, targets.current_duration_bin));

  const int m_steps = static_cast<int>(targets.future.size());
  if (m_steps == 0) return loss;

  Tensor enc = rollout_encoding(d, cls);
  LstmState state = LstmState::zeros(model.cfg.rnn_hidden);
  // Teacher forcing: the ground-truth previous (action, duration) feeds each
  // step; step 0 is fed the current action and its remaining duration.
  int prev_action = targets.cls.action;
  int prev_bin = targets.current_duration_bin;
  Tensor future_loss;
  for (const FutureStep& step : targets.future) {
    Tensor x = concat({enc, onehot(prev_action, model.cfg.n_actions),
                       onehot(prev_bin, model.cfg.n_duration_bins)},
                      0);
    state = lstm_step(d.rnn, x, state);
    Tensor step_loss = add(cross_entropy(d.step_action.apply(state.h), step.action),
                           cross_entropy(d.step_duration.apply(state.h), step.duration_bin));
    future_loss = future_loss.empty() ? step_loss : add(future_loss, step_loss);
    prev_action = step.action;
    prev_bin = step.duration_bin;
  }
  return add(loss, scale(future_loss, 1.0 / m_steps));
}

std::vector<RolloutSegment> dense_infer(const Model& model, const SnippetBank& banks,
                                        int horizon_frames, double fps,
                                        double duration_interval_s, const Fwd& fwd) {
  if (horizon_frames < 1) throw std::invalid_argument("rollout horizon must be >= 1 frame");
  const DenseParams& d = need_dense(model);
  ClassifyOut cls = classify(model, banks, fwd);

  const int current_action = ensemble_infer(cls.action_logits);
  Tensor dur_logits = d.duration_head.apply(concat(cls.aggregates.recent, 0));
  int bin = argmax_lowest(dur_logits.values());

  auto decoded_frames = [&](int b) {
    return std::max(1, static_cast<int>(std::llround(bin_to_duration_s(b, duration_interval_s) * fps)));
  };

  std::vector<RolloutSegment> segments;
  int covered = 0;
  int action = current_action;
  Tensor enc = rollout_encoding(d, cls);
  LstmState state = LstmState::zeros(model.cfg.rnn_hidden);
  while (covered < horizon_frames) {
    const int dur = std::min(decoded_frames(bin), horizon_frames - covered);
    segments.push_back(RolloutSegment{action, dur});
    covered += dur;
    if (covered >= horizon_frames) break;
    Tensor x = concat({enc, onehot(action, model.cfg.n_actions),
                       onehot(bin, model.cfg.n_duration_bins)},
                      0);
    state = lstm_step(d.rnn, x, state);
    action = argmax_lowest(d.step_action.apply(state.h).values());
    bin = argmax_lowest(d.step_duration.apply(state.h).values());
  }
  return segments;
}

std::vector<int> segments_to_frames(const std::vector<RolloutSegment>& segments) {
  std::vector<int> frames;
  for (const RolloutSegment& s : segments) {
    frames.insert(frames.end(), static_cast<size_t>(s.duration_frames), s.action);
  }
  return frames;
}

// --- segmentation --------------------------------------------------------------------

std::vector<int> segment_sliding(const Model& model, const FrameSequence& seq, double window_s,
                                 double stride_s, const SnippetConfig& cfg, const Fwd& fwd) {
  seq.validate();
  if (window_s <= 0.0) throw std::invalid_argument("window length must be positive");
  if (stride_s <= 0.0) throw std::invalid_argument("window stride must be positive");
  const int total = seq.frames();
  const int win = std::max(2, static_cast<int>(std::llround(window_s * seq.fps)));
  const int stride = std::max(1, static_cast<int>(std::llround(stride_s * seq.fps)));

  std::vector<int> centers;
  std::vector<int> window_label;
  for (int start = 0;; start += stride) {
    int lo = start, hi = start + win - 1;
    if (hi >= total) {  // final window clamps to the sequence tail
      hi = total - 1;
      lo = std::max(0, hi - win + 1);
    }
    FrameSequence view = slice_frames(seq, lo, hi);
    SnippetBank banks = build_banks(view, view.frames() - 1, cfg);
    ClassifyOut out = classify(model, banks, fwd);
    centers.push_back((lo + hi) / 2);
    window_label.push_back(ensemble_infer(out.action_logits));
    if (hi >= total - 1) break;
  }

  std::vector<int> labels(static_cast<size_t>(total));
  size_t w = 0;
  for (int t = 0; t < total; ++t) {
    // Centers are non-decreasing; advance while the next one is nearer.
    while (w + 1 < centers.size() &&
           std::abs(centers[w + 1] - t) < std::abs(centers[w] - t)) {
      ++w;
    }
    labels[static_cast<size_t>(t)] = window_label[w];
  }
  return labels;
}

// --- recognition ---------------------------------------------------------------------

ScopeRanges recognition_scope(int ts, int te, const FrameSequence& seq) {
  seq.validate();
  if (ts > te) throw std::invalid_argument("segment start after end");
  const int last = seq.frames() - 1;
  auto clamp_range = [&](double lo_s, double hi_s) {
    int lo = std::clamp(static_cast<int>(std::llround(lo_s)), 0, last);
    int hi = std::clamp(static_cast<int>(std::llround(hi_s)), 0, last);
    if (hi < lo) hi = lo;
    return std::make_pair(lo, hi);
  };
  ScopeRanges scope;
  scope.spanning = clamp_range(ts - 6.0 * seq.fps, te + 6.0 * seq.fps);
  for (int widen = 0; widen <= 3; ++widen) {
    scope.recent.push_back(clamp_range(ts - widen * seq.fps, te + widen * seq.fps));
  }
  return scope;
}

SnippetBank build_scope_banks(const FrameSequence& seq, const ScopeRanges& scope,
                              const SnippetConfig& cfg) {
  SnippetBank bank;
  for (auto [lo, hi] : scope.recent) {
    bank.recent.push_back(pool_snippets(seq, lo, hi, cfg.recent_count, cfg.pooling));
  }
  for (int k : cfg.spanning_scales) {
    bank.spanning.push_back(
        pool_snippets(seq, scope.spanning.first, scope.spanning.second, k, cfg.pooling));
  }
  bank.pooling = cfg.pooling;
  return bank;
}

}  // namespace tagg
