// Task heads over the temporal aggregate representation: next-action
// classification with the auxiliary activity loss, summed-softmax ensemble
// inference, dense anticipation rollout, sliding-window segmentation and the
// recognition scope adjustment.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tagg/blocks.hpp"
#include "tagg/snippets.hpp"

namespace tagg {

struct Linear {
  Tensor w;  // out x in
  Tensor b;  // out

  // init_scale < 1 is used for classification heads so logits start
  // near-uniform (loss ~ log of the class count at init).
  static Linear create(int out, int in, Rng& rng, double init_scale = 1.0);
  Tensor apply(const Tensor& x) const { return add(matmul(w, x), b); }
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// Single-layer gated recurrent cell (input/forget/output gates, tanh
// candidate) over concat(input, hidden).
struct LstmParams {
  Linear gate_i, gate_f, gate_o, gate_c;
  int input = 0;
  int hidden = 0;

  static LstmParams create(int input, int hidden, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct LstmState {
  Tensor h, c;
  static LstmState zeros(int hidden);
};

LstmState lstm_step(const LstmParams& p, const Tensor& x, const LstmState& prev);

struct ModelConfig {
  int feat_dim = 0;      // D
  int n_actions = 0;     // N_Y
  int n_activities = 0;  // N_Z; 0 disables the auxiliary head ("no Z")
  int n_recent = 3;      // R: number of recent starts / TABs
  int n_scales = 3;      // number of spanning scales / CBs per TAB
  int hidden = 1024;     // H
  int attn_dim = 0;      // 0 -> feat_dim / 2 (at least 1)
  double dropout = 0.3;
  NlbMode nlb_mode = NlbMode::kAttention;
  CbMode cb_mode = CbMode::kFull;
  // Dense anticipation head (optional).
  bool with_dense = false;
  int n_duration_bins = 0;
  int rnn_hidden = 512;

  int attn() const { return attn_dim > 0 ? attn_dim : std::max(1, feat_dim / 2); }
  void validate() const;
};

struct ClassifierParams {
  Linear action_head;                   // H -> N_Y
  std::optional<Linear> activity_head;  // (R*H) -> N_Z
};

struct DenseParams {
  Linear duration_head;  // (R*H) -> N_D
  Linear rollout_in;     // (R*H + R*H + R*N_Y) -> rnn_hidden
  LstmParams rnn;        // input: rnn_hidden + N_Y + N_D
  Linear step_action;    // rnn_hidden -> N_Y
  Linear step_duration;  // rnn_hidden -> N_D
};

struct Model {
  ModelConfig cfg;
  std::vector<TabParams> tabs;  // one per recent start
  ClassifierParams cls;
  std::optional<DenseParams> dense;

  static Model create(const ModelConfig& cfg, Rng& rng);
  void visit_params(const ParamVisitor& fn);
  std::vector<Tensor*> params();
  std::vector<std::pair<std::string, Tensor*>> named_params();
  int64_t param_count();
};

// Per-start TAB outputs.
struct Aggregates {
  std::vector<Tensor> recent;    // R''' per start, each H
  std::vector<Tensor> spanning;  // S''' per start, each H
};

Aggregates aggregate(const Model& model, const SnippetBank& banks, const Fwd& fwd);

struct ClassTargets {
  int action = -1;    // Y
  int activity = -1;  // Z; ignored when the model has no activity head
};

struct ClassifyOut {
  std::vector<Tensor> action_logits;     // one per recent start
  std::optional<Tensor> activity_logits;
  Tensor loss;                           // empty unless targets were given
  Aggregates aggregates;
};

// Loss = CE(activity) + sum over starts of CE(action).
ClassifyOut classify(const Model& model, const SnippetBank& banks, const Fwd& fwd,
                     const std::optional<ClassTargets>& targets = std::nullopt);

// Sum of per-start softmax scores; summands are sorted before adding so the
// result is exactly invariant to start order. Ties pick the lowest class.
int ensemble_infer(const std::vector<Tensor>& per_start_logits);
std::vector<double> ensemble_scores(const std::vector<Tensor>& per_start_logits);

// --- dense anticipation -------------------------------------------------------

struct FutureStep {
  int action = -1;
  int duration_bin = 0;
};

struct DenseTargets {
  ClassTargets cls;
  int current_duration_bin = 0;       // remaining duration of the cut action
  std::vector<FutureStep> future;     // M teacher-forced steps
};

// Loss = classification loss + current-duration CE + (1/M) sum of the
// future action/duration CEs.
Tensor dense_loss(const Model& model, const SnippetBank& banks, const DenseTargets& targets,
                  const Fwd& fwd);

struct RolloutSegment {
  int action = -1;
  int duration_frames = 0;
};

// Free-running rollout; decoded bin midpoints, truncated so the summed
// durations equal horizon_frames exactly.
std::vector<RolloutSegment> dense_infer(const Model& model, const SnippetBank& banks,
                                        int horizon_frames, double fps,
                                        double duration_interval_s, const Fwd& fwd);

// Frame expansion of rollout segments (length = sum of durations).
std::vector<int> segments_to_frames(const std::vector<RolloutSegment>& segments);

// Duration helpers shared by training target construction and decoding.
int duration_to_bin(double seconds, double interval_s, int n_bins);
double bin_to_duration_s(int bin, double interval_s);

// --- segmentation & recognition -------------------------------------------------

// Classifies sliding windows and labels every frame from the window whose
// center is nearest. Banks are built inside each window.
std::vector<int> segment_sliding(const Model& model, const FrameSequence& seq,
                                 double window_s, double stride_s, const SnippetConfig& cfg,
                                 const Fwd& fwd);

// Scope adjustment for recognizing a trimmed segment [ts, te] (frames):
// spanning over [ts - 6s, te + 6s], recents over [ts, te] widened by 0..3s.
struct ScopeRanges {
  std::pair<int, int> spanning;
  std::vector<std::pair<int, int>> recent;  // 4 ranges
};

ScopeRanges recognition_scope(int ts, int te, const FrameSequence& seq);

// Banks for a recognition scope (one recent matrix per range).
SnippetBank build_scope_banks(const FrameSequence& seq, const ScopeRanges& scope,
                              const SnippetConfig& cfg);

}  // namespace tagg
