#include "tagg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tagg {

// --- config -------------------------------------------------------------------------

void RunConfig::validate() const {
  if (task != "next_action" && task != "dense" && task != "recognition" &&
      task != "segmentation") {
    throw ConfigError("unknown task '" + task + "'");
  }
  if (input_mode != "features" && input_mode != "frame_gt") {
    throw ConfigError("unknown input mode '" + input_mode + "'");
  }
  // lr 0 is allowed as a degenerate control (training becomes a no-op).
  if (lr < 0.0 || batch < 1 || epochs < 1 || lr_decay <= 0.0 || lr_decay_every < 1) {
    throw ConfigError("optimizer settings must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  if (tau_alpha_s <= 0.0) throw ConfigError("tau_alpha must be positive");
  if (duration_interval_s <= 0.0) throw ConfigError("duration interval must be positive");
  if (snippets.recent_starts_s.empty() || snippets.spanning_scales.empty() ||
      snippets.recent_count < 1) {
    throw ConfigError("snippet config needs starts, scales and K_R >= 1");
  }
  if (snippets.spanning_start_fraction < 0.0 || snippets.spanning_start_fraction > 1.0) {
    throw ConfigError("spanning start fraction must be in [0,1]");
  }
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw ConfigError("holdout fraction must be in [0,1)");
  }
  nlb_mode_from_string(nlb_mode);
  cb_mode_from_string(cb_mode);
}

double RunConfig::lr_at_epoch(int epoch) const {
  return lr * std::pow(lr_decay, (epoch - 1) / lr_decay_every);
}

KvText RunConfig::to_kv() const {
  KvText kv;
  kv.set("task", task);
  kv.set("seed", std::to_string(seed));
  kv.set("input_mode", input_mode);
  kv.set_list("recent_starts", snippets.recent_starts_s);
  kv.set("recent_k", std::to_string(snippets.recent_count));
  kv.set_list("spanning_scales", snippets.spanning_scales);
  kv.set_double("spanning_start_fraction", snippets.spanning_start_fraction);
  kv.set("pooling", pooling_to_string(snippets.pooling));
  kv.set("hidden", std::to_string(hidden));
  kv.set("attn_dim", std::to_string(attn_dim));
  kv.set("rnn_hidden", std::to_string(rnn_hidden));
  kv.set("n_duration_bins", std::to_string(n_duration_bins));
  kv.set_double("duration_interval", duration_interval_s);
  kv.set_double("tau_alpha", tau_alpha_s);
  kv.set_double("lr", lr);
  kv.set("batch", std::to_string(batch));
  kv.set("epochs", std::to_string(epochs));
  kv.set_double("lr_decay", lr_decay);
  kv.set("lr_decay_every", std::to_string(lr_decay_every));
  kv.set_double("dropout", dropout);
  kv.set("no_z", no_z ? "true" : "false");
  kv.set("nlb_mode", nlb_mode);
  kv.set("cb_mode", cb_mode);
  kv.set_double("window", window_s);
  kv.set_double("window_stride", window_stride_s);
  kv.set_double("holdout_fraction", holdout_fraction);
  kv.set_double("min_obs_frac", min_obs_frac);
  kv.set_double("max_obs_frac", max_obs_frac);
  return kv;
}

RunConfig RunConfig::from_kv(const KvText& kv) {
  RunConfig cfg;
  cfg.task = kv.get("task", cfg.task);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.input_mode = kv.get("input_mode", cfg.input_mode);
  cfg.snippets.recent_starts_s = kv.get_doubles("recent_starts", cfg.snippets.recent_starts_s);
  cfg.snippets.recent_count = kv.get_int("recent_k", cfg.snippets.recent_count);
  cfg.snippets.spanning_scales = kv.get_ints("spanning_scales", cfg.snippets.spanning_scales);
  cfg.snippets.spanning_start_fraction =
      kv.get_double("spanning_start_fraction", cfg.snippets.spanning_start_fraction);
  cfg.snippets.pooling = pooling_from_string(kv.get("pooling", "max"));
  cfg.hidden = kv.get_int("hidden", cfg.hidden);
  cfg.attn_dim = kv.get_int("attn_dim", cfg.attn_dim);
  cfg.rnn_hidden = kv.get_int("rnn_hidden", cfg.rnn_hidden);
  cfg.n_duration_bins = kv.get_int("n_duration_bins", cfg.n_duration_bins);
  cfg.duration_interval_s = kv.get_double("duration_interval", cfg.duration_interval_s);
  cfg.tau_alpha_s = kv.get_double("tau_alpha", cfg.tau_alpha_s);
  cfg.lr = kv.get_double("lr", cfg.lr);
  cfg.batch = kv.get_int("batch", cfg.batch);
  cfg.epochs = kv.get_int("epochs", cfg.epochs);
  cfg.lr_decay = kv.get_double("lr_decay", cfg.lr_decay);
  cfg.lr_decay_every = kv.get_int("lr_decay_every", cfg.lr_decay_every);
  cfg.dropout = kv.get_double("dropout", cfg.dropout);
  cfg.no_z = kv.get_bool("no_z", cfg.no_z);
  cfg.nlb_mode = kv.get("nlb_mode", cfg.nlb_mode);
  cfg.cb_mode = kv.get("cb_mode", cfg.cb_mode);
  cfg.window_s = kv.get_double("window", cfg.window_s);
  cfg.window_stride_s = kv.get_double("window_stride", cfg.window_stride_s);
  cfg.holdout_fraction = kv.get_double("holdout_fraction", cfg.holdout_fraction);
  cfg.min_obs_frac = kv.get_double("min_obs_frac", cfg.min_obs_frac);
  cfg.max_obs_frac = kv.get_double("max_obs_frac", cfg.max_obs_frac);
  cfg.validate();
  return cfg;
}

// --- corpus prep --------------------------------------------------------------------

CorpusSplit split_corpus(int n_sequences, const RunConfig& cfg) {
  std::vector<int> order(static_cast<size_t>(n_sequences));
  for (int i = 0; i < n_sequences; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = Rng(cfg.seed).split(1);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  CorpusSplit split;
  int n_held = static_cast<int>(std::floor(cfg.holdout_fraction * n_sequences));
  if (cfg.holdout_fraction > 0.0 && n_held == 0 && n_sequences > 1) n_held = 1;
  for (size_t i = 0; i < order.size(); ++i) {
    if (static_cast<int>(i) < n_sequences - n_held) {
      split.train.push_back(order[i]);
    } else {
      split.heldout.push_back(order[i]);
    }
  }
  return split;
}

Corpus apply_input_mode(const Corpus& corpus, const RunConfig& cfg) {
  if (cfg.input_mode != "frame_gt") return corpus;
  Corpus out = corpus;
  for (FrameSequence& seq : out.sequences) {
    seq = labels_to_onehot(seq, corpus.n_actions);
  }
  return out;
}

ModelConfig model_config_from(const RunConfig& cfg, const Corpus& corpus) {
  if (corpus.sequences.empty()) throw ConfigError("empty corpus");
  ModelConfig mc;
  mc.feat_dim = cfg.input_mode == "frame_gt" ? corpus.n_actions : corpus.sequences[0].dim();
  mc.n_actions = corpus.n_actions;
  // The auxiliary head exists only when the dataset has several complex
  // activities and the "no Z" ablation is off.
  mc.n_activities = (!cfg.no_z && corpus.n_activities > 1) ? corpus.n_activities : 0;
  mc.n_recent = cfg.task == "recognition" ? 4
                                          : static_cast<int>(cfg.snippets.recent_starts_s.size());
  mc.n_scales = static_cast<int>(cfg.snippets.spanning_scales.size());
  mc.hidden = cfg.hidden;
  mc.attn_dim = cfg.attn_dim;
  mc.dropout = cfg.dropout;
  mc.nlb_mode = nlb_mode_from_string(cfg.nlb_mode);
  mc.cb_mode = cb_mode_from_string(cfg.cb_mode);
  mc.with_dense = cfg.task == "dense";
  mc.n_duration_bins = cfg.n_duration_bins;
  mc.rnn_hidden = cfg.rnn_hidden;
  return mc;
}

// --- samples -------------------------------------------------------------------------

namespace {

int tau_frames(const RunConfig& cfg, double fps) {
  return std::max(1, static_cast<int>(std::llround(cfg.tau_alpha_s * fps)));
}

struct TrainSample {
  SnippetBank banks;
  ClassTargets cls;
  std::optional<DenseTargets> dense;
};

int activity_target(const Model& model, const FrameSequence& seq) {
  return model.cfg.n_activities > 0 ? seq.activity : -1;
}

DenseTargets dense_targets_at(const RunConfig& cfg, const Model& model, const FrameSequence& seq,
                              int t) {
  DenseTargets targets;
  targets.cls.action = seq.frame_labels[static_cast<size_t>(t)];
  targets.cls.activity = activity_target(model, seq);
  const auto segments = seq.segments();
  size_t current = 0;
  while (current < segments.size() && segments[current].end < t) ++current;
  const double remaining_s = (segments[current].end - t + 1) / seq.fps;
  targets.current_duration_bin =
      duration_to_bin(remaining_s, cfg.duration_interval_s, cfg.n_duration_bins);
  constexpr size_t kMaxFuture = 25;
  for (size_t s = current + 1; s < segments.size() && targets.future.size() < kMaxFuture; ++s) {
    targets.future.push_back(FutureStep{
        segments[s].action, duration_to_bin(segments[s].frames() / seq.fps,
                                            cfg.duration_interval_s, cfg.n_duration_bins)});
  }
  return targets;
}

std::optional<TrainSample> draw_sample(const RunConfig& cfg, const Model& model,
                                       const FrameSequence& seq, Rng& rng) {
  const int total = seq.frames();
  TrainSample sample;
  if (cfg.task == "next_action") {
    // Anticipation cuts sit tau before a segment start, matching the
    // evaluation protocol; the segment is resampled every epoch.
    const int tau = tau_frames(cfg, seq.fps);
    std::vector<int> cuts;
    for (const Segment& seg : seq.segments()) {
      if (seg.begin - tau >= 1) cuts.push_back(seg.begin - tau);
    }
    if (cuts.empty()) return std::nullopt;
    const int t = cuts[rng.below(cuts.size())];
    sample.banks = build_banks(seq, t, cfg.snippets);
    sample.cls.action = seq.frame_labels[static_cast<size_t>(std::min(total - 1, t + tau))];
    sample.cls.activity = activity_target(model, seq);
    return sample;
  }
  if (cfg.task == "dense") {
    if (total < 4) return std::nullopt;
    const double obs = rng.uniform(cfg.min_obs_frac, cfg.max_obs_frac);
    const int t = std::clamp(static_cast<int>(std::floor(obs * total)), 1, total - 2);
    sample.banks = build_banks(seq, t, cfg.snippets);
    DenseTargets targets = dense_targets_at(cfg, model, seq, t);
    sample.cls = targets.cls;
    sample.dense = std::move(targets);
    return sample;
  }
  if (cfg.task == "recognition") {
    const auto segments = seq.segments();
    if (segments.empty()) return std::nullopt;
    const Segment& seg = segments[rng.below(segments.size())];
    sample.banks = build_scope_banks(seq, recognition_scope(seg.begin, seg.end, seq), cfg.snippets);
    sample.cls.action = seg.action;
    sample.cls.activity = activity_target(model, seq);
    return sample;
  }
  // segmentation: a random window labeled by its center frame
  const int win = std::max(2, static_cast<int>(std::llround(cfg.window_s * seq.fps)));
  if (total < 2) return std::nullopt;
  const int lo = static_cast<int>(rng.below(static_cast<uint64_t>(std::max(1, total - win + 1))));
  const int hi = std::min(total - 1, lo + win - 1);
  FrameSequence view = slice_frames(seq, lo, hi);
  sample.banks = build_banks(view, view.frames() - 1, cfg.snippets);
  sample.cls.action = seq.frame_labels[static_cast<size_t>((lo + hi) / 2)];
  sample.cls.activity = activity_target(model, seq);
  return sample;
}

Tensor sample_loss(const RunConfig& cfg, const Model& model, const TrainSample& sample,
                   const Fwd& fwd) {
  if (sample.dense) return dense_loss(model, sample.banks, *sample.dense, fwd);
  return classify(model, sample.banks, fwd, sample.cls).loss;
}

// Quick per-epoch heldout metric (eval mode, no dropout).
double quick_heldout_accuracy(const RunConfig& cfg, const Model& model, const Corpus& corpus,
                              const std::vector<int>& heldout) {
  if (heldout.empty()) return 0.0;
  Fwd eval;
  int correct = 0, total = 0;
  for (int idx : heldout) {
    const FrameSequence& seq = corpus.sequences[static_cast<size_t>(idx)];
    if (cfg.task == "recognition") {
      for (const Segment& seg : seq.segments()) {
        SnippetBank banks =
            build_scope_banks(seq, recognition_scope(seg.begin, seg.end, seq), cfg.snippets);
        correct += ensemble_infer(classify(model, banks, eval).action_logits) == seg.action;
        ++total;
      }
      continue;
    }
    if (cfg.task == "segmentation") {
      const int win = std::max(2, static_cast<int>(std::llround(cfg.window_s * seq.fps)));
      for (int lo = 0; lo + win <= seq.frames(); lo += win) {
        FrameSequence view = slice_frames(seq, lo, lo + win - 1);
        SnippetBank banks = build_banks(view, view.frames() - 1, cfg.snippets);
        correct += ensemble_infer(classify(model, banks, eval).action_logits) ==
                   seq.frame_labels[static_cast<size_t>(lo + (win - 1) / 2)];
        ++total;
      }
      continue;
    }
    // next_action and dense: class accuracy at segment-boundary cuts.
    const int tau = tau_frames(cfg, seq.fps);
    for (const Segment& seg : seq.segments()) {
      const int t = seg.begin - tau;
      if (t < 1) continue;
      SnippetBank banks = build_banks(seq, t, cfg.snippets);
      correct += ensemble_infer(classify(model, banks, eval).action_logits) == seg.action;
      ++total;
    }
  }
  return total ? 100.0 * correct / total : 0.0;
}

}  // namespace

// --- training ------------------------------------------------------------------------

TrainResult train(const RunConfig& cfg, const Corpus& raw_corpus) {
  cfg.validate();
  const Corpus corpus = apply_input_mode(raw_corpus, cfg);
  for (const FrameSequence& seq : corpus.sequences) {
    if (!seq.has_labels()) throw ConfigError("training requires labeled sequences");
  }
  const CorpusSplit split = split_corpus(static_cast<int>(corpus.sequences.size()), cfg);

  const Rng master(cfg.seed);
  Rng init_rng = master.split(2);
  TrainResult result{Model::create(model_config_from(cfg, corpus), init_rng), {}, {}, {}, 0, 0};
  Model& model = result.model;
  std::vector<Tensor*> params = model.params();
  result.opt.lr = cfg.lr;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    result.opt.lr = cfg.lr_at_epoch(epoch);
    Rng epoch_rng = master.split(100 + static_cast<uint64_t>(epoch));
    Rng dropout_rng = master.split(20000 + static_cast<uint64_t>(epoch));

    std::vector<int> order = split.train;
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[epoch_rng.below(i)]);
    }

    double epoch_loss = 0.0;
    int epoch_samples = 0;
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch)) {
      Tape tape;
      for (Tensor* p : params) tape.watch(*p);
      Fwd fwd{true, &dropout_rng};
      Tensor loss;
      int batched = 0;
      for (size_t b = at; b < std::min(order.size(), at + static_cast<size_t>(cfg.batch)); ++b) {
        const FrameSequence& seq = corpus.sequences[static_cast<size_t>(order[b])];
        auto sample = draw_sample(cfg, model, seq, epoch_rng);
        if (!sample) continue;
        Tensor li = sample_loss(cfg, model, *sample, fwd);
        loss = loss.empty() ? li : add(loss, li);
        ++batched;
      }
      if (!batched) continue;
      loss = scale(loss, 1.0 / batched);
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Tensor* p : params) grads.push_back(tape.grad(*p));
      adam_step(params, grads, result.opt);
      epoch_loss += loss.item() * batched;
      epoch_samples += batched;
    }
    result.epoch_loss.push_back(epoch_samples ? epoch_loss / epoch_samples : 0.0);
    result.heldout_accuracy.push_back(quick_heldout_accuracy(cfg, model, corpus, split.heldout));
  }
  // Final RNG state recorded for the checkpoint.
  Rng tail = master.split(static_cast<uint64_t>(cfg.epochs) + 3);
  result.rng_key = tail.key();
  result.rng_counter = tail.counter();
  return result;
}

// --- evaluation ----------------------------------------------------------------------

EvalReport evaluate(const RunConfig& cfg, const Model& model, const Corpus& raw_corpus,
                    const std::vector<int>& indices, std::vector<std::string>* warnings) {
  cfg.validate();
  const Corpus corpus = apply_input_mode(raw_corpus, cfg);
  std::vector<int> idx = indices;
  if (idx.empty()) {
    for (int i = 0; i < static_cast<int>(corpus.sequences.size()); ++i) idx.push_back(i);
  }
  Fwd eval;
  EvalReport report;
  report.task = cfg.task;
  const int top_k = std::min(5, model.cfg.n_actions);

  if (cfg.task == "next_action" || cfg.task == "recognition") {
    std::vector<std::vector<double>> scores;
    std::vector<int> targets, predictions;
    for (int i : idx) {
      const FrameSequence& seq = corpus.sequences[static_cast<size_t>(i)];
      for (const Segment& seg : seq.segments()) {
        SnippetBank banks;
        int target;
        if (cfg.task == "recognition") {
          banks = build_scope_banks(seq, recognition_scope(seg.begin, seg.end, seq), cfg.snippets);
          target = seg.action;
        } else {
          const int t = seg.begin - tau_frames(cfg, seq.fps);
          if (t < 1) continue;
          banks = build_banks(seq, t, cfg.snippets);
          target = seq.frame_labels[static_cast<size_t>(
              std::min(seq.frames() - 1, t + tau_frames(cfg, seq.fps)))];
        }
        const auto s = ensemble_scores(classify(model, banks, eval).action_logits);
        predictions.push_back(argmax_lowest(s));
        scores.push_back(s);
        targets.push_back(target);
      }
    }
    if (!targets.empty()) {
      report.samples = static_cast<int>(targets.size());
      report.top1 = topk_accuracy(scores, targets, 1);
      report.top5 = topk_accuracy(scores, targets, top_k);
      report.class_mean = class_mean_accuracy(predictions, targets);
    }
    return report;
  }

  if (cfg.task == "dense") {
    std::vector<FrameSequence> subset;
    for (int i : idx) subset.push_back(corpus.sequences[static_cast<size_t>(i)]);
    auto predictor = [&](const FrameSequence& seq, int cut, int horizon) {
      SnippetBank banks = build_banks(seq, cut - 1, cfg.snippets);
      auto segments =
          dense_infer(model, banks, horizon, seq.fps, cfg.duration_interval_s, eval);
      return segments_to_frames(segments);
    };
    report.dense = dense_protocol(subset, predictor, {0.2, 0.3}, {0.1, 0.2, 0.3, 0.5}, warnings);
    report.samples = static_cast<int>(subset.size());
    // Summary scalar: the hardest cell (obs 0.3, pred 0.5) when present.
    if (auto it = report.dense.find({0.3, 0.5}); it != report.dense.end()) {
      report.class_mean = it->second;
    }
    return report;
  }

  // segmentation
  SegMatchCounts pooled;
  double edit_total = 0.0;
  int64_t frames_correct = 0, frames_total = 0, segments_total = 0;
  int n_seqs = 0;
  for (int i : idx) {
    const FrameSequence& seq = corpus.sequences[static_cast<size_t>(i)];
    const auto predicted =
        segment_sliding(model, seq, cfg.window_s, cfg.window_stride_s, cfg.snippets, eval);
    const SegMatchCounts counts = segmentation_matches(predicted, seq.frame_labels);
    pooled.matched_10 += counts.matched_10;
    pooled.matched_25 += counts.matched_25;
    pooled.matched_50 += counts.matched_50;
    pooled.n_pred += counts.n_pred;
    pooled.n_truth += counts.n_truth;
    segments_total += counts.n_pred;
    edit_total += levenshtein_edit_score(predicted, seq.frame_labels);
    for (size_t t = 0; t < predicted.size(); ++t) {
      frames_correct += predicted[t] == seq.frame_labels[t];
    }
    frames_total += seq.frames();
    ++n_seqs;
  }
  auto f1 = [](int matched, int n_pred, int n_truth) {
    if (n_pred == 0 && n_truth == 0) return 100.0;
    const double p = n_pred ? static_cast<double>(matched) / n_pred : 0.0;
    const double r = n_truth ? static_cast<double>(matched) / n_truth : 0.0;
    return p + r == 0.0 ? 0.0 : 100.0 * 2.0 * p * r / (p + r);
  };
  report.seg.f1_10 = f1(pooled.matched_10, pooled.n_pred, pooled.n_truth);
  report.seg.f1_25 = f1(pooled.matched_25, pooled.n_pred, pooled.n_truth);
  report.seg.f1_50 = f1(pooled.matched_50, pooled.n_pred, pooled.n_truth);
  report.seg.edit = n_seqs ? edit_total / n_seqs : 0.0;
  report.seg.frame_acc = frames_total ? 100.0 * frames_correct / frames_total : 0.0;
  report.mean_segments_per_sequence =
      n_seqs ? static_cast<double>(segments_total) / n_seqs : 0.0;
  report.samples = n_seqs;
  return report;
}

// --- checkpoints -----------------------------------------------------------------------

void save_checkpoint(const std::string& path, const RunConfig& cfg, Model& model,
                     const AdamState& opt, uint64_t rng_key, uint64_t rng_counter) {
  Checkpoint ckpt;
  ckpt.config = cfg.to_kv();
  ckpt.config.set("model.feat_dim", std::to_string(model.cfg.feat_dim));
  ckpt.config.set("model.n_actions", std::to_string(model.cfg.n_actions));
  ckpt.config.set("model.n_activities", std::to_string(model.cfg.n_activities));
  ckpt.config.set("model.init", "xavier_uniform");
  ckpt.config.set("model.head_init_scale", "0.1");
  ckpt.config.set("model.fuse_activation", "relu");
  for (auto& [name, tensor] : model.named_params()) {
    ckpt.tensors.emplace_back(name, *tensor);
  }
  if (opt.initialized()) {
    ckpt.adam_step = opt.step;
    ckpt.adam_m = opt.m;
    ckpt.adam_v = opt.v;
  }
  ckpt.rng_key = rng_key;
  ckpt.rng_counter = rng_counter;
  ckpt.save(path);
}

LoadedModel load_checkpoint_model(const std::string& path) {
  Checkpoint ckpt = Checkpoint::load(path);
  LoadedModel loaded{RunConfig::from_kv(ckpt.config), Model{}, {}, ckpt.rng_key,
                     ckpt.rng_counter};

  ModelConfig mc;
  mc.feat_dim = ckpt.config.get_int("model.feat_dim", 0);
  mc.n_actions = ckpt.config.get_int("model.n_actions", 0);
  mc.n_activities = ckpt.config.get_int("model.n_activities", 0);
  mc.n_recent = loaded.cfg.task == "recognition"
                    ? 4
                    : static_cast<int>(loaded.cfg.snippets.recent_starts_s.size());
  mc.n_scales = static_cast<int>(loaded.cfg.snippets.spanning_scales.size());
  mc.hidden = loaded.cfg.hidden;
  mc.attn_dim = loaded.cfg.attn_dim;
  mc.dropout = loaded.cfg.dropout;
  mc.nlb_mode = nlb_mode_from_string(loaded.cfg.nlb_mode);
  mc.cb_mode = cb_mode_from_string(loaded.cfg.cb_mode);
  mc.with_dense = loaded.cfg.task == "dense";
  mc.n_duration_bins = loaded.cfg.n_duration_bins;
  mc.rnn_hidden = loaded.cfg.rnn_hidden;

  Rng dummy(0);
  loaded.model = Model::create(mc, dummy);
  auto named = loaded.model.named_params();
  if (named.size() != ckpt.tensors.size()) {
    throw IoError(path + ": checkpoint has " + std::to_string(ckpt.tensors.size()) +
                  " tensors, model expects " + std::to_string(named.size()));
  }
  for (size_t i = 0; i < named.size(); ++i) {
    if (named[i].first != ckpt.tensors[i].first ||
        named[i].second->shape() != ckpt.tensors[i].second.shape()) {
      throw IoError(path + ": tensor mismatch at '" + ckpt.tensors[i].first + "'");
    }
    *named[i].second = ckpt.tensors[i].second;
  }
  if (!ckpt.adam_m.empty()) {
    loaded.opt.lr = loaded.cfg.lr;
    loaded.opt.step = ckpt.adam_step;
    loaded.opt.m = ckpt.adam_m;
    loaded.opt.v = ckpt.adam_v;
  }
  return loaded;
}

// --- ablations, sweeps -------------------------------------------------------------------

std::vector<std::string> ablation_axes() {
  return {"pooling_type", "recent_starts", "spanning_scales", "recent_K",    "no_Z",
          "no_NLB",       "couple_SS_only", "couple_RR_only", "no_CB",       "single_CB",
          "single_TAB"};
}

std::vector<AblationRow> ablate(const RunConfig& base, const Corpus& corpus,
                                const std::string& axis) {
  std::vector<std::pair<std::string, RunConfig>> variants;
  auto add = [&](const std::string& name, RunConfig cfg) {
    variants.emplace_back(name, std::move(cfg));
  };

  if (axis == "pooling_type") {
    for (Pooling p : {Pooling::kSample, Pooling::kMean, Pooling::kMax}) {
      RunConfig cfg = base;
      cfg.snippets.pooling = p;
      add(pooling_to_string(p) == "sample" ? "sampling" : pooling_to_string(p), cfg);
    }
  } else if (axis == "recent_starts") {
    for (double start : base.snippets.recent_starts_s) {
      RunConfig cfg = base;
      cfg.snippets.recent_starts_s = {start};
      add("start_" + std::to_string(static_cast<int>(start)) + "s", cfg);
    }
    if (base.snippets.recent_starts_s.size() > 1) add("ensemble", base);
  } else if (axis == "spanning_scales") {
    for (int k : base.snippets.spanning_scales) {
      RunConfig cfg = base;
      cfg.snippets.spanning_scales = {k};
      add("K_" + std::to_string(k), cfg);
    }
    if (base.snippets.spanning_scales.size() > 1) add("ensemble", base);
  } else if (axis == "recent_K") {
    for (int k : {1, 3, 5, 10}) {
      RunConfig cfg = base;
      cfg.snippets.recent_count = k;
      add("K_R_" + std::to_string(k), cfg);
    }
  } else if (axis == "no_Z") {
    add("full", base);
    RunConfig cfg = base;
    cfg.no_z = true;
    add("no_Z", cfg);
  } else if (axis == "no_NLB") {
    add("full", base);
    RunConfig cfg = base;
    cfg.nlb_mode = "concat_linear";
    add("nlb_concat_linear", cfg);
  } else if (axis == "couple_SS_only" || axis == "couple_RR_only") {
    add("full", base);
    RunConfig cfg = base;
    cfg.cb_mode = axis == "couple_SS_only" ? "couple_ss_only" : "couple_rr_only";
    add(axis, cfg);
  } else if (axis == "no_CB") {
    add("full", base);
    RunConfig cfg = base;
    cfg.cb_mode = "concat_linear";
    add("cb_concat_linear", cfg);
  } else if (axis == "single_CB") {
    add("full", base);
    RunConfig cfg = base;
    cfg.snippets.spanning_scales = {base.snippets.spanning_scales.front()};
    add("single_CB", cfg);
  } else if (axis == "single_TAB") {
    add("full", base);
    RunConfig cfg = base;
    cfg.snippets.recent_starts_s = {
        base.snippets.recent_starts_s[base.snippets.recent_starts_s.size() / 2]};
    add("single_TAB", cfg);
  } else {
    throw std::invalid_argument("unknown ablation axis '" + axis + "' (axes: " + [] {
      std::string all;
      for (const auto& a : ablation_axes()) all += a + " ";
      return all;
    }() + ")");
  }

  std::vector<AblationRow> rows;
  for (auto& [name, cfg] : variants) {
    cfg.seed = base.seed;  // shared seed and corpus across variants
    TrainResult trained = train(cfg, corpus);
    const CorpusSplit split = split_corpus(static_cast<int>(corpus.sequences.size()), cfg);
    AblationRow row;
    row.name = name;
    row.report = evaluate(cfg, trained.model, corpus, split.heldout);
    row.config_hash = hex64(fnv1a(cfg.to_kv().serialize()));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> spanning_sweep(const RunConfig& base, const Corpus& corpus,
                                     const std::vector<double>& fractions) {
  std::vector<SweepRow> rows;
  for (double fraction : fractions) {
    if (fraction < 0.0 || fraction > 1.0) {
      throw std::invalid_argument("sweep fractions must lie in [0,1]");
    }
    RunConfig cfg = base;
    cfg.snippets.spanning_start_fraction = fraction;
    TrainResult trained = train(cfg, corpus);
    const CorpusSplit split = split_corpus(static_cast<int>(corpus.sequences.size()), cfg);
    rows.push_back(SweepRow{fraction, evaluate(cfg, trained.model, corpus, split.heldout)});
  }
  return rows;
}

std::string ablation_table_tsv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant\ttop1\ttop5\tclass_mean\tsamples\tconfig_hash\n";
  for (const AblationRow& row : rows) {
    os << row.name << "\t" << row.report.top1 << "\t" << row.report.top5 << "\t"
       << row.report.class_mean << "\t" << row.report.samples << "\t" << row.config_hash << "\n";
  }
  return os.str();
}

std::string sweep_table_tsv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "fraction\ttop1\ttop5\tclass_mean\tsamples\n";
  for (const SweepRow& row : rows) {
    os << row.fraction << "\t" << row.report.top1 << "\t" << row.report.top5 << "\t"
       << row.report.class_mean << "\t" << row.report.samples << "\n";
  }
  return os.str();
}

}  // namespace tagg
