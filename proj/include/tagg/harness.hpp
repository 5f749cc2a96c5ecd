// Run configuration, the training loop, task evaluation, ablation runs and
// the spanning-scope sweep.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tagg/io.hpp"
#include "tagg/metrics.hpp"
#include "tagg/model.hpp"
#include "tagg/synth.hpp"

namespace tagg {

struct RunConfig {
  std::string task = "next_action";  // next_action | dense | recognition | segmentation
  uint64_t seed = 1;
  std::string input_mode = "features";  // features | frame_gt

  SnippetConfig snippets;  // defaults: starts {10,20,30}s, K_R 5, scales {10,15,20}

  int hidden = 1024;
  int attn_dim = 0;  // 0 -> D/2
  int rnn_hidden = 512;
  int n_duration_bins = 30;
  double duration_interval_s = 20.0;
  double tau_alpha_s = 1.0;

  double lr = 1e-4;
  int batch = 10;
  int epochs = 25;
  double lr_decay = 0.1;
  int lr_decay_every = 10;
  double dropout = 0.3;

  bool no_z = false;
  std::string nlb_mode = "attention";
  std::string cb_mode = "full";

  double window_s = 5.0;
  double window_stride_s = 1.0;
  double holdout_fraction = 0.2;
  double min_obs_frac = 0.2;  // dense training cut range
  double max_obs_frac = 0.6;

  void validate() const;
  KvText to_kv() const;
  static RunConfig from_kv(const KvText& kv);

  // Learning rate for a 1-based epoch: factor `lr_decay` every
  // `lr_decay_every` epochs.
  double lr_at_epoch(int epoch) const;
};

// Deterministic holdout split (shuffled by the run seed).
struct CorpusSplit {
  std::vector<int> train;
  std::vector<int> heldout;
};
CorpusSplit split_corpus(int n_sequences, const RunConfig& cfg);

// frame_gt input mode replaces features by one-hot labels.
Corpus apply_input_mode(const Corpus& corpus, const RunConfig& cfg);

ModelConfig model_config_from(const RunConfig& cfg, const Corpus& corpus);

struct TrainResult {
  Model model;
  std::vector<double> epoch_loss;
  std::vector<double> heldout_accuracy;  // task-specific quick metric
  AdamState opt;
  uint64_t rng_key = 0, rng_counter = 0;
};

TrainResult train(const RunConfig& cfg, const Corpus& corpus);

// Evaluates the task on the given sequence subset (all when empty).
EvalReport evaluate(const RunConfig& cfg, const Model& model, const Corpus& corpus,
                    const std::vector<int>& indices = {},
                    std::vector<std::string>* warnings = nullptr);

// --- checkpoints -----------------------------------------------------------------------

void save_checkpoint(const std::string& path, const RunConfig& cfg, Model& model,
                     const AdamState& opt, uint64_t rng_key, uint64_t rng_counter);

struct LoadedModel {
  RunConfig cfg;
  Model model;
  AdamState opt;
  uint64_t rng_key = 0, rng_counter = 0;
};
LoadedModel load_checkpoint_model(const std::string& path);

// --- ablations and sweeps ----------------------------------------------------------------

struct AblationRow {
  std::string name;
  EvalReport report;
  std::string config_hash;  // fnv of the serialized variant config
};
std::vector<std::string> ablation_axes();
std::vector<AblationRow> ablate(const RunConfig& cfg, const Corpus& corpus,
                                const std::string& axis);

struct SweepRow {
  double fraction = 0.0;
  EvalReport report;
};
std::vector<SweepRow> spanning_sweep(const RunConfig& cfg, const Corpus& corpus,
                                     const std::vector<double>& fractions);

std::string ablation_table_tsv(const std::vector<AblationRow>& rows);
std::string sweep_table_tsv(const std::vector<SweepRow>& rows);

}  // namespace tagg
