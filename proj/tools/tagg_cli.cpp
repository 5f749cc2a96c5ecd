// Command-line harness: generate / train / evaluate / ablate / sweep.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "tagg/harness.hpp"

namespace fs = std::filesystem;
using namespace tagg;

namespace {

struct ConfigFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;  // kv-key, value

  // Registers a flag that overrides one config key when provided.
  void add(CLI::App* cmd, const std::string& flag, const std::string& key,
           const std::string& help) {
    cmd->add_option_function<std::string>(
           flag, [this, key](const std::string& v) { overrides.emplace_back(key, v); }, help)
        ->expected(1);
  }

  RunConfig resolve(const std::string& task, uint64_t seed) const {
    KvText kv;
    if (!config_path.empty()) kv = KvText::load(config_path);
    for (const auto& [key, value] : overrides) kv.set(key, value);
    kv.set("task", task);
    kv.set("seed", std::to_string(seed));
    return RunConfig::from_kv(kv);
  }
};

void register_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key=value config file (flags override it)");
  flags.add(cmd, "--recent-starts", "recent_starts", "recent start offsets in seconds (csv)");
  flags.add(cmd, "--recent-k", "recent_k", "snippets per recent window (K_R)");
  flags.add(cmd, "--spanning-scales", "spanning_scales", "spanning snippet counts (csv)");
  flags.add(cmd, "--spanning-start-fraction", "spanning_start_fraction",
            "spanning start as a fraction of t (0 = full past)");
  flags.add(cmd, "--pooling", "pooling", "snippet pooling: max|mean|sample");
  flags.add(cmd, "--hidden", "hidden", "width of the aggregate representations (H)");
  flags.add(cmd, "--attn-dim", "attn_dim", "attention width (0 -> D/2)");
  flags.add(cmd, "--rnn-hidden", "rnn_hidden", "rollout cell width");
  flags.add(cmd, "--duration-bins", "n_duration_bins", "duration bins for dense anticipation");
  flags.add(cmd, "--duration-interval", "duration_interval", "seconds per duration bin");
  flags.add(cmd, "--tau-alpha", "tau_alpha", "anticipation horizon in seconds");
  flags.add(cmd, "--lr", "lr", "learning rate");
  flags.add(cmd, "--batch", "batch", "sequences per optimizer step");
  flags.add(cmd, "--epochs", "epochs", "training epochs");
  flags.add(cmd, "--dropout", "dropout", "dropout rate");
  flags.add(cmd, "--no-z", "no_z", "drop the complex-activity loss (true|false)");
  flags.add(cmd, "--nlb-mode", "nlb_mode", "attention|concat_linear");
  flags.add(cmd, "--cb-mode", "cb_mode", "full|couple_ss_only|couple_rr_only|concat_linear");
  flags.add(cmd, "--window", "window", "segmentation window in seconds");
  flags.add(cmd, "--window-stride", "window_stride", "segmentation stride in seconds");
  flags.add(cmd, "--input-mode", "input_mode", "features|frame_gt");
  flags.add(cmd, "--holdout-fraction", "holdout_fraction", "held-out fraction of sequences");
}

std::string train_log_tsv(const TrainResult& result, const RunConfig& cfg) {
  std::ostringstream os;
  os << "epoch\tlr\ttrain_loss\theldout_accuracy\n";
  for (size_t e = 0; e < result.epoch_loss.size(); ++e) {
    os << (e + 1) << "\t" << cfg.lr_at_epoch(static_cast<int>(e) + 1) << "\t"
       << result.epoch_loss[e] << "\t" << result.heldout_accuracy[e] << "\n";
  }
  return os.str();
}

void write_report_files(const std::string& out_dir, const EvalReport& report,
                        const std::vector<std::string>& warnings) {
  write_text_file(out_dir + "/report.txt", report.to_text());
  if (!report.dense.empty()) {
    std::ostringstream os;
    os << "obs\tpred\tclass_mean\n";
    for (const auto& [key, value] : report.dense) {
      os << key.first << "\t" << key.second << "\t" << value << "\n";
    }
    write_text_file(out_dir + "/dense_table.tsv", os.str());
  }
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal aggregate representations for long-range sequence anticipation"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "write a synthetic corpus");
  std::string gen_preset = "desk", gen_out;
  uint64_t gen_seed = 1;
  int gen_sequences = 0;
  generate->add_option("--preset", gen_preset, [] {
    std::string help = "corpus preset:";
    for (const auto& name : preset_names()) help += " " + name;
    return help;
  }());
  generate->add_option("--out", gen_out, "output corpus directory")->required();
  generate->add_option("--seed", gen_seed, "generator seed")->required();
  generate->add_option("--sequences", gen_sequences, "sequence count (0 = preset default)");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model on a corpus");
  std::string train_corpus, train_out, train_task = "next_action";
  uint64_t train_seed = 0;
  ConfigFlags train_flags;
  train_cmd->add_option("--corpus", train_corpus, "corpus directory")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--seed", train_seed, "run seed")->required();
  train_cmd->add_option("--task", train_task, "next_action|dense|recognition|segmentation")
      ->required();
  register_config_flags(train_cmd, train_flags);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint");
  std::string eval_ckpt, eval_corpus, eval_out, eval_task;
  uint64_t eval_seed = 0;
  bool eval_heldout_only = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "corpus directory")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_option("--seed", eval_seed, "run seed")->required();
  eval_cmd->add_option("--task", eval_task, "must match the checkpoint task")->required();
  eval_cmd->add_flag("--heldout-only", eval_heldout_only,
                     "evaluate only the held-out split of the checkpoint seed");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate variants along one axis");
  std::string ab_corpus, ab_out, ab_task = "next_action", ab_axis;
  uint64_t ab_seed = 0;
  ConfigFlags ab_flags;
  ablate_cmd->add_option("--corpus", ab_corpus, "corpus directory")->required();
  ablate_cmd->add_option("--out", ab_out, "output directory")->required();
  ablate_cmd->add_option("--seed", ab_seed, "run seed (shared across variants)")->required();
  ablate_cmd->add_option("--task", ab_task, "task for every variant")->required();
  ablate_cmd
      ->add_option("--axis", ab_axis,
                   [] {
                     std::string help = "axis:";
                     for (const auto& a : ablation_axes()) help += " " + a;
                     return help;
                   }())
      ->required();
  register_config_flags(ablate_cmd, ab_flags);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "spanning-scope sweep");
  std::string sw_corpus, sw_out, sw_task = "next_action", sw_fractions = "0,0.3,0.6,0.9";
  uint64_t sw_seed = 0;
  ConfigFlags sw_flags;
  sweep_cmd->add_option("--corpus", sw_corpus, "corpus directory")->required();
  sweep_cmd->add_option("--out", sw_out, "output directory")->required();
  sweep_cmd->add_option("--seed", sw_seed, "run seed (shared across fractions)")->required();
  sweep_cmd->add_option("--task", sw_task, "task to sweep")->required();
  sweep_cmd->add_option("--fractions", sw_fractions, "spanning start fractions (csv)");
  register_config_flags(sweep_cmd, sw_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      Preset preset = make_preset(gen_preset, gen_seed);
      const int count = gen_sequences > 0 ? gen_sequences : preset.default_sequences;
      Corpus corpus = generate_corpus(preset.grammars, preset.emitter, count, preset.fps, gen_seed);
      save_corpus(gen_out, corpus);
      std::cout << "wrote " << count << " sequences (" << preset.description << ") to " << gen_out
                << "\n";
      return 0;
    }

    if (*train_cmd) {
      RunConfig cfg = train_flags.resolve(train_task, train_seed);
      Corpus corpus = load_corpus(train_corpus);
      TrainResult result = train(cfg, corpus);
      fs::create_directories(train_out);
      const std::string ckpt_path = train_out + "/model.ckpt";
      save_checkpoint(ckpt_path, cfg, result.model, result.opt, result.rng_key,
                      result.rng_counter);
      write_text_file(train_out + "/train_log.tsv", train_log_tsv(result, cfg));
      write_text_file(train_out + "/config.txt", cfg.to_kv().serialize());
      std::cout << "final train loss " << result.epoch_loss.back() << ", held-out accuracy "
                << result.heldout_accuracy.back() << "\n";
      std::cout << "checkpoint " << ckpt_path << " fnv64 " << hex64(fnv1a_file(ckpt_path)) << "\n";
      return 0;
    }

    if (*eval_cmd) {
      LoadedModel loaded = load_checkpoint_model(eval_ckpt);
      if (loaded.cfg.task != eval_task) {
        throw ConfigError("checkpoint was trained for task '" + loaded.cfg.task +
                          "', requested '" + eval_task + "'");
      }
      loaded.cfg.seed = eval_seed;
      Corpus corpus = load_corpus(eval_corpus);
      std::vector<int> subset;
      if (eval_heldout_only) {
        subset = split_corpus(static_cast<int>(corpus.sequences.size()), loaded.cfg).heldout;
      }
      std::vector<std::string> warnings;
      EvalReport report = evaluate(loaded.cfg, loaded.model, corpus, subset, &warnings);
      fs::create_directories(eval_out);
      write_report_files(eval_out, report, warnings);
      std::cout << report.to_text();
      return 0;
    }

    if (*ablate_cmd) {
      RunConfig cfg = ab_flags.resolve(ab_task, ab_seed);
      Corpus corpus = load_corpus(ab_corpus);
      auto rows = ablate(cfg, corpus, ab_axis);
      fs::create_directories(ab_out);
      const std::string tsv = ablation_table_tsv(rows);
      write_text_file(ab_out + "/ablation_" + ab_axis + ".tsv", tsv);
      std::cout << tsv;
      return 0;
    }

    if (*sweep_cmd) {
      RunConfig cfg = sw_flags.resolve(sw_task, sw_seed);
      Corpus corpus = load_corpus(sw_corpus);
      KvText fractions_kv;
      fractions_kv.set("fractions", sw_fractions);
      auto rows = spanning_sweep(cfg, corpus, fractions_kv.get_doubles("fractions", {}));
      fs::create_directories(sw_out);
      const std::string tsv = sweep_table_tsv(rows);
      write_text_file(sw_out + "/sweep.tsv", tsv);
      std::cout << tsv;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
