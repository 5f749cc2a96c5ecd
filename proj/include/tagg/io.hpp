// Persistence: binary feature files ("TAGG"), annotation sidecars, corpus
// directories, key=value config text, and bitwise-stable checkpoints.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tagg/snippets.hpp"
#include "tagg/synth.hpp"
#include "tagg/tensor.hpp"

namespace tagg {

// Feature file layout (little-endian):
//   magic "TAGG", u32 version=1, u32 T, u32 D, f32 fps, u8 has_labels,
//   u32 activity (0xFFFFFFFF when absent), T*D f32 row-major features,
//   then (if has_labels) T u32 labels.
void write_feature_file(const std::string& path, const FrameSequence& seq);
FrameSequence read_feature_file(const std::string& path);  // IoError names byte offsets

// One line per segment: "start_frame,end_frame,action_id" (end inclusive).
void write_segments_file(const std::string& path, const std::vector<Segment>& segments);
std::vector<Segment> read_segments_file(const std::string& path);

// Corpus directory: meta.txt plus seq_#####.tagg / seq_#####.seg pairs.
void save_corpus(const std::string& dir, const Corpus& corpus);
Corpus load_corpus(const std::string& dir);

// Ordered key=value text ('#' comments). Serialization sorts keys.
struct KvText {
  std::map<std::string, std::string> values;

  static KvText parse(const std::string& text);
  static KvText load(const std::string& path);
  std::string serialize() const;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<int> get_ints(const std::string& key, std::vector<int> fallback) const;

  void set(const std::string& key, const std::string& value) { values[key] = value; }
  void set_double(const std::string& key, double value);
  void set_list(const std::string& key, const std::vector<double>& values);
  void set_list(const std::string& key, const std::vector<int>& values);
};

// Checkpoint: config snapshot, named f64 tensors, Adam moments, RNG state.
// Load followed by save reproduces the bytes exactly.
struct Checkpoint {
  KvText config;
  std::vector<std::pair<std::string, Tensor>> tensors;
  int64_t adam_step = 0;
  std::vector<std::vector<double>> adam_m, adam_v;  // aligned with tensors
  uint64_t rng_key = 0, rng_counter = 0;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

uint64_t fnv1a(const std::string& bytes);
uint64_t fnv1a_file(const std::string& path);
std::string hex64(uint64_t value);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace tagg
