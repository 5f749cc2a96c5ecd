#include "tagg/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tagg {

namespace fs = std::filesystem;

namespace {

// All multi-byte values are little-endian on disk; the buffer layer below
// makes that explicit regardless of host order.
void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& bytes;
  size_t at = 0;
  const std::string path;

  void need(size_t n, const char* what) const {
    if (at + n > bytes.size()) {
      throw IoError(path + ": truncated while reading " + std::string(what) + " at byte offset " +
                    std::to_string(at));
    }
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
    at += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
    at += 8;
    return v;
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(bytes[at++]);
  }
  float f32(const char* what) {
    const uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64(const char* what) {
    const uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(size_t n, const char* what) {
    need(n, what);
    std::string s = bytes.substr(at, n);
    at += n;
    return s;
  }
};

constexpr uint32_t kNoActivity = 0xFFFFFFFFu;

}  // namespace

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// --- feature files ------------------------------------------------------------------

void write_feature_file(const std::string& path, const FrameSequence& seq) {
  seq.validate();
  std::string out;
  out += "TAGG";
  put_u32(out, 1);
  put_u32(out, static_cast<uint32_t>(seq.frames()));
  put_u32(out, static_cast<uint32_t>(seq.dim()));
  put_f32(out, static_cast<float>(seq.fps));
  out.push_back(seq.has_labels() ? 1 : 0);
  put_u32(out, seq.activity >= 0 ? static_cast<uint32_t>(seq.activity) : kNoActivity);
  for (int64_t i = 0; i < seq.features.size(); ++i) {
    put_f32(out, static_cast<float>(seq.features.data()[i]));
  }
  if (seq.has_labels()) {
    for (int label : seq.frame_labels) put_u32(out, static_cast<uint32_t>(label));
  }
  write_text_file(path, out);
}

FrameSequence read_feature_file(const std::string& path) {
  const std::string bytes = read_text_file(path);
  Reader r{bytes, 0, path};
  if (r.str(4, "magic") != "TAGG") {
    throw IoError(path + ": bad magic at byte offset 0 (expected \"TAGG\")");
  }
  const uint32_t version = r.u32("version");
  if (version != 1) throw IoError(path + ": unsupported version " + std::to_string(version));
  const uint32_t frames = r.u32("frame count");
  const uint32_t dim = r.u32("feature dim");
  if (frames == 0 || dim == 0) {
    throw IoError(path + ": zero frame count or feature dim in header");
  }
  const float fps = r.f32("fps");
  const uint8_t has_labels = r.u8("label flag");
  const uint32_t activity = r.u32("activity id");

  FrameSequence seq;
  std::vector<double> feats(static_cast<size_t>(frames) * dim);
  for (size_t i = 0; i < feats.size(); ++i) feats[i] = r.f32("features");
  seq.features = Tensor::from({static_cast<int>(frames), static_cast<int>(dim)}, std::move(feats));
  seq.fps = fps;
  seq.activity = activity == kNoActivity ? -1 : static_cast<int>(activity);
  if (has_labels) {
    seq.frame_labels.reserve(frames);
    for (uint32_t t = 0; t < frames; ++t) {
      seq.frame_labels.push_back(static_cast<int>(r.u32("labels")));
    }
  }
  if (r.at != bytes.size()) {
    throw IoError(path + ": " + std::to_string(bytes.size() - r.at) +
                  " trailing bytes at byte offset " + std::to_string(r.at));
  }
  return seq;
}

// --- sidecars ---------------------------------------------------------------------

void write_segments_file(const std::string& path, const std::vector<Segment>& segments) {
  std::ostringstream os;
  for (const Segment& s : segments) {
    os << s.begin << "," << s.end << "," << s.action << "\n";
  }
  write_text_file(path, os.str());
}

std::vector<Segment> read_segments_file(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::vector<Segment> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    Segment s;
    char c1, c2;
    std::istringstream ls(line);
    if (!(ls >> s.begin >> c1 >> s.end >> c2 >> s.action) || c1 != ',' || c2 != ',') {
      throw IoError(path + ": malformed segment line " + std::to_string(line_no));
    }
    out.push_back(s);
  }
  return out;
}

// --- corpus directories --------------------------------------------------------------

namespace {

std::string seq_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%05d", index);
  return buf;
}

}  // namespace

void save_corpus(const std::string& dir, const Corpus& corpus) {
  fs::create_directories(dir);
  KvText meta;
  meta.set("n_sequences", std::to_string(corpus.sequences.size()));
  meta.set("n_actions", std::to_string(corpus.n_actions));
  meta.set("n_activities", std::to_string(corpus.n_activities));
  meta.set_double("fps", corpus.fps);
  write_text_file(dir + "/meta.txt", meta.serialize());
  for (size_t i = 0; i < corpus.sequences.size(); ++i) {
    const std::string stem = dir + "/" + seq_name(static_cast<int>(i));
    write_feature_file(stem + ".tagg", corpus.sequences[i]);
    write_segments_file(stem + ".seg", corpus.sequences[i].segments());
  }
}

Corpus load_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir);
  KvText meta = KvText::load(dir + "/meta.txt");
  Corpus corpus;
  corpus.n_actions = meta.get_int("n_actions", 0);
  corpus.n_activities = meta.get_int("n_activities", 0);
  corpus.fps = meta.get_double("fps", 1.0);
  const int count = meta.get_int("n_sequences", 0);
  if (count < 1 || corpus.n_actions < 1) {
    throw IoError(dir + "/meta.txt: missing n_sequences or n_actions");
  }
  for (int i = 0; i < count; ++i) {
    const std::string stem = dir + "/" + seq_name(i);
    FrameSequence seq = read_feature_file(stem + ".tagg");
    if (!seq.has_labels() && fs::exists(stem + ".seg")) {
      const auto segments = read_segments_file(stem + ".seg");
      seq.frame_labels.assign(static_cast<size_t>(seq.frames()), -1);
      for (const Segment& s : segments) {
        for (int t = std::max(0, s.begin); t <= std::min(seq.frames() - 1, s.end); ++t) {
          seq.frame_labels[static_cast<size_t>(t)] = s.action;
        }
      }
    }
    corpus.sequences.push_back(std::move(seq));
  }
  return corpus;
}

// --- key=value text -------------------------------------------------------------------

KvText KvText::parse(const std::string& text) {
  KvText kv;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw IoError("config line " + std::to_string(line_no) + " has no '='");
      }
      continue;
    }
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      const size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw IoError("config line " + std::to_string(line_no) + " has empty key");
    kv.values[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KvText KvText::load(const std::string& path) { return parse(read_text_file(path)); }

std::string KvText::serialize() const {
  std::ostringstream os;
  for (const auto& [key, value] : values) os << key << " = " << value << "\n";
  return os.str();
}

std::string KvText::get(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double KvText::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : std::stod(it->second);
}

int KvText::get_int(const std::string& key, int fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : std::stoi(it->second);
}

uint64_t KvText::get_u64(const std::string& key, uint64_t fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : std::stoull(it->second);
}

bool KvText::get_bool(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw IoError("boolean config value expected for " + key + ", got '" + it->second + "'");
}

namespace {

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, Parse parse) {
  std::vector<T> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse(item));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<double> KvText::get_doubles(const std::string& key,
                                        std::vector<double> fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  return parse_list<double>(it->second, [](const std::string& s) { return std::stod(s); });
}

std::vector<int> KvText::get_ints(const std::string& key, std::vector<int> fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  return parse_list<int>(it->second, [](const std::string& s) { return std::stoi(s); });
}

void KvText::set_double(const std::string& key, double value) { values[key] = fmt_double(value); }

void KvText::set_list(const std::string& key, const std::vector<double>& list) {
  std::string s;
  for (size_t i = 0; i < list.size(); ++i) {
    if (i) s += ",";
    s += fmt_double(list[i]);
  }
  values[key] = s;
}

void KvText::set_list(const std::string& key, const std::vector<int>& list) {
  std::string s;
  for (size_t i = 0; i < list.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(list[i]);
  }
  values[key] = s;
}

// --- checkpoints ----------------------------------------------------------------------

void Checkpoint::save(const std::string& path) const {
  std::string out;
  out += "TAGGCKPT";
  put_u32(out, 1);
  const std::string config_text = config.serialize();
  put_u64(out, config_text.size());
  out += config_text;
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<uint32_t>(tensor.rank()));
    for (int ax = 0; ax < tensor.rank(); ++ax) put_u32(out, static_cast<uint32_t>(tensor.extent(ax)));
    for (int64_t i = 0; i < tensor.size(); ++i) put_f64(out, tensor.data()[i]);
  }
  const bool has_adam = !adam_m.empty();
  out.push_back(has_adam ? 1 : 0);
  if (has_adam) {
    if (adam_m.size() != tensors.size() || adam_v.size() != tensors.size()) {
      throw IoError("checkpoint optimizer state misaligned with tensors");
    }
    put_u64(out, static_cast<uint64_t>(adam_step));
    for (size_t p = 0; p < tensors.size(); ++p) {
      for (double v : adam_m[p]) put_f64(out, v);
      for (double v : adam_v[p]) put_f64(out, v);
    }
  }
  put_u64(out, rng_key);
  put_u64(out, rng_counter);
  write_text_file(path, out);
}

Checkpoint Checkpoint::load(const std::string& path) {
  const std::string bytes = read_text_file(path);
  Reader r{bytes, 0, path};
  if (r.str(8, "magic") != "TAGGCKPT") {
    throw IoError(path + ": bad checkpoint magic at byte offset 0");
  }
  const uint32_t version = r.u32("version");
  if (version != 1) throw IoError(path + ": unsupported checkpoint version");
  Checkpoint ckpt;
  const uint64_t config_len = r.u64("config length");
  ckpt.config = KvText::parse(r.str(config_len, "config"));
  const uint32_t n_tensors = r.u32("tensor count");
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const uint32_t name_len = r.u32("tensor name length");
    const std::string name = r.str(name_len, "tensor name");
    const uint32_t rank = r.u32("tensor rank");
    if (rank < 1 || rank > 3) throw IoError(path + ": bad tensor rank for " + name);
    std::vector<int> shape;
    int64_t n = 1;
    for (uint32_t ax = 0; ax < rank; ++ax) {
      shape.push_back(static_cast<int>(r.u32("tensor extent")));
      n *= shape.back();
    }
    std::vector<double> vals(static_cast<size_t>(n));
    for (int64_t v = 0; v < n; ++v) vals[static_cast<size_t>(v)] = r.f64("tensor data");
    ckpt.tensors.emplace_back(name, Tensor::from(std::move(shape), std::move(vals)));
  }
  if (r.u8("optimizer flag")) {
    ckpt.adam_step = static_cast<int64_t>(r.u64("optimizer step"));
    for (const auto& [name, tensor] : ckpt.tensors) {
      std::vector<double> m(static_cast<size_t>(tensor.size())), v(static_cast<size_t>(tensor.size()));
      for (auto& x : m) x = r.f64("adam m");
      for (auto& x : v) x = r.f64("adam v");
      ckpt.adam_m.push_back(std::move(m));
      ckpt.adam_v.push_back(std::move(v));
    }
  }
  ckpt.rng_key = r.u64("rng key");
  ckpt.rng_counter = r.u64("rng counter");
  if (r.at != bytes.size()) {
    throw IoError(path + ": trailing bytes at byte offset " + std::to_string(r.at));
  }
  return ckpt;
}

// --- hashing ---------------------------------------------------------------------------

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a_file(const std::string& path) { return fnv1a(read_text_file(path)); }

std::string hex64(uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace tagg
