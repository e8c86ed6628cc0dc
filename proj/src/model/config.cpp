#include "nmt/model/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "nmt/common/error.hpp"
#include "nmt/corpus/tokenize.hpp"

namespace nmt::model {

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected a count, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

namespace {

std::string real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool apply_model_key(ModelConfig& m, const std::string& key, const std::string& v) {
  if (key == "source_vocab") m.source_vocab = parse_count(key, v);
  else if (key == "target_vocab") m.target_vocab = parse_count(key, v);
  else if (key == "embed_dim") m.embed_dim = parse_count(key, v);
  else if (key == "hidden") m.hidden = parse_count(key, v);
  else if (key == "layers") m.layers = parse_count(key, v);
  else if (key == "heads") m.heads = parse_count(key, v);
  else if (key == "attention") m.attention = parse_attention(v);
  else if (key == "bidir") m.bidir = parse_bidir(v);
  else if (key == "dropout") m.dropout = parse_real(key, v);
  else return false;
  return true;
}

}  // namespace

std::string to_string(AttentionKind kind) { return kind == AttentionKind::kBahdanau ? "bahdanau" : "multihead"; }
std::string to_string(BidirMode mode) { return mode == BidirMode::kProject ? "project" : "concat"; }

AttentionKind parse_attention(std::string_view s) {
  if (s == "bahdanau") return AttentionKind::kBahdanau;
  if (s == "multihead") return AttentionKind::kMultiHead;
  throw ConfigError("attention: expected bahdanau or multihead, got '" + std::string(s) + "'");
}

BidirMode parse_bidir(std::string_view s) {
  if (s == "project") return BidirMode::kProject;
  if (s == "concat") return BidirMode::kConcat;
  throw ConfigError("bidir: expected project or concat, got '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (source_vocab <= 4 || target_vocab <= 4) throw ConfigError("vocabularies must hold more than the 4 specials");
  if (hidden == 0 || layers == 0) throw ConfigError("hidden and layers must be positive");
  if (bidir == BidirMode::kConcat && hidden % 2 != 0) throw ConfigError("bidir=concat needs an even hidden size");
  if (attention == AttentionKind::kMultiHead && (heads == 0 || hidden % heads != 0)) {
    throw ConfigError("heads=" + std::to_string(heads) + " does not divide hidden=" + std::to_string(hidden));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch == 0) throw ConfigError("batch must be positive");
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = corpus::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const auto key = corpus::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    kv[key] = corpus::trim(line.substr(eq + 1));
  }
  return kv;
}

std::string format_key_values(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

ModelConfig model_config_from(const std::map<std::string, std::string>& kv) {
  ModelConfig m;
  for (const auto& [k, v] : kv) {
    if (!apply_model_key(m, k, v)) throw ConfigError("unknown model key '" + k + "'");
  }
  return m;
}

TrainConfig train_config_from(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    if (apply_model_key(c.model, k, v)) continue;
    if (k == "learning_rate") c.learning_rate = parse_real(k, v);
    else if (k == "beta1") c.beta1 = parse_real(k, v);
    else if (k == "beta2") c.beta2 = parse_real(k, v);
    else if (k == "epsilon") c.epsilon = parse_real(k, v);
    else if (k == "clip_norm") c.clip_norm = parse_real(k, v);
    else if (k == "batch") c.batch = parse_count(k, v);
    else if (k == "max_steps") c.max_steps = parse_count(k, v);
    else if (k == "seed") c.seed = parse_count(k, v);
    else if (k == "checkpoint_every") c.checkpoint_every = parse_count(k, v);
    else if (k == "checkpoint_path") c.checkpoint_path = v;
    else if (k == "freeze_embeddings") c.freeze_embeddings = parse_flag(k, v);
    else if (k == "log_every") c.log_every = parse_count(k, v);
    else throw ConfigError("unknown training key '" + k + "'");
  }
  return c;
}

std::map<std::string, std::string> to_key_values(const ModelConfig& m) {
  return {{"source_vocab", std::to_string(m.source_vocab)},
          {"target_vocab", std::to_string(m.target_vocab)},
          {"embed_dim", std::to_string(m.embed_dim)},
          {"hidden", std::to_string(m.hidden)},
          {"layers", std::to_string(m.layers)},
          {"heads", std::to_string(m.heads)},
          {"attention", to_string(m.attention)},
          {"bidir", to_string(m.bidir)},
          {"dropout", real(m.dropout)}};
}

std::map<std::string, std::string> to_key_values(const TrainConfig& c) {
  auto kv = to_key_values(c.model);
  kv["learning_rate"] = real(c.learning_rate);
  kv["beta1"] = real(c.beta1);
  kv["beta2"] = real(c.beta2);
  kv["epsilon"] = real(c.epsilon);
  kv["clip_norm"] = real(c.clip_norm);
  kv["batch"] = std::to_string(c.batch);
  kv["max_steps"] = std::to_string(c.max_steps);
  kv["seed"] = std::to_string(c.seed);
  kv["checkpoint_every"] = std::to_string(c.checkpoint_every);
  if (!c.checkpoint_path.empty()) kv["checkpoint_path"] = c.checkpoint_path;
  kv["freeze_embeddings"] = c.freeze_embeddings ? "true" : "false";
  kv["log_every"] = std::to_string(c.log_every);
  return kv;
}

}  // namespace nmt::model
