#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace nmt::model {

enum class AttentionKind { kBahdanau, kMultiHead };

// How the two encoder directions form the model width:
//   project: each direction has `hidden` units, the 2*hidden concatenation
//            is projected back to hidden;
//   concat:  each direction has hidden/2 units, concatenated as-is.
enum class BidirMode { kProject, kConcat };

std::string to_string(AttentionKind kind);
std::string to_string(BidirMode mode);
AttentionKind parse_attention(std::string_view s);
BidirMode parse_bidir(std::string_view s);

struct ModelConfig {
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
  // 0 means "same as hidden"; otherwise embeddings are projected to hidden.
  std::size_t embed_dim = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  AttentionKind attention = AttentionKind::kMultiHead;
  BidirMode bidir = BidirMode::kProject;
  double dropout = 0.3;

  std::size_t embedding_width() const { return embed_dim == 0 ? hidden : embed_dim; }
  std::size_t direction_width() const { return bidir == BidirMode::kConcat ? hidden / 2 : hidden; }

  // Throws ConfigError on inconsistent shapes (e.g. heads not dividing hidden).
  void validate() const;
};

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 5.0;
  std::size_t batch = 32;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;
  std::string checkpoint_path;
  bool freeze_embeddings = false;
  std::size_t log_every = 0;

  void validate() const;
};

// Flat key=value text: blank lines and '#' comments ignored.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// Value parsers for key=value configs; errors name the key.
std::size_t parse_count(const std::string& key, const std::string& v);
double parse_real(const std::string& key, const std::string& v);
bool parse_flag(const std::string& key, const std::string& v);
std::string format_key_values(const std::map<std::string, std::string>& kv);

// Unknown keys are rejected. Keys mirror the field names; model fields are
// unprefixed (hidden, layers, heads, attention, bidir, dropout, embed_dim).
TrainConfig train_config_from(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> to_key_values(const TrainConfig& config);
std::map<std::string, std::string> to_key_values(const ModelConfig& config);
ModelConfig model_config_from(const std::map<std::string, std::string>& kv);

}  // namespace nmt::model
