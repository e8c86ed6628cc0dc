#include "nmt/pipeline/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "nmt/bpe/bpe.hpp"
#include "nmt/bpe/vocab.hpp"
#include "nmt/common/error.hpp"
#include "nmt/common/textio.hpp"
#include "nmt/corpus/corpus.hpp"
#include "nmt/corpus/tokenize.hpp"
#include "nmt/embeddings/embeddings.hpp"
#include "nmt/eval/bleu.hpp"
#include "nmt/model/checkpoint.hpp"
#include "nmt/model/heatmap.hpp"
#include "nmt/model/train.hpp"
#include "nmt/pipeline/digest.hpp"
#include "nmt/pipeline/translator.hpp"

namespace nmt::pipeline {
namespace fs = std::filesystem;
namespace {

using model::parse_count;
using model::parse_flag;

std::string fmt_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Stage {
  std::string name;
  std::map<std::string, std::string> parameters;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::function<nlohmann::json()> run;
};

class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(fs::absolute(std::move(root)).lexically_normal()) {}

  const fs::path& root() const { return root_; }
  fs::path operator/(const std::string& rel) const { return root_ / rel; }

  // Manifest path: relative to the workspace, so moving it keeps digests valid.
  std::string label(const fs::path& p) const {
    return fs::absolute(p).lexically_normal().lexically_relative(root_).generic_string();
  }

  FileRecord record(const fs::path& p) const {
    if (!fs::is_regular_file(p)) throw IoError("missing file " + p.string());
    return {label(p), sha256_file(p)};
  }

 private:
  fs::path root_;
};

std::vector<std::vector<std::string>> split_lines(const std::vector<std::string>& lines) {
  std::vector<std::vector<std::string>> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(corpus::split_whitespace(l));
  return out;
}

std::vector<Stage> build_stages(const PipelineConfig& c, const Workspace& ws) {
  std::vector<Stage> stages;
  const auto p = [&](const std::string& rel) { return ws / rel; };

  {
    Stage s;
    s.name = "clean";
    s.parameters = {{"source_lang", c.source_lang},
                    {"target_lang", c.target_lang},
                    {"max_len", std::to_string(c.max_len)},
                    {"max_reps", std::to_string(c.max_reps)},
                    {"window", std::to_string(c.window)},
                    {"test", std::to_string(c.n_test)},
                    {"dev", std::to_string(c.n_dev)},
                    {"split_seed", std::to_string(c.seed + kSplitSeedOffset)},
                    {"rules", c.rules_path.empty() ? "default" : "file"}};
    s.inputs = {c.source_path, c.target_path};
    if (!c.rules_path.empty()) s.inputs.push_back(c.rules_path);
    for (const char* split : {"train", "test", "dev"}) {
      s.outputs.push_back(p(std::string("clean/") + split + ".src"));
      s.outputs.push_back(p(std::string("clean/") + split + ".tgt"));
    }
    s.outputs.push_back(p("clean/report.json"));
    s.run = [&c, p]() {
      auto corpus = corpus::load_parallel(c.source_path, c.target_path, c.source_lang, c.target_lang);
      corpus::CleanOptions opts;
      opts.max_len = c.max_len;
      opts.max_reps = c.max_reps;
      opts.length_window = c.window;
      if (!c.rules_path.empty()) opts.rules = corpus::NoiseRuleSet::load(c.rules_path);
      auto cleaned = corpus::clean(corpus, opts);
      auto split = corpus::split_corpus(cleaned.corpus, c.n_test, c.n_dev, c.seed + kSplitSeedOffset);
      corpus::write_parallel(split.train, p("clean/train.src"), p("clean/train.tgt"));
      corpus::write_parallel(split.test, p("clean/test.src"), p("clean/test.tgt"));
      corpus::write_parallel(split.dev, p("clean/dev.src"), p("clean/dev.tgt"));
      nlohmann::json m;
      m["report"] = cleaned.report.to_json();
      m["blank_lines"] = corpus.blank_lines;
      m["counts"] = {{"train", split.train.size()}, {"test", split.test.size()}, {"dev", split.dev.size()}};
      m["split_seed"] = c.seed + kSplitSeedOffset;
      m["languages"] = {{"source", c.source_lang}, {"target", c.target_lang}};
      write_file(p("clean/report.json"), m.dump(2) + "\n");
      return m;
    };
    stages.push_back(std::move(s));
  }

  {
    Stage s;
    s.name = "bpe";
    s.parameters = {{"merges", std::to_string(c.merges)}, {"vocab", std::to_string(c.vocab)}};
    s.inputs = {p("clean/train.src"), p("clean/train.tgt"), p("clean/dev.src"), p("clean/dev.tgt")};
    s.outputs = {p("bpe/bpe.model"), p("bpe/source.vocab"), p("bpe/target.vocab"), p("bpe/train.src"),
                 p("bpe/train.tgt"),  p("bpe/dev.src"),      p("bpe/dev.tgt")};
    s.run = [&c, p]() {
      const auto train_src = read_lines(p("clean/train.src"));
      const auto train_tgt = read_lines(p("clean/train.tgt"));
      std::vector<std::string> src_words;
      std::vector<std::string> tgt_words;
      for (const auto& l : train_src) {
        src_words.push_back(corpus::join(corpus::tokenize_basic(l, corpus::TokenizeMode::kSource)));
      }
      for (const auto& l : train_tgt) {
        tgt_words.push_back(corpus::join(corpus::tokenize_basic(l, corpus::TokenizeMode::kTarget)));
      }
      std::map<std::string, bpe::WordCounts> per_language;
      const auto src_counts = bpe::count_words(src_words);
      const auto tgt_counts = bpe::count_words(tgt_words);
      if (c.source_lang == c.target_lang) {
        bpe::WordCounts both = src_counts;
        for (const auto& [w, n] : tgt_counts) both[w] += n;
        per_language[c.source_lang] = std::move(both);
      } else {
        per_language[c.source_lang] = src_counts;
        per_language[c.target_lang] = tgt_counts;
      }
      const auto model = bpe::learn_multibpe(per_language, c.merges);
      model.save(p("bpe/bpe.model"));

      const auto segment = [&](const std::vector<std::string>& lines, bool source) {
        std::vector<std::string> out;
        for (const auto& l : lines) {
          out.push_back(corpus::join(source ? segment_source(model, l) : segment_target(model, l)));
        }
        return out;
      };
      const auto seg_src = segment(train_src, true);
      const auto seg_tgt = segment(train_tgt, false);
      const auto src_vocab = bpe::build_vocab(split_lines(seg_src), c.vocab);
      const auto tgt_vocab = bpe::build_vocab(split_lines(seg_tgt), c.vocab);
      src_vocab.save(p("bpe/source.vocab"));
      tgt_vocab.save(p("bpe/target.vocab"));
      write_lines(p("bpe/train.src"), seg_src);
      write_lines(p("bpe/train.tgt"), seg_tgt);
      write_lines(p("bpe/dev.src"), segment(read_lines(p("clean/dev.src")), true));
      write_lines(p("bpe/dev.tgt"), segment(read_lines(p("clean/dev.tgt")), false));

      bpe::WordCounts all = src_counts;
      for (const auto& [w, n] : tgt_counts) all[w] += n;
      return nlohmann::json{{"merges", model.merges().size()},
                            {"source_vocab", src_vocab.size()},
                            {"target_vocab", tgt_vocab.size()},
                            {"symbols", bpe::symbol_inventory_size(all, model)}};
    };
    stages.push_back(std::move(s));
  }

  {
    Stage s;
    s.name = "train";
    auto tc = model::train_config_from(c.train);
    tc.seed = c.seed + kTrainSeedOffset;
    auto params = model::to_key_values(tc);
    params.erase("source_vocab");
    params.erase("target_vocab");
    params["init_seed"] = std::to_string(c.seed + kInitSeedOffset);
    params["embeddings"] = c.embeddings.empty() ? "none" : "file";
    s.parameters = std::move(params);
    s.inputs = {p("bpe/bpe.model"), p("bpe/source.vocab"), p("bpe/target.vocab"), p("bpe/train.src"),
                p("bpe/train.tgt")};
    if (!c.embeddings.empty()) s.inputs.push_back(c.embeddings);
    s.outputs = {p("train/model.ckpt"), p("train/loss.tsv")};
    s.run = [&c, p, tc]() mutable {
      const auto bpe_model = bpe::BpeModel::load(p("bpe/bpe.model"));
      const auto src_vocab = bpe::Vocab::load(p("bpe/source.vocab"));
      const auto tgt_vocab = bpe::Vocab::load(p("bpe/target.vocab"));
      const auto src = read_lines(p("bpe/train.src"));
      const auto tgt = read_lines(p("bpe/train.tgt"));
      if (src.size() != tgt.size()) throw AlignmentError("segmented training sides differ in length");
      std::vector<model::Example> data;
      for (std::size_t i = 0; i < src.size(); ++i) {
        model::Example e{src_vocab.encode(corpus::split_whitespace(src[i])),
                         tgt_vocab.encode(corpus::split_whitespace(tgt[i]))};
        if (e.source.empty() || e.target.empty()) continue;
        data.push_back(std::move(e));
      }
      if (data.empty()) throw std::invalid_argument("no training pairs left after segmentation");

      tc.model.source_vocab = src_vocab.size();
      tc.model.target_vocab = tgt_vocab.size();
      nlohmann::json m;
      std::optional<embeddings::EmbeddingTable> table;
      if (!c.embeddings.empty()) {
        table = embeddings::load_embedding_table(c.embeddings);
        if (tc.model.embed_dim == 0 && table->dim() != tc.model.hidden) tc.model.embed_dim = table->dim();
      }
      tc.checkpoint_path = p("train/model.ckpt").string();
      model::Seq2Seq net(tc.model, c.seed + kInitSeedOffset);
      if (table) {
        const auto width = tc.model.embedding_width();
        auto src_lookup = embeddings::build_lookup(src_vocab, &*table, width, c.seed + kEmbeddingSeedOffset);
        auto tgt_lookup = embeddings::build_lookup(tgt_vocab, &*table, width, c.seed + kEmbeddingSeedOffset + 1);
        net.tensor("src_embedding") = std::move(src_lookup.matrix);
        net.tensor("tgt_embedding") = std::move(tgt_lookup.matrix);
        m["embedding_coverage"] = {{"source_hits", src_lookup.coverage.hits},
                                   {"source_misses", src_lookup.coverage.misses},
                                   {"target_hits", tgt_lookup.coverage.hits},
                                   {"target_misses", tgt_lookup.coverage.misses}};
      }
      const auto result = model::train(net, data, tc, translator_blocks(bpe_model, src_vocab, tgt_vocab));
      std::vector<std::string> curve{"step\tloss"};
      for (std::size_t i = 0; i < result.losses.size(); ++i) {
        curve.push_back(std::to_string(i + 1) + "\t" + fmt_real(result.losses[i]));
      }
      write_lines(p("train/loss.tsv"), curve);
      m["examples"] = data.size();
      m["steps"] = result.losses.size();
      m["final_loss"] = result.losses.empty() ? 0.0 : result.losses.back();
      m["checkpoints_written"] = result.checkpoints_written;
      return m;
    };
    stages.push_back(std::move(s));
  }

  {
    Stage s;
    s.name = "translate";
    s.parameters = {{"beam", std::to_string(c.beam)}, {"max_len", std::to_string(c.decode_max_len)}};
    s.inputs = {p("train/model.ckpt"), p("clean/test.src")};
    s.outputs = {p("translate/test.hyp")};
    s.run = [&c, p]() {
      const auto translator = Translator::load(p("train/model.ckpt"));
      const auto lines = read_lines(p("clean/test.src"));
      std::vector<std::string> out;
      out.reserve(lines.size());
      for (const auto& l : lines) out.push_back(translator.translate(l, c.beam, c.decode_max_len).text);
      write_lines(p("translate/test.hyp"), out);
      return nlohmann::json{{"sentences", out.size()}};
    };
    stages.push_back(std::move(s));
  }

  {
    Stage s;
    s.name = "score";
    s.parameters = {{"lowercase", c.lowercase ? "true" : "false"}, {"max_n", "4"}, {"smoothing", "none"}};
    s.inputs = {p("translate/test.hyp"), p("clean/test.tgt")};
    s.outputs = {p("score/bleu.json")};
    s.run = [&c, p]() {
      const auto hyp = eval::tokenize_lines(read_lines(p("translate/test.hyp")), c.lowercase);
      const auto ref = eval::tokenize_lines(read_lines(p("clean/test.tgt")), c.lowercase);
      const auto report = eval::corpus_bleu(hyp, ref);
      auto j = report.to_json();
      write_file(p("score/bleu.json"), j.dump(2) + "\n");
      return j;
    };
    stages.push_back(std::move(s));
  }

  {
    Stage s;
    s.name = "attn-viz";
    s.parameters = {{"index", std::to_string(c.attn_index)},
                    {"beam", std::to_string(c.beam)},
                    {"max_len", std::to_string(c.decode_max_len)}};
    s.inputs = {p("train/model.ckpt"), p("clean/test.src")};
    s.outputs = {p("attn/attention.tsv"), p("attn/attention.tsv.pgm")};
    s.run = [&c, p]() {
      const auto translator = Translator::load(p("train/model.ckpt"));
      const auto lines = read_lines(p("clean/test.src"));
      if (c.attn_index >= lines.size()) {
        throw std::out_of_range("attn.index " + std::to_string(c.attn_index) + " but the test set has " +
                                std::to_string(lines.size()) + " sentences");
      }
      const auto t = translator.translate(lines[c.attn_index], c.beam, c.decode_max_len);
      if (t.target_subwords.empty()) throw std::runtime_error("nothing to visualize: empty translation");
      model::export_attention(t.hypothesis.attention, t.source_subwords, t.target_subwords,
                              p("attn/attention.tsv"));
      return nlohmann::json{{"index", c.attn_index},
                            {"rows", t.hypothesis.attention.rows()},
                            {"cols", t.hypothesis.attention.cols()},
                            {"translation", t.text}};
    };
    stages.push_back(std::move(s));
  }
  return stages;
}

void say(const RunOptions& o, const std::string& msg) {
  if (o.log) *o.log << msg << std::endl;
}

fs::path resolve(const fs::path& base, const std::string& v) {
  const fs::path p(v);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

PipelineConfig PipelineConfig::parse(const std::string& text, const fs::path& base_dir) {
  PipelineConfig c;
  c.base_dir = base_dir;
  std::string workdir;
  for (const auto& [k, v] : model::parse_key_values(text)) {
    if (k == "workdir") workdir = v;
    else if (k == "seed") c.seed = parse_count(k, v);
    else if (k == "data.source") c.source_path = resolve(base_dir, v);
    else if (k == "data.target") c.target_path = resolve(base_dir, v);
    else if (k == "data.source_lang") c.source_lang = v;
    else if (k == "data.target_lang") c.target_lang = v;
    else if (k == "clean.max_len") c.max_len = parse_count(k, v);
    else if (k == "clean.max_reps") c.max_reps = parse_count(k, v);
    else if (k == "clean.window") c.window = parse_count(k, v);
    else if (k == "clean.rules") c.rules_path = resolve(base_dir, v);
    else if (k == "clean.test") c.n_test = parse_count(k, v);
    else if (k == "clean.dev") c.n_dev = parse_count(k, v);
    else if (k == "bpe.merges") c.merges = parse_count(k, v);
    else if (k == "bpe.vocab") c.vocab = parse_count(k, v);
    else if (k == "train.embeddings") c.embeddings = resolve(base_dir, v);
    else if (k.rfind("train.", 0) == 0) {
      const auto sub = k.substr(6);
      if (sub == "seed" || sub == "checkpoint_path" || sub == "source_vocab" || sub == "target_vocab") {
        throw ConfigError(k + " is derived by the pipeline and cannot be set");
      }
      c.train[sub] = v;
    } else if (k == "translate.beam") c.beam = parse_count(k, v);
    else if (k == "translate.max_len") c.decode_max_len = parse_count(k, v);
    else if (k == "score.lowercase") c.lowercase = parse_flag(k, v);
    else if (k == "attn.index") c.attn_index = parse_count(k, v);
    else throw ConfigError("unknown pipeline key '" + k + "'");
  }
  if (c.source_path.empty() || c.target_path.empty()) throw ConfigError("data.source and data.target are required");
  if (c.beam == 0) throw ConfigError("translate.beam must be at least 1");
  auto tc = model::train_config_from(c.train);
  tc.model.source_vocab = tc.model.target_vocab = bpe::Vocab::kNumSpecials + 1;  // real sizes come from the bpe stage
  tc.validate();
  if (!workdir.empty()) {
    c.workdir = resolve(base_dir, workdir);
  } else if (const char* env = std::getenv(kWorkspaceEnv); env != nullptr && *env != '\0') {
    c.workdir = env;
  } else {
    c.workdir = base_dir / "work";
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  return parse(read_file(path), fs::absolute(path).parent_path());
}

RunResult run_pipeline(const fs::path& config_path, const RunOptions& options) {
  return run_pipeline(PipelineConfig::load(config_path), options);
}

RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  fs::create_directories(config.workdir);
  const Workspace ws(config.workdir);
  RunResult result;
  result.manifest_path = ws / kManifestName;
  Manifest previous;
  if (fs::exists(result.manifest_path)) previous = Manifest::load(result.manifest_path);
  result.manifest = previous;

  const auto stages = build_stages(config, ws);
  for (const auto& stage : stages) {
    StageRecord record;
    record.name = stage.name;
    record.parameters = stage.parameters;
    try {
      for (const auto& in : stage.inputs) record.inputs.push_back(ws.record(in));
      const StageRecord* old = previous.find(stage.name);
      if (!options.force && old != nullptr && old->status == "ok" && old->parameters == record.parameters &&
          old->inputs == record.inputs) {
        for (const auto& out : old->outputs) {
          const auto path = ws.root() / out.path;
          if (!fs::is_regular_file(path)) throw IoError("output " + out.path + " is missing");
          const auto digest = sha256_file(path);
          if (digest != out.sha256) {
            throw FormatError("digest mismatch for " + out.path + " (recorded " + out.sha256.substr(0, 12) +
                              ", found " + digest.substr(0, 12) + ")");
          }
        }
        result.manifest.put(*old);
        result.outcomes.push_back({stage.name, StageAction::kSkipped, "inputs unchanged"});
        say(options, "[" + stage.name + "] skipped (inputs unchanged)");
        continue;
      }
      say(options, "[" + stage.name + "] running");
      for (const auto& out : stage.outputs) fs::create_directories(out.parent_path());
      record.metrics = stage.run();
      for (const auto& out : stage.outputs) record.outputs.push_back(ws.record(out));
      record.digest = combined_digest(record.outputs);
      record.status = "ok";
      record.timestamp = current_timestamp();
      result.manifest.put(record);
      result.manifest.save(result.manifest_path);
      result.outcomes.push_back({stage.name, StageAction::kRan, ""});
      say(options, "[" + stage.name + "] done");
    } catch (const std::exception& e) {
      record.status = "failed";
      record.error = std::string("stage '") + stage.name + "': " + e.what();
      record.outputs.clear();
      record.timestamp = current_timestamp();
      result.manifest.put(record);
      result.manifest.truncate_after(stage.name);
      result.manifest.save(result.manifest_path);
      result.outcomes.push_back({stage.name, StageAction::kFailed, record.error});
      result.exit_status = 1;
      say(options, "[" + stage.name + "] FAILED: " + record.error);
      return result;
    }
  }
  result.manifest.save(result.manifest_path);
  return result;
}

std::string describe(const Manifest& manifest) {
  if (manifest.empty()) return "no stages\n";
  std::ostringstream out;
  out << std::left << std::setw(11) << "stage" << std::setw(8) << "status" << std::setw(14) << "digest"
      << "timestamp\n";
  for (const auto& s : manifest.stages()) {
    out << std::setw(11) << s.name << std::setw(8) << s.status << std::setw(14) << s.digest.substr(0, 12)
        << s.timestamp << '\n';
    for (const auto& [k, v] : s.parameters) out << "    " << k << " = " << v << '\n';
    if (!s.error.empty()) out << "    error: " << s.error << '\n';
  }
  if (const auto* clean = manifest.find("clean"); clean != nullptr && clean->metrics.contains("counts")) {
    const auto& m = clean->metrics;
    out << "\ncorpus (" << m["languages"].value("source", "?") << "-" << m["languages"].value("target", "?")
        << ")\n";
    const auto& r = m["report"];
    out << "  " << std::setw(9) << "input" << r.value("input_size", 0) << '\n';
    out << "  " << std::setw(9) << "removed" << r.value("input_size", 0) - r.value("output_size", 0)
        << " (duplicate " << r.value("exact_dup", 0) << ", conflict " << r.value("conflict", 0) << ", length "
        << r.value("over_length", 0) << ", noise " << r.value("noise", 0) << ")\n";
    for (const char* split : {"train", "test", "dev"}) {
      out << "  " << std::setw(9) << split << m["counts"].value(split, 0) << '\n';
    }
  }
  if (const auto* score = manifest.find("score"); score != nullptr && score->metrics.contains("bleu")) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", score->metrics["bleu"].get<double>());
    out << "\nBLEU " << buf << '\n';
  }
  return out.str();
}

std::string describe(const fs::path& manifest_path) { return describe(Manifest::load(manifest_path)); }

fs::path default_workspace() {
  if (const char* env = std::getenv(kWorkspaceEnv); env != nullptr && *env != '\0') return env;
  return fs::current_path();
}

}  // namespace nmt::pipeline
