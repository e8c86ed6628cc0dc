#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

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
#include "nmt/pipeline/pipeline.hpp"
#include "nmt/pipeline/translator.hpp"

namespace fs = std::filesystem;
using namespace nmt;

namespace {

corpus::TokenizeMode tokenize_mode(const std::string& s) {
  if (s == "source") return corpus::TokenizeMode::kSource;
  if (s == "target") return corpus::TokenizeMode::kTarget;
  throw ConfigError("--tokenize must be source or target, got '" + s + "'");
}

std::vector<std::string> pretokenize(const std::vector<std::string>& lines, corpus::TokenizeMode mode) {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(corpus::join(corpus::tokenize_basic(l, mode)));
  return out;
}

void emit(const std::vector<std::string>& lines, const std::string& path) {
  if (path.empty() || path == "-") {
    for (const auto& l : lines) std::cout << l << '\n';
  } else {
    write_lines(path, lines);
  }
}

std::vector<std::string> input_lines(const std::string& path) {
  if (path.empty() || path == "-") {
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(std::cin, l)) lines.push_back(l);
    return lines;
  }
  return read_lines(path);
}

// Training config for `train --config`: data.* and output keys, the rest
// are training keys.
struct TrainJob {
  fs::path source, target, source_vocab, target_vocab, bpe_model, output;
  model::TrainConfig train;
};

TrainJob load_train_job(const fs::path& path) {
  const auto base = fs::absolute(path).parent_path();
  const auto at = [&](const std::string& v) {
    fs::path p(v);
    return p.is_absolute() ? p : base / p;
  };
  TrainJob job;
  std::map<std::string, std::string> rest;
  for (const auto& [k, v] : model::parse_key_values(read_file(path))) {
    if (k == "data.source") job.source = at(v);
    else if (k == "data.target") job.target = at(v);
    else if (k == "data.source_vocab") job.source_vocab = at(v);
    else if (k == "data.target_vocab") job.target_vocab = at(v);
    else if (k == "data.bpe") job.bpe_model = at(v);
    else if (k == "output") job.output = at(v);
    else rest[k] = v;
  }
  job.train = model::train_config_from(rest);
  for (const auto& [name, p] : std::map<std::string, fs::path>{{"data.source", job.source},
                                                                {"data.target", job.target},
                                                                {"data.source_vocab", job.source_vocab},
                                                                {"data.target_vocab", job.target_vocab},
                                                                {"data.bpe", job.bpe_model},
                                                                {"output", job.output}}) {
    if (p.empty()) throw ConfigError(path.string() + ": missing key " + name);
  }
  return job;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale neural machine translation toolkit"};
  app.require_subcommand(1);

  // clean
  std::string src, tgt, rules, report_path, split_dir, src_lang = "en", tgt_lang = "ta";
  std::size_t n_test = 0, n_dev = 0;
  std::uint64_t seed = 1;
  std::size_t max_len = 50, max_reps = 2, window = 5;
  auto* clean = app.add_subcommand("clean", "Remove noise, duplicates, conflicting and over-long pairs");
  clean->add_option("--src", src, "Source side, one sentence per line")->required();
  clean->add_option("--tgt", tgt, "Target side, line-aligned")->required();
  clean->add_option("--out", split_dir, "Output directory")->required();
  clean->add_option("--src-lang", src_lang);
  clean->add_option("--tgt-lang", tgt_lang);
  clean->add_option("--max-len", max_len, "Maximum tokens per side");
  clean->add_option("--max-reps", max_reps, "Allowed translations per sentence");
  clean->add_option("--window", window, "Length window for conflicting translations");
  clean->add_option("--rules", rules, "Noise rule file (default rules otherwise)");
  clean->add_option("--seed", seed, "Split seed");
  clean->add_option("--test", n_test, "Test pairs (0 with --dev 0 skips the split)");
  clean->add_option("--dev", n_dev, "Dev pairs");

  // split
  auto* split = app.add_subcommand("split", "Seeded train/test/dev split");
  split->add_option("--src", src)->required();
  split->add_option("--tgt", tgt)->required();
  split->add_option("--out", split_dir, "Directory for {train,test,dev}.{src,tgt}")->required();
  split->add_option("--test", n_test)->required();
  split->add_option("--dev", n_dev)->required();
  split->add_option("--seed", seed);

  // bpe-learn / bpe-learn-multi / bpe-apply
  std::vector<std::string> inputs;
  std::string bpe_out, tokenize = "target", lang;
  std::size_t merges = 1000;
  auto* bpe_learn = app.add_subcommand("bpe-learn", "Learn a BPE merge table");
  bpe_learn->add_option("--input", inputs, "Training text (repeatable)")->required();
  bpe_learn->add_option("--merges", merges, "Number of merges");
  bpe_learn->add_option("--output", bpe_out, "Merge table path")->required();
  bpe_learn->add_option("--tokenize", tokenize, "source (isolate punctuation) or target (whitespace)");
  bpe_learn->add_option("--lang", lang, "Language tag stored in the model");

  std::vector<std::string> lang_inputs;
  auto* bpe_multi = app.add_subcommand("bpe-learn-multi", "Learn one BPE table shared by several languages");
  bpe_multi->add_option("--inputs,--input", lang_inputs, "LANG=PATH, one or more")->required();
  bpe_multi->add_option("--merges", merges);
  bpe_multi->add_option("--output", bpe_out)->required();
  bpe_multi->add_option("--tokenize", tokenize);

  std::string bpe_model_path, apply_in, apply_out, vocab_out;
  std::size_t vocab_size = 2000;
  auto* bpe_apply = app.add_subcommand("bpe-apply", "Segment text with a merge table");
  bpe_apply->add_option("--model", bpe_model_path)->required();
  bpe_apply->add_option("--input", apply_in, "Text to segment ('-' for stdin)")->required();
  bpe_apply->add_option("--output", apply_out, "Segmented text ('-' for stdout)");
  bpe_apply->add_option("--tokenize", tokenize);
  bpe_apply->add_option("--vocab", vocab_out, "Also write a vocabulary built from the output");
  bpe_apply->add_option("--vocab-size", vocab_size, "Vocabulary cap including specials");

  // train
  std::string config_path, embeddings_path;
  bool freeze = false;
  auto* train = app.add_subcommand("train", "Train a model from a key=value config");
  train->add_option("--config", config_path)->required();
  train->add_option("--embeddings", embeddings_path, "Pretrained subword vectors for both embedding tables");
  train->add_flag("--freeze-embeddings", freeze);

  // translate
  std::string model_path, input_path, output_path;
  std::size_t beam = 5, decode_len = 100;
  auto* translate = app.add_subcommand("translate", "Translate text with a checkpoint");
  translate->add_option("--model", model_path)->required();
  translate->add_option("--input", input_path, "Source text ('-' for stdin)")->required();
  translate->add_option("--output", output_path);
  translate->add_option("--beam", beam, "Beam width (1 = greedy)");
  translate->add_option("--max-len", decode_len, "Maximum output subwords");

  // score
  std::string hyp_path, ref_path, smoothing = "none";
  bool lowercase = false;
  auto* score = app.add_subcommand("score", "Corpus BLEU");
  score->add_option("--hyp", hyp_path)->required();
  score->add_option("--ref", ref_path)->required();
  score->add_flag("--lowercase", lowercase);
  score->add_option("--smoothing", smoothing, "none or add-one");
  score->add_option("--report", report_path, "Write the full report as JSON");

  // attn-viz
  std::size_t index = 0;
  auto* viz = app.add_subcommand("attn-viz", "Export an attention heatmap for one sentence");
  viz->add_option("--model", model_path)->required();
  viz->add_option("--input", input_path, "Source text file")->required();
  viz->add_option("--index", index, "Line to visualize");
  viz->add_option("--output", output_path, "TSV path; the image goes to PATH.pgm")->required();
  viz->add_option("--beam", beam);
  viz->add_option("--max-len", decode_len);

  // pipeline / describe
  bool force = false;
  auto* pipe = app.add_subcommand("pipeline", "Run every stage from a pipeline config");
  pipe->add_option("--config", config_path)->required();
  pipe->add_flag("--force", force, "Rerun stages even if their inputs are unchanged");

  std::string manifest_path;
  auto* describe = app.add_subcommand("describe", "Summarize a pipeline manifest");
  describe->add_option("--manifest", manifest_path, "Default: $NMT_WORKSPACE/manifest.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*clean) {
      corpus::CleanOptions opts;
      opts.max_len = max_len;
      opts.max_reps = max_reps;
      opts.length_window = window;
      if (!rules.empty()) opts.rules = corpus::NoiseRuleSet::load(rules);
      const auto corpus = corpus::load_parallel(src, tgt, src_lang, tgt_lang);
      const auto result = corpus::clean(corpus, opts);
      const fs::path dir(split_dir);
      fs::create_directories(dir);
      corpus::write_parallel(result.corpus, dir / "clean.src", dir / "clean.tgt");
      auto j = result.report.to_json();
      j["blank_lines"] = corpus.blank_lines;
      write_file(dir / "report.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << '\n';
      if (n_test + n_dev > 0) {
        const auto parts = corpus::split_corpus(result.corpus, n_test, n_dev, seed);
        nlohmann::json manifest{{"seed", seed}, {"languages", {src_lang, tgt_lang}}};
        for (const auto& [name, part] : {std::pair{"train", &parts.train}, std::pair{"test", &parts.test},
                                         std::pair{"dev", &parts.dev}}) {
          const auto s_path = dir / (std::string(name) + ".src");
          const auto t_path = dir / (std::string(name) + ".tgt");
          corpus::write_parallel(*part, s_path, t_path);
          manifest["splits"][name] = {{"pairs", part->size()},
                                      {"source", s_path.filename().string()},
                                      {"target", t_path.filename().string()}};
        }
        write_file(dir / "split.json", manifest.dump(2) + "\n");
        std::cout << "train " << parts.train.size() << "\ntest " << parts.test.size() << "\ndev "
                  << parts.dev.size() << '\n';
      }
    } else if (*split) {
      const auto corpus = corpus::load_parallel(src, tgt);
      const auto parts = corpus::split_corpus(corpus, n_test, n_dev, seed);
      fs::create_directories(split_dir);
      const fs::path dir(split_dir);
      corpus::write_parallel(parts.train, dir / "train.src", dir / "train.tgt");
      corpus::write_parallel(parts.test, dir / "test.src", dir / "test.tgt");
      corpus::write_parallel(parts.dev, dir / "dev.src", dir / "dev.tgt");
      std::cout << "train " << parts.train.size() << "\ntest " << parts.test.size() << "\ndev " << parts.dev.size()
                << '\n';
    } else if (*bpe_learn) {
      std::vector<std::string> lines;
      for (const auto& in : inputs) {
        auto l = read_lines(in);
        lines.insert(lines.end(), l.begin(), l.end());
      }
      std::vector<std::string> languages;
      if (!lang.empty()) languages.push_back(lang);
      const auto model = bpe::learn_bpe(bpe::count_words(pretokenize(lines, tokenize_mode(tokenize))), merges,
                                        std::string(bpe::kDefaultEndMarker), languages);
      model.save(bpe_out);
      std::cerr << "learned " << model.merges().size() << " merges\n";
    } else if (*bpe_multi) {
      std::map<std::string, bpe::WordCounts> corpora;
      for (const auto& arg : lang_inputs) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--inputs expects LANG=PATH, got '" + arg + "'");
        const auto counts = bpe::count_words(pretokenize(read_lines(arg.substr(eq + 1)), tokenize_mode(tokenize)));
        auto& dst = corpora[arg.substr(0, eq)];
        for (const auto& [w, n] : counts) dst[w] += n;
      }
      const auto model = bpe::learn_multibpe(corpora, merges);
      model.save(bpe_out);
      std::cerr << "learned " << model.merges().size() << " merges over " << corpora.size() << " languages\n";
    } else if (*bpe_apply) {
      const auto model = bpe::BpeModel::load(bpe_model_path);
      const auto mode = tokenize_mode(tokenize);
      std::vector<std::string> out;
      std::vector<std::vector<std::string>> segmented;
      for (const auto& l : input_lines(apply_in)) {
        segmented.push_back(model.encode_tokens(corpus::tokenize_basic(l, mode)));
        out.push_back(corpus::join(segmented.back()));
      }
      emit(out, apply_out);
      if (!vocab_out.empty()) bpe::build_vocab(segmented, vocab_size).save(vocab_out);
    } else if (*train) {
      auto job = load_train_job(config_path);
      if (freeze) job.train.freeze_embeddings = true;
      const auto bpe_model = bpe::BpeModel::load(job.bpe_model);
      const auto src_vocab = bpe::Vocab::load(job.source_vocab);
      const auto tgt_vocab = bpe::Vocab::load(job.target_vocab);
      const auto src_lines = read_lines(job.source);
      const auto tgt_lines = read_lines(job.target);
      if (src_lines.size() != tgt_lines.size()) {
        throw AlignmentError(job.source.string() + " has " + std::to_string(src_lines.size()) + " lines but " +
                             job.target.string() + " has " + std::to_string(tgt_lines.size()));
      }
      std::vector<model::Example> data;
      for (std::size_t i = 0; i < src_lines.size(); ++i) {
        model::Example e{src_vocab.encode(corpus::split_whitespace(src_lines[i])),
                         tgt_vocab.encode(corpus::split_whitespace(tgt_lines[i]))};
        if (!e.source.empty() && !e.target.empty()) data.push_back(std::move(e));
      }
      auto& tc = job.train;
      tc.model.source_vocab = src_vocab.size();
      tc.model.target_vocab = tgt_vocab.size();
      tc.checkpoint_path = job.output.string();
      if (tc.log_every == 0) tc.log_every = 100;
      std::optional<embeddings::EmbeddingTable> table;
      if (!embeddings_path.empty()) {
        table = embeddings::load_embedding_table(embeddings_path);
        if (tc.model.embed_dim == 0 && table->dim() != tc.model.hidden) tc.model.embed_dim = table->dim();
      }
      model::Seq2Seq net(tc.model, tc.seed + 1);
      if (table) {
        const auto width = tc.model.embedding_width();
        auto s = embeddings::build_lookup(src_vocab, &*table, width, tc.seed + 2);
        auto t = embeddings::build_lookup(tgt_vocab, &*table, width, tc.seed + 3);
        std::cerr << "embedding coverage: source " << s.coverage.hits << "/" << s.coverage.hits + s.coverage.misses
                  << ", target " << t.coverage.hits << "/" << t.coverage.hits + t.coverage.misses << '\n';
        net.tensor("src_embedding") = std::move(s.matrix);
        net.tensor("tgt_embedding") = std::move(t.matrix);
      }
      const auto result = model::train(net, data, tc, pipeline::translator_blocks(bpe_model, src_vocab, tgt_vocab),
                                       [](std::size_t step, double loss) {
                                         std::fprintf(stderr, "step %zu loss %.4f\n", step, loss);
                                       });
      std::cerr << "wrote " << job.output.string() << " after " << result.losses.size() << " steps\n";
    } else if (*translate) {
      const auto translator = pipeline::Translator::load(model_path);
      std::vector<std::string> out;
      for (const auto& l : input_lines(input_path)) out.push_back(translator.translate(l, beam, decode_len).text);
      emit(out, output_path);
    } else if (*score) {
      const auto hyp = eval::tokenize_lines(read_lines(hyp_path), lowercase);
      const auto ref = eval::tokenize_lines(read_lines(ref_path), lowercase);
      const auto report = eval::corpus_bleu(hyp, ref, 4, eval::parse_smoothing(smoothing));
      std::printf("BLEU = %.2f  (p1..p4 = %.4f/%.4f/%.4f/%.4f, BP = %.4f, hyp_len = %zu, ref_len = %zu)\n",
                  report.percent(), report.precisions[0], report.precisions[1], report.precisions[2],
                  report.precisions[3], report.brevity_penalty, report.hyp_len, report.ref_len);
      if (!report_path.empty()) write_file(report_path, report.to_json().dump(2) + "\n");
    } else if (*viz) {
      const auto translator = pipeline::Translator::load(model_path);
      const auto lines = read_lines(input_path);
      if (index >= lines.size()) {
        throw std::out_of_range("--index " + std::to_string(index) + " but the input has " +
                                std::to_string(lines.size()) + " lines");
      }
      const auto t = translator.translate(lines[index], beam, decode_len);
      if (t.target_subwords.empty()) throw std::runtime_error("empty translation, nothing to plot");
      model::export_attention(t.hypothesis.attention, t.source_subwords, t.target_subwords, output_path);
      std::cout << t.text << '\n';
    } else if (*pipe) {
      const auto result = pipeline::run_pipeline(fs::path(config_path), {force, &std::cerr});
      std::cout << pipeline::describe(result.manifest);
      return result.exit_status;
    } else if (*describe) {
      const fs::path path =
          manifest_path.empty() ? pipeline::default_workspace() / pipeline::kManifestName : fs::path(manifest_path);
      std::cout << pipeline::describe(path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
