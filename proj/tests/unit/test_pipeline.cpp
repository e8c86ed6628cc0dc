#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "nmt/common/error.hpp"
#include "nmt/common/textio.hpp"
#include "nmt/model/checkpoint.hpp"
#include "nmt/pipeline/digest.hpp"
#include "nmt/pipeline/manifest.hpp"
#include "nmt/pipeline/pipeline.hpp"
#include "nmt/pipeline/translator.hpp"
#include "synthetic.hpp"

using namespace nmt;
using namespace nmt::pipeline;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"(workdir = work
seed = 3
data.source = toy.en
data.target = toy.ta
clean.test = 20
clean.dev = 10
bpe.merges = 80
bpe.vocab = 300
train.hidden = 16
train.layers = 1
train.heads = 2
train.dropout = 0.1
train.max_steps = 15
train.batch = 8
translate.beam = 2
translate.max_len = 12
)";

// A scratch project: 200 synthetic pairs, the 8 first repeated.
fs::path make_project(const std::string& name, const std::string& extra = "") {
  const auto dir = synth::scratch_dir(name);
  auto lines = synth::agglutinative_corpus({.pairs = 200, .seed = 4});
  for (int i = 0; i < 8; ++i) {
    lines.source.push_back(lines.source[i]);
    lines.target.push_back(lines.target[i]);
  }
  synth::write_parallel_lines(lines, dir / "toy.en", dir / "toy.ta");
  write_file(dir / "pipe.cfg", kConfig + extra);
  return dir;
}

class EpochGuard {
 public:
  EpochGuard() { setenv("SOURCE_DATE_EPOCH", "1700000000", 1); }
  ~EpochGuard() { unsetenv("SOURCE_DATE_EPOCH"); }
};

std::size_t count_actions(const RunResult& r, StageAction a) {
  std::size_t n = 0;
  for (const auto& o : r.outcomes) n += o.action == a;
  return n;
}

}  // namespace

TEST(Pipeline, FullRunRecordsSixStages) {
  const auto dir = make_project("pipe_full");
  const auto r = run_pipeline(dir / "pipe.cfg");
  ASSERT_EQ(r.exit_status, 0);
  ASSERT_EQ(r.manifest.stages().size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& s = r.manifest.stages()[i];
    EXPECT_EQ(s.name, kStageNames[i]);
    EXPECT_EQ(s.status, "ok");
    EXPECT_FALSE(s.outputs.empty()) << s.name;
    for (const auto& f : s.outputs) {
      ASSERT_TRUE(fs::exists(dir / "work" / f.path)) << f.path;
      EXPECT_EQ(sha256_file(dir / "work" / f.path), f.sha256) << f.path;
    }
    EXPECT_EQ(s.digest, combined_digest(s.outputs));
  }
  EXPECT_EQ(Manifest::load(r.manifest_path).dump(), r.manifest.dump());
  EXPECT_EQ(count_actions(r, StageAction::kRan), 6u);
  EXPECT_TRUE(fs::exists(dir / "work/attn/attention.tsv"));
  EXPECT_EQ(read_lines(dir / "work/translate/test.hyp").size(), 20u);

  const auto* clean = r.manifest.find("clean");
  EXPECT_EQ(clean->metrics.at("report").at("exact_dup").get<int>(), 8);
  EXPECT_EQ(clean->metrics.at("counts").at("test").get<int>(), 20);
  EXPECT_EQ(clean->metrics.at("counts").at("dev").get<int>(), 10);

  // the checkpoint carries everything needed to translate
  const auto tr = Translator::load(dir / "work/train/model.ckpt");
  EXPECT_EQ(tr.translate("", 2, 10).text, "");
  EXPECT_NO_THROW(tr.translate("the cat", 2, 10));
}

TEST(Pipeline, RerunSkipsEveryStage) {
  const auto dir = make_project("pipe_rerun");
  const auto first = run_pipeline(dir / "pipe.cfg");
  ASSERT_EQ(first.exit_status, 0);
  const auto second = run_pipeline(dir / "pipe.cfg");
  EXPECT_EQ(second.exit_status, 0);
  EXPECT_EQ(count_actions(second, StageAction::kSkipped), 6u);
  EXPECT_EQ(second.manifest.dump(), first.manifest.dump());
  const auto forced = run_pipeline(dir / "pipe.cfg", {.force = true});
  EXPECT_EQ(count_actions(forced, StageAction::kRan), 6u);
}

TEST(Pipeline, ChangedParameterRerunsOnlyDownstream) {
  const auto dir = make_project("pipe_param");
  ASSERT_EQ(run_pipeline(dir / "pipe.cfg").exit_status, 0);
  write_file(dir / "pipe.cfg", std::string(kConfig) + "translate.beam = 1\n");
  const auto r = run_pipeline(dir / "pipe.cfg");
  ASSERT_EQ(r.exit_status, 0);
  ASSERT_EQ(r.outcomes.size(), 6u);
  EXPECT_EQ(r.outcomes[0].action, StageAction::kSkipped);
  EXPECT_EQ(r.outcomes[1].action, StageAction::kSkipped);
  EXPECT_EQ(r.outcomes[2].action, StageAction::kSkipped);
  EXPECT_EQ(r.outcomes[3].action, StageAction::kRan);
  EXPECT_EQ(r.manifest.find("translate")->parameters.at("beam"), "1");
}

TEST(Pipeline, CorruptedIntermediateFailsItsStage) {
  const auto dir = make_project("pipe_corrupt");
  ASSERT_EQ(run_pipeline(dir / "pipe.cfg").exit_status, 0);
  {
    auto lines = read_lines(dir / "work/bpe/train.src");
    lines[0] += " extra";
    write_lines(dir / "work/bpe/train.src", lines);
  }
  const auto r = run_pipeline(dir / "pipe.cfg");
  EXPECT_EQ(r.exit_status, 1);
  const auto* bpe = r.manifest.find("bpe");
  ASSERT_NE(bpe, nullptr);
  EXPECT_EQ(bpe->status, "failed");
  EXPECT_NE(bpe->error.find("digest mismatch"), std::string::npos) << bpe->error;
  EXPECT_NE(bpe->error.find("'bpe'"), std::string::npos) << bpe->error;
  EXPECT_EQ(r.manifest.find("train"), nullptr);
  EXPECT_EQ(r.manifest.stages().size(), 2u);
  EXPECT_EQ(Manifest::load(r.manifest_path).dump(), r.manifest.dump());
  EXPECT_NE(describe(r.manifest).find("failed"), std::string::npos);
  // forcing regenerates the file and recovers
  EXPECT_EQ(run_pipeline(dir / "pipe.cfg", {.force = true}).exit_status, 0);
}

TEST(Pipeline, MissingInputFailsTheFirstStage) {
  const auto dir = make_project("pipe_missing");
  fs::remove(dir / "toy.ta");
  const auto r = run_pipeline(dir / "pipe.cfg");
  EXPECT_EQ(r.exit_status, 1);
  ASSERT_EQ(r.manifest.stages().size(), 1u);
  EXPECT_EQ(r.manifest.stages()[0].status, "failed");
  EXPECT_EQ(r.outcomes.back().action, StageAction::kFailed);
}

TEST(Pipeline, SameSeedGivesByteIdenticalArtifacts) {
  EpochGuard epoch;
  const auto a = make_project("pipe_det_a");
  const auto b = make_project("pipe_det_b");
  const auto ra = run_pipeline(a / "pipe.cfg");
  const auto rb = run_pipeline(b / "pipe.cfg");
  ASSERT_EQ(ra.exit_status, 0);
  ASSERT_EQ(rb.exit_status, 0);
  EXPECT_EQ(read_file(a / "work/manifest.json"), read_file(b / "work/manifest.json"));
  EXPECT_EQ(read_file(a / "work/train/model.ckpt"), read_file(b / "work/train/model.ckpt"));
  EXPECT_EQ(read_file(a / "work/score/bleu.json"), read_file(b / "work/score/bleu.json"));
  EXPECT_EQ(ra.manifest.stages()[0].timestamp, "2023-11-14T22:13:20Z");
}

TEST(Pipeline, DifferentSeedChangesTheModel) {
  const auto a = make_project("pipe_seed_a");
  const auto b = make_project("pipe_seed_b", "seed = 4\n");
  ASSERT_EQ(run_pipeline(a / "pipe.cfg").exit_status, 0);
  ASSERT_EQ(run_pipeline(b / "pipe.cfg").exit_status, 0);
  EXPECT_NE(read_file(a / "work/train/model.ckpt"), read_file(b / "work/train/model.ckpt"));
}

TEST(Describe, ShowsCountsParametersAndBleu) {
  const auto dir = make_project("pipe_describe");
  const auto r = run_pipeline(dir / "pipe.cfg");
  ASSERT_EQ(r.exit_status, 0);
  const std::string text = describe(r.manifest_path);
  for (const char* s : {"clean", "attn-viz", "merges = 80", "train    ", "test     20", "dev      10",
                        "duplicate 8", "input    208"}) {
    EXPECT_NE(text.find(s), std::string::npos) << s << "\n" << text;
  }
  const double bleu = r.manifest.find("score")->metrics.at("bleu").get<double>();
  char expected[32];
  std::snprintf(expected, sizeof expected, "BLEU %.2f", bleu);
  EXPECT_NE(text.find(expected), std::string::npos) << text;
}

TEST(Describe, EmptyAndMissingManifests) {
  EXPECT_EQ(describe(Manifest{}), "no stages\n");
  const auto dir = synth::scratch_dir("desc_missing");
  EXPECT_THROW(describe(dir / "manifest.json"), IoError);
  write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(describe(dir / "bad.json"), FormatError);
}

TEST(Manifest, JsonRoundtripAndEditing) {
  Manifest m;
  StageRecord a{"clean", "ok", {{"k", "v"}}, {{"in.txt", "aa"}}, {{"out.txt", "bb"}}, "cc", "t0", {{"n", 3}}, ""};
  StageRecord b = a;
  b.name = "bpe";
  StageRecord c = a;
  c.name = "train";
  m.put(a);
  m.put(b);
  m.put(c);
  const auto back = Manifest::from_json(m.to_json());
  EXPECT_EQ(back.dump(), m.dump());
  b.status = "failed";
  m.put(b);
  EXPECT_EQ(m.stages().size(), 3u);
  EXPECT_EQ(m.find("bpe")->status, "failed");
  m.truncate_after("bpe");
  EXPECT_EQ(m.stages().size(), 2u);
  EXPECT_EQ(m.find("train"), nullptr);
  EXPECT_THROW(Manifest::from_json(nlohmann::json::array()), FormatError);
}

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto dir = synth::scratch_dir("digest");
  write_file(dir / "f", "abc");
  EXPECT_EQ(sha256_file(dir / "f"), sha256_hex("abc"));
  EXPECT_THROW(sha256_file(dir / "none"), IoError);
}

TEST(Timestamp, HonoursSourceDateEpoch) {
  EpochGuard epoch;
  setenv("SOURCE_DATE_EPOCH", "0", 1);
  EXPECT_EQ(current_timestamp(), "1970-01-01T00:00:00Z");
}

TEST(Config, ParsesAndValidates) {
  const auto c = PipelineConfig::parse(kConfig, "/base");
  EXPECT_EQ(c.source_path, fs::path("/base/toy.en"));
  EXPECT_EQ(c.workdir, fs::path("/base/work"));
  EXPECT_EQ(c.merges, 80u);
  EXPECT_EQ(c.train.at("hidden"), "16");
  EXPECT_THROW(PipelineConfig::parse("data.source = a\n", "/"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse(std::string(kConfig) + "bogus = 1\n", "/"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse(std::string(kConfig) + "train.seed = 1\n", "/"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse(std::string(kConfig) + "train.heads = 3\n", "/"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse(std::string(kConfig) + "translate.beam = 0\n", "/"), ConfigError);
  EXPECT_THROW(PipelineConfig::load("/nonexistent/pipe.cfg"), IoError);
}

TEST(Config, WorkspaceFromEnvironment) {
  setenv(kWorkspaceEnv, "/tmp/nmt-ws", 1);
  const auto c = PipelineConfig::parse("data.source = a\ndata.target = b\n", "/base");
  EXPECT_EQ(c.workdir, fs::path("/tmp/nmt-ws"));
  EXPECT_EQ(default_workspace(), fs::path("/tmp/nmt-ws"));
  unsetenv(kWorkspaceEnv);
  EXPECT_EQ(PipelineConfig::parse("data.source = a\ndata.target = b\n", "/base").workdir, fs::path("/base/work"));
}

TEST(Segmentation, SourceIsolatesPunctuationBeforeBpe) {
  const auto model = bpe::learn_bpe({{"cat", 5}, {"cats", 3}}, 10);
  const auto pieces = segment_source(model, "cats, cat!");
  EXPECT_EQ(model.join_subwords(pieces), "cats , cat !");
  EXPECT_EQ(model.join_subwords(segment_target(model, "cats, cat!")), "cats, cat!");
}
