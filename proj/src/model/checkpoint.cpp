#include "nmt/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "nmt/common/error.hpp"

namespace nmt::model {
namespace {

constexpr char kMagic[8] = {'N', 'M', 'T', 'C', 'K', 'P', 'T', '\n'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::uint32_t u32() {
    std::uint32_t v = 0;
    read(&v, sizeof v);
    return v;
  }

  std::string string() {
    const std::uint32_t n = u32();
    if (n > (1u << 30)) fail("string length " + std::to_string(n) + " is implausible");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(path_ + ": " + msg); }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Seq2Seq& model,
                     const std::map<std::string, std::string>& text) {
  auto blocks = text;
  blocks["model_config"] = format_key_values(to_key_values(model.config()));
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& [name, content] : blocks) {
      put_string(out, name);
      put_string(out, content);
    }
    put_u32(out, static_cast<std::uint32_t>(model.tensors().size()));
    std::vector<float> buffer;
    for (const auto& t : model.tensors()) {
      put_string(out, t.name);
      put_u32(out, 2);
      put_u32(out, static_cast<std::uint32_t>(t.value.rows()));
      put_u32(out, static_cast<std::uint32_t>(t.value.cols()));
      buffer.resize(static_cast<std::size_t>(t.value.size()));
      for (Eigen::Index i = 0; i < t.value.size(); ++i) {
        buffer[static_cast<std::size_t>(i)] = static_cast<float>(t.value.data()[i]);
      }
      out.write(reinterpret_cast<const char*>(buffer.data()),
                static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    }
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Reader r(in, path.string());
  char magic[sizeof kMagic];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));

  std::map<std::string, std::string> text;
  const std::uint32_t n_text = r.u32();
  for (std::uint32_t i = 0; i < n_text; ++i) {
    auto name = r.string();
    text[name] = r.string();
  }
  const auto config_it = text.find("model_config");
  if (config_it == text.end()) r.fail("missing model_config block");
  const ModelConfig config = model_config_from(parse_key_values(config_it->second));

  std::vector<Tensor> tensors;
  const std::uint32_t n_tensors = r.u32();
  std::vector<float> buffer;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t;
    t.name = r.string();
    if (r.u32() != 2) r.fail("tensor '" + t.name + "' is not rank 2");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 31)) r.fail("tensor '" + t.name + "' is implausibly large");
    buffer.resize(static_cast<std::size_t>(rows) * cols);
    r.read(buffer.data(), buffer.size() * sizeof(float));
    t.value.resize(rows, cols);
    for (std::size_t k = 0; k < buffer.size(); ++k) t.value.data()[k] = static_cast<double>(buffer[k]);
    tensors.push_back(std::move(t));
  }
  text.erase("model_config");
  return {Seq2Seq(config, std::move(tensors)), std::move(text)};
}

}  // namespace nmt::model
