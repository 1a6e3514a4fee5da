#include "samia/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace samia {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'M', 'I', 'A', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u32(std::uint32_t v) { raw(v); }
  void u64(std::uint64_t v) { raw(v); }
  void i32(std::int32_t v) { raw(static_cast<std::uint32_t>(v)); }
  void f64(double v) { raw(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  template <class T>
  void raw(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t k = 0; k < sizeof(T); ++k) buf[k] = static_cast<unsigned char>(v >> (8 * k));
    out_.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}
  std::uint32_t u32() { return raw<std::uint32_t>(); }
  std::uint64_t u64() { return raw<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(raw<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(raw<std::uint64_t>()); }
  std::string str() {
    const auto n = u32();
    if (n > (1u << 20)) fail("string length out of range");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) fail("truncated string");
    return s;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("checkpoint " + path_ + ": " + what);
  }

 private:
  template <class T>
  T raw() {
    unsigned char buf[sizeof(T)];
    in_.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in_) fail("unexpected end of file");
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(buf[k]) << (8 * k);
    return v;
  }
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  Writer w(out);
  w.u32(kVersion);
  w.str(ckpt.role);
  w.u64(ckpt.vocab_hash);
  const auto& d = ckpt.params.dims;
  for (int v : {d.vocab, d.emb, d.hidden, d.bos, d.eos}) w.i32(v);
  const auto tensors = ckpt.params.tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(std::string(t.name));
    w.u32(static_cast<std::uint32_t>(t.rows));
    w.u32(static_cast<std::uint32_t>(t.cols));
    for (Eigen::Index k = 0; k < t.rows * t.cols; ++k) w.f64(t.data[k]);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("bad magic");
  if (r.u32() != kVersion) r.fail("unsupported version");

  Checkpoint ckpt;
  ckpt.role = r.str();
  ckpt.vocab_hash = r.u64();
  if (expected_vocab_hash && *expected_vocab_hash != ckpt.vocab_hash)
    r.fail("vocabulary hash mismatch (trained against a different vocabulary)");
  ModelDims d;
  d.vocab = r.i32();
  d.emb = r.i32();
  d.hidden = r.i32();
  d.bos = r.i32();
  d.eos = r.i32();
  try {
    ckpt.params = Seq2SeqParams::zeros(d);
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  auto tensors = ckpt.params.tensors();
  if (r.u32() != tensors.size()) r.fail("tensor count mismatch");
  for (auto& t : tensors) {
    const auto name = r.str();
    if (name != t.name) r.fail("expected tensor '" + std::string(t.name) + "', found '" + name + "'");
    if (r.u32() != t.rows || r.u32() != t.cols) r.fail("shape mismatch for " + name);
    for (Eigen::Index k = 0; k < t.rows * t.cols; ++k) t.data[k] = r.f64();
  }
  if (!ckpt.params.all_finite()) r.fail("non-finite parameter");
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
  return ckpt;
}

}  // namespace samia
