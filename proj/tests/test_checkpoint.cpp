#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "samia/checkpoint.hpp"

using namespace samia;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "samia_test_ckpt";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  const ModelDims dims{11, 4, 5, 1, 2};
  const Checkpoint ckpt{"slt", 0x1234abcdULL, Seq2SeqParams::random(dims, 9, 0.7)};
  const auto path = scratch("a.ckpt");
  save_checkpoint(path, ckpt);
  const auto back = load_checkpoint(path, 0x1234abcdULL);
  CHECK(back.role == "slt");
  CHECK(back.vocab_hash == 0x1234abcdULL);
  CHECK(back.params.dims == dims);
  CHECK(back.params == ckpt.params);
  CHECK(load_checkpoint(path).params == ckpt.params);
}

TEST_CASE("checkpoint errors") {
  const Checkpoint ckpt{"user", 7, Seq2SeqParams::random(ModelDims{6, 3, 3, 1, 2}, 1)};
  const auto path = scratch("b.ckpt");
  save_checkpoint(path, ckpt);

  CHECK_THROWS_WITH_AS(load_checkpoint(path, 8), doctest::Contains("vocab"), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(scratch("absent.ckpt")), std::runtime_error);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();

  const auto cut = scratch("cut.ckpt");
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(cut), std::runtime_error);

  const auto bad = scratch("bad.ckpt");
  std::string mangled = bytes;
  mangled[0] ^= 0x5a;
  std::ofstream(bad, std::ios::binary) << mangled;
  CHECK_THROWS_AS(load_checkpoint(bad), std::runtime_error);

  const auto extra = scratch("extra.ckpt");
  std::ofstream(extra, std::ios::binary) << bytes << "junk";
  CHECK_THROWS_AS(load_checkpoint(extra), std::runtime_error);
}
