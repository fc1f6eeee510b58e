#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>
#include <vector>

#include "blm/ablate.hpp"
#include "blm/embed.hpp"
#include "blm/error.hpp"
#include "blm/generate.hpp"
#include "blm/lexicon.hpp"
#include "support.hpp"

using namespace blm;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected blm::Error");
  return Errc::UsageError;
}

EmbeddingTable table_for(const std::vector<Instance>& data, std::uint32_t dim) {
  EmbeddingTable t(dim, Pooling::Pseudo);
  for (const auto& inst : data)
    for (const auto& s : instance_sentences(inst)) t.insert(s, pseudo_embed(s, dim, 1));
  return t;
}

}  // namespace

TEST_SUITE("embed") {
  TEST_CASE("table round trip is bit exact") {
    testing::TempDir dir("embed");
    EmbeddingTable t(5, Pooling::Mean);
    CHECK(t.insert("The dice rolled.", std::vector<float>{1.f, -2.f, 3.5f, 1e-30f, -0.f}));
    CHECK(t.insert("  The   mat rolled. ", std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f, 0.5f}));
    CHECK_FALSE(t.insert("The dice  rolled.", std::vector<float>{0, 0, 0, 0, 0}));
    const std::string path = dir / "t.blme";
    save_table(t, path);
    const EmbeddingTable u = load_table(path);
    CHECK(u.dim() == 5);
    CHECK(u.pooling() == Pooling::Mean);
    REQUIRE(u.size() == 2);
    CHECK(u.keys() == t.keys());
    for (std::size_t i = 0; i < 2; ++i) {
      const auto a = t.vector(i), b = u.vector(i);
      CHECK(std::memcmp(a.data(), b.data(), 5 * sizeof(float)) == 0);
    }
    CHECK(u.contains("The mat rolled."));
  }

  TEST_CASE("empty table is header only") {
    testing::TempDir dir("embed");
    const std::string path = dir / "e.blme";
    save_table(EmbeddingTable(768), path);
    CHECK(std::filesystem::file_size(path) == kTableHeaderBytes);
    CHECK(kTableHeaderBytes == 21);
    CHECK(load_table(path).size() == 0);
  }

  TEST_CASE("corrupt files are rejected") {
    testing::TempDir dir("embed");
    const std::string path = dir / "bad.blme";
    save_table(EmbeddingTable(4), path);
    std::string bytes = testing::slurp(path);
    bytes[0] = 'X';
    testing::spit(path, bytes);
    CHECK(code_of([&] { load_table(path); }) == Errc::BadMagic);

    EmbeddingTable t(4);
    t.insert("a", std::vector<float>{1, 2, 3, 4});
    save_table(t, path);
    bytes = testing::slurp(path);
    testing::spit(path, bytes.substr(0, bytes.size() - 3));
    CHECK(code_of([&] { load_table(path); }) == Errc::TruncatedFile);

    bytes[4] = 9;
    testing::spit(path, bytes);
    CHECK(code_of([&] { load_table(path); }) == Errc::VersionMismatch);
  }

  TEST_CASE("insert validates vectors") {
    EmbeddingTable t(3);
    CHECK(code_of([&] { t.insert("x", std::vector<float>{1, 2}); }) == Errc::DimMismatch);
    CHECK(code_of([&] { t.insert("x", std::vector<float>{1, NAN, 2}); }) == Errc::ParseError);
    CHECK(code_of([&] { (void)t.at("missing"); }) == Errc::MissingEmbedding);
  }

  TEST_CASE("pseudo embeddings are unit, stable and distinct") {
    const auto a = pseudo_embed("The dice rolled into a cup.", 768, 1);
    CHECK(a == pseudo_embed("The dice rolled into a cup.", 768, 1));
    CHECK(a != pseudo_embed("The dice rolled into a cup.", 768, 2));
    double n = 0;
    for (float x : a) n += double(x) * x;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-6);

    std::set<std::vector<float>> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(pseudo_embed("sentence number " + std::to_string(i), 768, 1));
    CHECK(seen.size() == 1000);
  }

  TEST_CASE("assemble_input zeroes masked rows") {
    const auto data = generate_dataset(Lexicon::builtin(), Phenomenon::RollClass, DataType::TypeI, 3, 42);
    const EmbeddingTable t = table_for(data, 16);
    auto nonzero = [](std::span<const float> r) {
      return std::any_of(r.begin(), r.end(), [](float x) { return x != 0.f; });
    };

    const InputTensor base = assemble_input(t, flatten(data[0].context));
    REQUIRE(base.rows() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(nonzero(base.row(i)));

    const Instance na = apply_structure(data[0], Structure::NoAnalogy, 1);
    const InputTensor in = assemble_input(t, flatten(na.context));
    for (std::size_t i = 0; i < 4; ++i) CHECK_FALSE(nonzero(in.row(i)));
    for (std::size_t i = 4; i < 7; ++i) CHECK(nonzero(in.row(i)));

    EmbeddingTable partial(16);
    CHECK(code_of([&] { assemble_input(partial, flatten(data[0].context)); }) == Errc::MissingEmbedding);
  }
}
