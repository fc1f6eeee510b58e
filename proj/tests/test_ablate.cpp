#include <doctest.h>

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "blm/ablate.hpp"
#include "blm/error.hpp"
#include "blm/generate.hpp"
#include "blm/lexicon.hpp"

using namespace blm;

namespace {

std::vector<Instance> sample(std::size_t n = 20) {
  return generate_dataset(Lexicon::builtin(), Phenomenon::RollClass, DataType::TypeI, n, 42);
}

// One-based (row, col) of each unmasked slot in Base coordinates.
std::vector<std::pair<int, int>> visible(const AblatedContext& ctx) {
  std::vector<std::pair<int, int>> out;
  for (const auto& s : ctx)
    if (!s.masked()) out.emplace_back(static_cast<int>(s.row) + 1, static_cast<int>(s.col) + 1);
  return out;
}

std::multiset<std::string> texts(const ContextMatrix& m) {
  std::multiset<std::string> out;
  for (const auto& c : m.cells())
    if (c.text) out.insert(*c.text);
  return out;
}

}  // namespace

TEST_SUITE("ablate") {
  TEST_CASE("base traversal order") {
    const auto ctx = flatten(sample(1).front().context);
    REQUIRE(ctx.size() == kContextSlots);
    const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 0}, {0, 1}, {0, 2}, {0, 3},
                                                                        {1, 0}, {1, 1}, {1, 2}};
    for (std::size_t i = 0; i < kContextSlots; ++i) {
      CHECK(ctx[i].row == expected[i].first);
      CHECK(ctx[i].col == expected[i].second);
      CHECK_FALSE(ctx[i].masked());
    }
  }

  TEST_CASE("transposed traversal in original coordinates") {
    const Instance base = sample(1).front();
    const Instance t = apply_structure(base, Structure::Transposed, 1);
    REQUIRE(t.context.rows() == 4);
    REQUIRE(t.context.cols() == 2);
    const auto ctx = flatten(t.context);
    // (1,1),(2,1),(1,2),(2,2),(1,3),(2,3),(1,4) one-based
    const std::vector<std::pair<std::size_t, std::size_t>> original = {{0, 0}, {1, 0}, {0, 1}, {1, 1},
                                                                        {0, 2}, {1, 2}, {0, 3}};
    REQUIRE(ctx.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
      // transposed (r, c) sits at original (c, r)
      CHECK(ctx[i].col == original[i].first);
      CHECK(ctx[i].row == original[i].second);
      CHECK(ctx[i].text == base.context.at(original[i].first, original[i].second).text);
    }
  }

  TEST_CASE("transpose is an involution") {
    for (const auto& inst : sample()) CHECK(transpose(transpose(inst.context)) == inst.context);
  }

  TEST_CASE("no-analogy keeps exactly row two") {
    for (const auto& inst : sample()) {
      const Instance out = apply_structure(inst, Structure::NoAnalogy, 1);
      CHECK(visible(flatten(out.context)) == std::vector<std::pair<int, int>>{{2, 1}, {2, 2}, {2, 3}});
      CHECK(out.answers == inst.answers);
      CHECK(out.structure == Structure::NoAnalogy);
    }
  }

  TEST_CASE("no-soft-cue keeps the anchors") {
    for (const auto& inst : sample()) {
      const Instance out = apply_structure(inst, Structure::NoSoftCue, 1);
      const auto ctx = flatten(out.context);
      CHECK(visible(ctx) == std::vector<std::pair<int, int>>{{1, 1}, {1, 4}, {2, 1}});
      // slots 1, 4, 5 in Base traversal
      std::vector<std::size_t> unmasked;
      for (std::size_t i = 0; i < ctx.size(); ++i)
        if (!ctx[i].masked()) unmasked.push_back(i + 1);
      CHECK(unmasked == std::vector<std::size_t>{1, 4, 5});
    }
  }

  TEST_CASE("masks are idempotent and keep roles") {
    const Instance inst = sample(1).front();
    const ContextMatrix once = apply_mask(inst.context, kNoSoftCueMask);
    CHECK(apply_mask(once, kNoSoftCueMask) == once);
    for (std::size_t i = 0; i < once.cells().size(); ++i) CHECK(once.cells()[i].role == inst.context.cells()[i].role);
    CHECK(once.at(1, 3).is_blank());
    CHECK_FALSE(once.at(1, 3).masked);
  }

  TEST_CASE("shuffle preserves content and is seeded") {
    for (const auto& inst : sample()) {
      const Instance s1 = apply_structure(inst, Structure::Shuffled, 9);
      const Instance s2 = apply_structure(inst, Structure::Shuffled, 9);
      CHECK(s1 == s2);
      CHECK(texts(s1.context) == texts(inst.context));
      CHECK(s1.context.at(1, 3).is_blank());
      CHECK(s1.answers == inst.answers);
    }
    const auto insts = sample();
    std::size_t moved = 0;
    for (const auto& inst : insts)
      moved += apply_structure(inst, Structure::Shuffled, 9).context != inst.context ? 1 : 0;
    CHECK(moved > insts.size() / 2);
  }

  TEST_CASE("ablation only accepts base instances") {
    const Instance t = apply_structure(sample(1).front(), Structure::Transposed, 1);
    CHECK_THROWS_AS(apply_structure(t, Structure::NoAnalogy, 1), Error);
    try {
      apply_structure(t, Structure::NoAnalogy, 1);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NotBase);
    }
  }
}
