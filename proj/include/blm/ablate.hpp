#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blm/instance.hpp"

namespace blm {

// 0/1 mask over the Base 2x4 grid; the blank position is always 0.
struct StructureMask {
  std::array<std::array<std::uint8_t, 4>, 2> entries{};
};

// Drops the first paradigm.
inline constexpr StructureMask kNoAnalogyMask{{{{0, 0, 0, 0}, {1, 1, 1, 0}}}};
// Drops the action and state cues.
inline constexpr StructureMask kNoSoftCueMask{{{{1, 0, 0, 1}, {1, 0, 0, 0}}}};

// Elementwise product of a Base grid with a mask: cells under a 0 keep their
// role but lose their text. The blank is untouched.
ContextMatrix apply_mask(const ContextMatrix& base, const StructureMask& mask);

ContextMatrix transpose(const ContextMatrix& m);

struct Slot {
  std::optional<std::string> text;  // empty when masked
  std::size_t row = 0;              // grid coordinates in the traversed orientation, zero-based
  std::size_t col = 0;

  bool masked() const noexcept { return !text.has_value(); }
  friend bool operator==(const Slot&, const Slot&) = default;
};

using AblatedContext = std::vector<Slot>;

inline constexpr std::size_t kContextSlots = 7;

// Row-major traversal of a 2x4 or 4x2 grid skipping the blank; always 7 slots.
AblatedContext flatten(const ContextMatrix& grid);

// Base -> target. The answer set is never touched.
Instance apply_structure(const Instance& base, Structure target, std::uint64_t rng_seed);

}  // namespace blm
