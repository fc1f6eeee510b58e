#include "blm/ablate.hpp"

#include <numeric>

#include "blm/error.hpp"
#include "blm/rng.hpp"

namespace blm {

namespace {

void require_base_shape(const ContextMatrix& m) {
  if (m.rows() != 2 || m.cols() != 4 || m.count_blank() != 1 || !m.at(1, 3).is_blank())
    throw Error(Errc::ShapeError, "expected a 2x4 grid with the blank at (2,4)");
}

}  // namespace

ContextMatrix apply_mask(const ContextMatrix& base, const StructureMask& mask) {
  require_base_shape(base);
  ContextMatrix out = base;
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      Cell& cell = out.at(r, c);
      if (cell.is_blank() || mask.entries[r][c] != 0) continue;
      cell.text.reset();
      cell.masked = true;
    }
  }
  return out;
}

ContextMatrix transpose(const ContextMatrix& m) {
  ContextMatrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out.at(c, r) = m.at(r, c);
  return out;
}

AblatedContext flatten(const ContextMatrix& grid) {
  const bool shape_ok = (grid.rows() == 2 && grid.cols() == 4) || (grid.rows() == 4 && grid.cols() == 2);
  if (!shape_ok || grid.count_blank() != 1) throw Error(Errc::ShapeError, "flatten needs a 2x4 or 4x2 grid with one blank");
  AblatedContext out;
  out.reserve(kContextSlots);
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      const Cell& cell = grid.at(r, c);
      if (cell.is_blank()) continue;
      out.push_back(Slot{cell.text, r, c});
    }
  }
  return out;
}

Instance apply_structure(const Instance& base, Structure target, std::uint64_t rng_seed) {
  if (base.structure != Structure::Base)
    throw Error(Errc::NotBase, base.id + " has structure " + std::string(to_string(base.structure)));
  require_base_shape(base.context);

  Instance out = base;
  out.structure = target;
  switch (target) {
    case Structure::Base:
      break;
    case Structure::NoAnalogy:
      out.context = apply_mask(base.context, kNoAnalogyMask);
      break;
    case Structure::NoSoftCue:
      out.context = apply_mask(base.context, kNoSoftCueMask);
      break;
    case Structure::Transposed:
      out.context = transpose(base.context);
      break;
    case Structure::Shuffled: {
      std::vector<std::size_t> positions;
      for (std::size_t i = 0; i < base.context.cells().size(); ++i)
        if (!base.context.cells()[i].is_blank()) positions.push_back(i);
      std::vector<std::size_t> perm = positions;
      Rng rng(mix_seed(rng_seed, base.id));
      rng.shuffle(std::span<std::size_t>(perm));
      for (std::size_t k = 0; k < positions.size(); ++k)
        out.context.cells()[positions[k]] = base.context.cells()[perm[k]];
      break;
    }
  }
  return out;
}

}  // namespace blm
