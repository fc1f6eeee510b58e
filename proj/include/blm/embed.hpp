#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "blm/ablate.hpp"

namespace blm {

enum class Pooling : std::uint8_t { FirstToken = 0, Mean = 1, Pseudo = 2 };

std::string_view to_string(Pooling p) noexcept;
Pooling parse_pooling(std::string_view s);

inline constexpr char kTableMagic[4] = {'B', 'L', 'M', 'E'};
inline constexpr std::uint32_t kTableVersion = 1;
// magic + version + dim + pooling + entry count
inline constexpr std::size_t kTableHeaderBytes = 4 + 4 + 4 + 1 + 8;

// Sentence text -> vector map keyed by normalize_text(). Vectors are stored as
// written (not normalized). Entries keep insertion order so files are stable.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::uint32_t dim, Pooling pooling = Pooling::FirstToken);

  std::uint32_t dim() const noexcept { return dim_; }
  Pooling pooling() const noexcept { return pooling_; }
  std::size_t size() const noexcept { return keys_.size(); }

  // Returns false (and leaves the table unchanged) if the key already exists.
  // Throws DimMismatch on wrong length, ParseError on non-finite components.
  bool insert(std::string_view text, std::span<const float> vec);

  bool contains(std::string_view text) const;
  // Throws MissingEmbedding.
  std::span<const float> at(std::string_view text) const;
  // Lookup by an already-normalized key; nullptr when absent.
  const float* find_normalized(const std::string& key) const;

  const std::vector<std::string>& keys() const noexcept { return keys_; }
  std::span<const float> vector(std::size_t index) const {
    return {data_.data() + index * dim_, dim_};
  }

 private:
  std::uint32_t dim_;
  Pooling pooling_;
  std::vector<std::string> keys_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

void save_table(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_table(const std::filesystem::path& path);

// Hash-seeded unit vector; a test-time stand-in for an encoder.
std::vector<float> pseudo_embed(std::string_view text, std::uint32_t dim, std::uint64_t seed);

// 7 x dim, row-major.
struct InputTensor {
  std::size_t dim = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::size_t rows() const noexcept { return dim == 0 ? 0 : data.size() / dim; }
};

// Masked slots become zero rows. Throws MissingEmbedding.
InputTensor assemble_input(const EmbeddingTable& table, const AblatedContext& context);

}  // namespace blm
