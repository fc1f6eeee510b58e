#include "blm/embed.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "blm/error.hpp"
#include "blm/rng.hpp"
#include "blm/text.hpp"

namespace blm {

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(Errc::TruncatedFile, "embedding cache ends early");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(*take(1)); }
  std::uint32_t u32() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4));
    return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | std::uint64_t{u32()} << 32;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(Pooling p) noexcept {
  switch (p) {
    case Pooling::FirstToken: return "first-token";
    case Pooling::Mean: return "mean";
    case Pooling::Pseudo: return "pseudo";
  }
  return "first-token";
}

Pooling parse_pooling(std::string_view s) {
  if (s == "first-token" || s == "cls" || s == "0") return Pooling::FirstToken;
  if (s == "mean" || s == "1") return Pooling::Mean;
  if (s == "pseudo" || s == "2") return Pooling::Pseudo;
  throw Error(Errc::ParseError, "unknown pooling '" + std::string(s) + "'");
}

EmbeddingTable::EmbeddingTable(std::uint32_t dim, Pooling pooling) : dim_(dim), pooling_(pooling) {
  if (dim == 0) throw Error(Errc::DimMismatch, "embedding dim must be positive");
}

bool EmbeddingTable::insert(std::string_view text, std::span<const float> vec) {
  if (vec.size() != dim_)
    throw Error(Errc::DimMismatch, "vector of length " + std::to_string(vec.size()) + " for table dim " +
                                       std::to_string(dim_));
  for (float x : vec)
    if (!std::isfinite(x)) throw Error(Errc::ParseError, "non-finite embedding component for '" + std::string(text) + "'");
  std::string key = normalize_text(text);
  if (index_.count(key)) return false;
  index_.emplace(key, keys_.size());
  keys_.push_back(std::move(key));
  data_.insert(data_.end(), vec.begin(), vec.end());
  return true;
}

bool EmbeddingTable::contains(std::string_view text) const { return index_.count(normalize_text(text)) != 0; }

const float* EmbeddingTable::find_normalized(const std::string& key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? nullptr : data_.data() + it->second * dim_;
}

std::span<const float> EmbeddingTable::at(std::string_view text) const {
  const float* p = find_normalized(normalize_text(text));
  if (!p) throw Error(Errc::MissingEmbedding, std::string(text));
  return {p, dim_};
}

void save_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(kTableHeaderBytes + table.size() * (4 + 64 + 4 * std::size_t{table.dim()}));
  buf.append(kTableMagic, 4);
  put_u32(buf, kTableVersion);
  put_u32(buf, table.dim());
  buf.push_back(static_cast<char>(table.pooling()));
  put_u64(buf, table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const std::string& key = table.keys()[i];
    put_u32(buf, static_cast<std::uint32_t>(key.size()));
    buf.append(key);
    for (float x : table.vector(i)) put_u32(buf, std::bit_cast<std::uint32_t>(x));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

EmbeddingTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  if (std::memcmp(r.take(4), kTableMagic, 4) != 0) throw Error(Errc::BadMagic, path.string() + " is not a BLME cache");
  const std::uint32_t version = r.u32();
  if (version != kTableVersion) throw Error(Errc::VersionMismatch, "cache version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  if (dim == 0) throw Error(Errc::DimMismatch, "cache declares dim 0");
  const std::uint8_t pooling = r.u8();
  if (pooling > 2) throw Error(Errc::ParseError, "unknown pooling code " + std::to_string(pooling));
  const std::uint64_t count = r.u64();
  EmbeddingTable table(dim, static_cast<Pooling>(pooling));
  std::vector<float> vec(dim);
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint32_t len = r.u32();
    const std::string text(r.take(len), len);
    for (auto& x : vec) x = std::bit_cast<float>(r.u32());
    table.insert(text, vec);
  }
  if (!r.done()) throw Error(Errc::DimMismatch, "trailing bytes after " + std::to_string(count) + " entries");
  return table;
}

std::vector<float> pseudo_embed(std::string_view text, std::uint32_t dim, std::uint64_t seed) {
  Rng rng(mix_seed(mix_seed(seed, normalize_text(text)), dim));
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

InputTensor assemble_input(const EmbeddingTable& table, const AblatedContext& context) {
  if (context.size() != kContextSlots) throw Error(Errc::ShapeError, "context must have 7 slots");
  InputTensor t;
  t.dim = table.dim();
  t.data.assign(kContextSlots * t.dim, 0.0f);
  for (std::size_t i = 0; i < kContextSlots; ++i) {
    if (context[i].masked()) continue;
    const auto v = table.at(*context[i].text);
    std::copy(v.begin(), v.end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * t.dim));
  }
  return t;
}

}  // namespace blm
