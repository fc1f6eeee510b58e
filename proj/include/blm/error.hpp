#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blm {

enum class Errc {
  TemplateSlotMissing,
  DegenerateParadigm,
  LexiconExhausted,
  BadRatios,
  NotBase,
  ShapeError,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  DimMismatch,
  MissingEmbedding,
  ZeroVector,
  NonFinite,
  EmptyDataset,
  EmptyPredictions,
  ModelSetMismatch,
  SizeExceedsData,
  ShotPoolTooSmall,
  IdMismatch,
  ParseError,
  IoError,
  UsageError,
  ConfigError,
};

std::string_view errc_name(Errc code) noexcept;

// Broad failure class, used by the CLI to choose an exit code.
enum class ErrorClass { Usage, Data, Numeric };

ErrorClass error_class(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace blm
