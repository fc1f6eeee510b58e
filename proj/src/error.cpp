#include "blm/error.hpp"

namespace blm {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::TemplateSlotMissing: return "TemplateSlotMissing";
    case Errc::DegenerateParadigm: return "DegenerateParadigm";
    case Errc::LexiconExhausted: return "LexiconExhausted";
    case Errc::BadRatios: return "BadRatios";
    case Errc::NotBase: return "NotBase";
    case Errc::ShapeError: return "ShapeError";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::NonFinite: return "NonFinite";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::EmptyPredictions: return "EmptyPredictions";
    case Errc::ModelSetMismatch: return "ModelSetMismatch";
    case Errc::SizeExceedsData: return "SizeExceedsData";
    case Errc::ShotPoolTooSmall: return "ShotPoolTooSmall";
    case Errc::IdMismatch: return "IdMismatch";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
    case Errc::UsageError: return "UsageError";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

ErrorClass error_class(Errc code) noexcept {
  switch (code) {
    case Errc::UsageError:
    case Errc::ConfigError:
      return ErrorClass::Usage;
    case Errc::ZeroVector:
    case Errc::NonFinite:
      return ErrorClass::Numeric;
    default:
      return ErrorClass::Data;
  }
}

}  // namespace blm
