#include "faithsel/error.hpp"

namespace faithsel {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_markup: return "MalformedMarkup";
    case Errc::turn_contains_reserved_token: return "TurnContainsReservedToken";
    case Errc::schema_violation: return "SchemaViolation";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::not_a_distribution: return "NotADistribution";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::invalid_range: return "InvalidRange";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::empty_reference: return "EmptyReference";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::missing_label_examples: return "MissingLabelExamples";
    case Errc::separator_collision: return "SeparatorCollision";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::empty_input: return "Empty";
    case Errc::io_error: return "IOError";
    case Errc::missing_artifact: return "MissingArtifact";
    case Errc::missing_distribution: return "MissingDistribution";
    case Errc::inventory_mismatch: return "InventoryMismatch";
    case Errc::config_mismatch: return "ConfigMismatch";
    case Errc::count_mismatch: return "CountMismatch";
    case Errc::unknown_dialog: return "UnknownDialog";
    case Errc::unknown_config: return "UnknownConfig";
    case Errc::transport_error: return "TransportError";
    case Errc::protocol_error: return "ProtocolError";
  }
  return "Error";
}

namespace {

std::string compose(Errc code, const std::string& message,
                    std::optional<std::size_t> location) {
  std::string out(errc_name(code));
  if (location) {
    out += code == Errc::malformed_markup ? " at byte " : " at line ";
    out += std::to_string(*location);
  }
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(Errc code, const std::string& message,
             std::optional<std::size_t> location)
    : std::runtime_error(compose(code, message, location)),
      code_(code),
      detail_(message),
      location_(location) {}

int Error::exit_status() const noexcept {
  switch (code_) {
    case Errc::missing_artifact:
    case Errc::missing_distribution:
    case Errc::inventory_mismatch:
    case Errc::config_mismatch:
    case Errc::count_mismatch:
    case Errc::unknown_dialog:
    case Errc::unknown_config:
    case Errc::transport_error:
    case Errc::protocol_error:
      return 3;
    default:
      return 2;
  }
}

}  // namespace faithsel
