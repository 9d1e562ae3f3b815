#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace faithsel {

enum class Errc {
  // input / format problems
  malformed_markup,
  turn_contains_reserved_token,
  schema_violation,
  duplicate_id,
  not_a_distribution,
  unknown_label,
  invalid_range,
  invalid_argument,
  empty_reference,
  empty_corpus,
  missing_label_examples,
  separator_collision,
  length_mismatch,
  empty_input,
  io_error,
  // missing artifacts / cross-file consistency
  missing_artifact,
  missing_distribution,
  inventory_mismatch,
  config_mismatch,
  count_mismatch,
  unknown_dialog,
  unknown_config,
  // remote backends
  transport_error,
  protocol_error,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library. `location()` carries a line number
/// (1-based, for line-oriented files) or a byte offset (for markup), when
/// the error has one.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> location = std::nullopt);

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> location() const noexcept { return location_; }
  /// The message without the error name and location prefix.
  const std::string& detail() const noexcept { return detail_; }

  /// Process exit status for the CLI: 2 for input/format errors,
  /// 3 for missing-artifact and consistency errors.
  int exit_status() const noexcept;

 private:
  Errc code_;
  std::string detail_;
  std::optional<std::size_t> location_;
};

}  // namespace faithsel
