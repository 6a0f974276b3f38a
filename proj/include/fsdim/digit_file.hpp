#pragma once

// Digit file format:
//   line 1:  base=<b>
//   line 2+: digits as whitespace-separated ASCII tokens (decimal values).
// For b <= 10 a multi-character token such as "0110" is also read as one
// digit per character.

#include "fsdim/base_arith.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace fsdim {

DigitWord read_digits(std::istream& in, std::optional<Base> declared_base = std::nullopt);
DigitWord read_digit_file(const std::filesystem::path& path, std::optional<Base> declared_base = std::nullopt);

void write_digits(std::ostream& out, const DigitWord& w);
void write_digit_file(const std::filesystem::path& path, const DigitWord& w);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace fsdim
