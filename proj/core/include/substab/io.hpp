#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "substab/linalg.hpp"

namespace substab {

struct CsvOptions {
  /// Column holding the response; every other column is a feature.
  std::optional<std::string> response;
  bool center = true;
};

struct LoadedData {
  DesignMatrix x;
  std::optional<Vector> y;
  /// Names of the kept feature columns, in design order.
  std::vector<std::string> names;
  std::vector<std::string> dropped;
  Index rows = 0;
};

/// Reads a header-first numeric CSV. Constant columns are dropped with a
/// warning. Non-numeric cells raise ParseError naming the row and column
/// (1-based data row, header excluded).
LoadedData load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
LoadedData parse_csv(std::istream& in, const CsvOptions& options = {});

/// Writes features (and optionally a response column) with 17 significant
/// digits so values round-trip exactly.
void write_csv(const std::filesystem::path& path, const Matrix& x, const std::vector<std::string>& names,
               const Vector* y = nullptr, std::string_view response_name = "y");

/// Formats a double with 17 significant digits.
std::string format_double(double v);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);
void write_text(const std::filesystem::path& path, std::string_view text);

std::uint64_t fnv1a(std::string_view bytes);

/// Reproducibility record: tool and dependency versions, seed, the full
/// configuration and its hash.
nlohmann::json make_manifest(std::string_view command, std::uint64_t seed, const nlohmann::json& config);

}  // namespace substab
