#include "substab/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "substab/diagnostics.hpp"

namespace substab {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, std::size_t row, std::size_t col, const std::string& name) {
  const std::string s = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = s.empty() ? 0.0 : std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ParseError("non-numeric value '" + s + "' at row " + std::to_string(row) + ", column " +
                     std::to_string(col) + " (" + name + ")");
  }
  return v;
}

std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

LoadedData parse_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("CSV input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_row(line);
  for (auto& h : header) h = trim(h);
  std::set<std::string> seen;
  for (const auto& h : header) {
    if (!seen.insert(h).second) throw ParseError("duplicate column name '" + h + "'");
  }
  int response_col = -1;
  if (options.response) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == *options.response) response_col = static_cast<int>(c);
    if (response_col < 0) throw ParseError("response column '" + *options.response + "' not found");
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_no;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) values[c] = parse_number(cells[c], row_no, c + 1, header[c]);
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) throw ParseError("CSV needs at least two data rows");

  const Index n = static_cast<Index>(rows.size());
  std::vector<std::size_t> keep;
  std::vector<std::string> dropped;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<int>(c) == response_col) continue;
    bool constant = true;
    for (const auto& r : rows) constant = constant && r[c] == rows.front()[c];
    if (constant) {
      dropped.push_back(header[c]);
      warn("dropping constant column '" + header[c] + "'");
    } else {
      keep.push_back(c);
    }
  }
  if (keep.empty()) throw ParseError("CSV has no non-constant feature columns");

  Matrix x(n, static_cast<Index>(keep.size()));
  for (Index i = 0; i < n; ++i)
    for (std::size_t k = 0; k < keep.size(); ++k) x(i, static_cast<Index>(k)) = rows[static_cast<std::size_t>(i)][keep[k]];

  std::vector<std::string> names;
  for (auto c : keep) names.push_back(header[c]);
  std::optional<Vector> y;
  if (response_col >= 0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(response_col)];
    if (options.center) v.array() -= v.mean();
    y = std::move(v);
  }
  return LoadedData{options.center ? DesignMatrix::centered(std::move(x)) : DesignMatrix::raw(std::move(x)),
                    std::move(y), std::move(names), std::move(dropped), n};
}

LoadedData load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_csv(in, options);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const Matrix& x, const std::vector<std::string>& names,
               const Vector* y, std::string_view response_name) {
  if (static_cast<Index>(names.size()) != x.cols()) throw UsageError("column name count does not match the matrix");
  if (y != nullptr && y->size() != x.rows()) throw UsageError("response length does not match the matrix");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << csv_escape(names[j]);
  if (y != nullptr) out << (names.empty() ? "" : ",") << csv_escape(response_name);
  out << '\n';
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << format_double(x(i, j));
    if (y != nullptr) out << (x.cols() ? "," : "") << format_double((*y)(i));
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  write_text(path, value.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

nlohmann::json make_manifest(std::string_view command, std::uint64_t seed, const nlohmann::json& config) {
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config.dump());
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  std::ostringstream json_version;
  json_version << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.'
               << NLOHMANN_JSON_VERSION_PATCH;
  return nlohmann::json{{"tool", "substab"},
                        {"version", version()},
                        {"command", std::string(command)},
                        {"seed", seed},
                        {"config", config},
                        {"config_hash", hash.str()},
                        {"dependencies", {{"eigen", eigen.str()}, {"nlohmann_json", json_version.str()}}}};
}

}  // namespace substab
