#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "privscore/core.hpp"

namespace privscore::io {

namespace fs = std::filesystem;

/// Malformed input, reported with its file and 1-based line.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("could not format number");
  return std::string(buf, ptr);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

/// 64-bit FNV-1a, used for content hashes in manifests.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int k = 15; k >= 0; --k, v >>= 4) s[static_cast<std::size_t>(k)] = digits[v & 0xf];
  return s;
}

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
  /// Leading "#" metadata lines, without the marker.
  std::vector<std::string> comments;
};

/// Parses comma-separated text with optional double-quoted fields. Lines
/// starting with '#' are metadata; blank lines are skipped; a trailing CR
/// is tolerated.
inline CsvTable parse_csv(std::string_view text, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::size_t pos = 0, line = 0;
  bool have_header = false;
  while (pos < text.size()) {
    ++line;
    const std::size_t row_line = line;
    if (text[pos] == '#') {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      auto body = text.substr(pos + 1, end - pos - 1);
      if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
      t.comments.emplace_back(body);
      pos = end + 1;
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false, was_quoted = false;
    for (;;) {
      if (pos >= text.size()) {
        if (quoted) throw ParseError(source, row_line, "unterminated quoted field");
        break;
      }
      const char c = text[pos++];
      if (quoted) {
        if (c == '"') {
          if (pos < text.size() && text[pos] == '"') {
            field.push_back('"');
            ++pos;
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        continue;
      }
      if (c == '"') {
        if (!field.empty() || was_quoted) throw ParseError(source, row_line, "stray quote inside field");
        quoted = was_quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
      } else if (c == '\n') {
        break;
      } else if (c == '\r' && (pos >= text.size() || text[pos] == '\n')) {
        continue;
      } else {
        if (was_quoted) throw ParseError(source, row_line, "text after closing quote");
        field.push_back(c);
      }
    }
    fields.push_back(std::move(field));
    if (fields.size() == 1 && fields[0].empty() && !was_quoted) continue;
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size())
        throw ParseError(source, row_line,
                         "expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
      t.rows.push_back({row_line, std::move(fields)});
    }
  }
  if (!have_header) throw ParseError(source, 1, "missing header row");
  return t;
}

inline CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path), path.filename().string()); }

inline void require_header(const CsvTable& t, const std::vector<std::string>& expected) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ParseError(t.source, 1, "header must be '" + want + "'");
  }
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::int64_t parse_int(const CsvTable& t, const CsvRow& row, std::size_t col) {
  const auto& f = row.fields[col];
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty())
    throw ParseError(t.source, row.line, "column '" + t.header[col] + "' is not an integer: '" + f + "'");
  return v;
}

inline double parse_double(const CsvTable& t, const CsvRow& row, std::size_t col) {
  const auto& f = row.fields[col];
  double v = 0;
  auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty())
    throw ParseError(t.source, row.line, "column '" + t.header[col] + "' is not a number: '" + f + "'");
  return v;
}

/// `user_id,score` rows sorted by user id, preceded by one metadata line.
inline std::string format_scores(const ScoreVector& s, const std::string& metadata) {
  std::vector<std::size_t> order(s.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.registry().id(a) < s.registry().id(b); });
  std::string out;
  if (!metadata.empty()) out += "# " + metadata + "\n";
  out += "user_id,score\n";
  for (auto j : order) out += csv_escape(s.registry().id(j)) + "," + format_double(s[j]) + "\n";
  return out;
}

/// Reads a score file and aligns it with `registry`.
inline ScoreVector read_scores(const fs::path& path, const UserRegistry& registry, ScoreModel model) {
  auto t = read_csv(path);
  require_header(t, {"user_id", "score"});
  std::vector<double> values(registry.size(), 0.0);
  std::vector<bool> seen(registry.size(), false);
  for (const auto& row : t.rows) {
    auto j = registry.find(row.fields[0]);
    if (!j) throw ParseError(t.source, row.line, "unknown user '" + row.fields[0] + "'");
    if (seen[*j]) throw ParseError(t.source, row.line, "duplicate user '" + row.fields[0] + "'");
    seen[*j] = true;
    values[*j] = parse_double(t, row, 1);
  }
  for (std::size_t j = 0; j < registry.size(); ++j)
    if (!seen[j]) throw ValidationError(path.filename().string() + ": missing user '" + registry.id(j) + "'");
  return ScoreVector(registry, model, std::move(values));
}

}  // namespace privscore::io
