#pragma once

// Minimal CSV reading and writing: comma separator, optional double-quoted
// fields with "" escapes, header row required.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace transnet::csv {

/// Splits one line into fields. Returns false on an unterminated quote.
bool split_line(std::string_view line, std::vector<std::string>& fields);

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const noexcept { return header_; }
  bool has_header() const noexcept { return !header_.empty(); }
  /// Column index of name; throws InputError if absent.
  std::size_t column(std::string_view name) const;
  /// Reads the next data row; returns false at end of file. A row that fails
  /// to parse is returned with ok() == false.
  bool next();
  bool ok() const noexcept { return ok_; }
  const std::vector<std::string>& fields() const noexcept { return fields_; }
  std::size_t line_number() const noexcept { return line_no_; }

 private:
  std::ifstream in_;
  std::vector<std::string> header_;
  std::vector<std::string> fields_;
  std::string line_;
  std::size_t line_no_ = 0;
  bool ok_ = true;
};

/// Strict numeric parsing of a full field.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

/// Quotes a field when it contains a separator, quote or newline.
std::string escape(std::string_view field);

/// Shortest round-trip decimal representation.
std::string format_double(double x);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace transnet::csv
