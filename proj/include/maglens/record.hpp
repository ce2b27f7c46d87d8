#pragma once

// Line-oriented structured text shared by volume metadata, phantom specs,
// scene files and session scripts. One record per line:
//
//   keyword key=value key=value ...
//
// Values never contain whitespace. '#' starts a comment that runs to the end
// of the line. Blank lines are ignored.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace maglens {

class FormatError : public std::runtime_error {
 public:
  FormatError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct Record {
  std::string keyword;
  std::vector<std::pair<std::string, std::string>> fields;
  int line = 0;

  bool has(std::string_view key) const;
  std::optional<std::string_view> find(std::string_view key) const;
  // The accessors below throw FormatError naming the line and key.
  std::string_view text(std::string_view key) const;
  double number(std::string_view key) const;
  double number_or(std::string_view key, double fallback) const;
  long long integer(std::string_view key) const;
  std::vector<double> numbers(std::string_view key) const;

  Record& add(std::string key, std::string value);
  Record& add(std::string key, double value);
  Record& add(std::string key, std::span<const double> values);
  std::string to_line() const;
};

std::vector<Record> parse_records(std::string_view text);
std::string format_records(std::span<const Record> records);

// Shortest decimal form that parses back to the identical double.
std::string format_number(double value);
std::string format_numbers(std::span<const double> values);
double parse_number(std::string_view token, int line = 0);
std::vector<double> parse_numbers(std::string_view token, int line = 0);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace maglens
