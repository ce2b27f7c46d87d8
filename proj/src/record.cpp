#include "maglens/record.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace maglens {

FormatError::FormatError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                  : message),
      line_(line) {}

bool Record::has(std::string_view key) const { return find(key).has_value(); }

std::optional<std::string_view> Record::find(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return std::string_view(v);
  }
  return std::nullopt;
}

std::string_view Record::text(std::string_view key) const {
  auto value = find(key);
  if (!value) {
    throw FormatError(line, "'" + keyword + "' record is missing '" + std::string(key) + "'");
  }
  return *value;
}

double Record::number(std::string_view key) const { return parse_number(text(key), line); }

double Record::number_or(std::string_view key, double fallback) const {
  auto value = find(key);
  return value ? parse_number(*value, line) : fallback;
}

long long Record::integer(std::string_view key) const {
  const auto token = text(key);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw FormatError(line, "expected integer for '" + std::string(key) + "', got '" +
                                std::string(token) + "'");
  }
  return out;
}

std::vector<double> Record::numbers(std::string_view key) const {
  return parse_numbers(text(key), line);
}

Record& Record::add(std::string key, std::string value) {
  fields.emplace_back(std::move(key), std::move(value));
  return *this;
}

Record& Record::add(std::string key, double value) {
  return add(std::move(key), format_number(value));
}

Record& Record::add(std::string key, std::span<const double> values) {
  return add(std::move(key), format_numbers(values));
}

std::string Record::to_line() const {
  std::string out = keyword;
  for (const auto& [k, v] : fields) {
    out += ' ';
    out += k;
    out += '=';
    out += v;
  }
  return out;
}

std::vector<Record> parse_records(std::string_view text) {
  std::vector<Record> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    Record record;
    record.line = line_no;
    std::size_t i = 0;
    bool first = true;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
      std::string_view token = line.substr(i, j - i);
      i = j;
      if (first) {
        record.keyword = std::string(token);
        first = false;
        continue;
      }
      const auto eq = token.find('=');
      if (eq == std::string_view::npos || eq == 0) {
        throw FormatError(line_no, "expected key=value, got '" + std::string(token) + "'");
      }
      record.fields.emplace_back(std::string(token.substr(0, eq)),
                                 std::string(token.substr(eq + 1)));
    }
    if (!first) out.push_back(std::move(record));
    if (end == text.size()) break;
  }
  return out;
}

std::string format_records(std::span<const Record> records) {
  std::string out;
  for (const auto& r : records) {
    out += r.to_line();
    out += '\n';
  }
  return out;
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::string format_numbers(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_number(values[i]);
  }
  return out;
}

double parse_number(std::string_view token, int line) {
  double out = 0.0;
  const char* begin = token.data();
  if (!token.empty() && token.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, token.data() + token.size(), out);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw FormatError(line, "expected number, got '" + std::string(token) + "'");
  }
  return out;
}

std::vector<double> parse_numbers(std::string_view token, int line) {
  std::vector<double> out;
  if (token.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = token.find(',', pos);
    out.push_back(parse_number(token.substr(pos, comma - pos), line));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace maglens
