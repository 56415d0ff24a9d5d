#include "posebias/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "posebias/error.hpp"

namespace posebias::config {

namespace {

class ValueParser {
 public:
  ValueParser(std::string_view text, const std::string &where)
      : text_{text}, where_{where} {}

  Value parse_all() {
    Value v = parse_value();
    skip_ws();
    if (pos_ != text_.size()) error("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void error(const std::string &what) const {
    fail(ErrorCode::kConfig, where_ + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  Value parse_value() {
    skip_ws();
    if (pos_ >= text_.size()) error("missing value");
    const char c = text_[pos_];
    if (c == '[') return parse_array();
    if (c == '"') return parse_string();
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return {true};
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return {false};
    }
    return parse_number();
  }

  Value parse_array() {
    ++pos_;
    std::vector<Value> items;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return {std::move(items)};
    }
    while (true) {
      items.push_back(parse_value());
      skip_ws();
      if (pos_ >= text_.size()) error("unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {  // trailing comma
          ++pos_;
          return {std::move(items)};
        }
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return {std::move(items)};
      }
      error("expected ',' or ']' in array");
    }
  }

  Value parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
        const char e = text_[++pos_];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: error(std::string("unsupported escape \\") + e);
        }
        ++pos_;
        continue;
      }
      out += text_[pos_++];
    }
    if (pos_ >= text_.size()) error("unterminated string");
    ++pos_;
    return {std::move(out)};
  }

  Value parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '.' || text_[pos_] == '-' ||
                                   text_[pos_] == '+' || text_[pos_] == '_'))
      ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    std::erase(token, '_');
    if (!token.empty() && token[0] == '+') token.erase(0, 1);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || end != token.data() + token.size())
      error("invalid number '" + std::string(text_.substr(start, pos_ - start)) + "'");
    return {value};
  }

  std::string_view text_;
  std::string where_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string &line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

int bracket_balance(const std::string &s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (in_string) continue;
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
  }
  return depth;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Document Document::parse(std::string_view text, const std::string &source) {
  Document doc;
  doc.source_ = source;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const int start_line = line_no;
    std::string stmt = trim(strip_comment(line));
    if (stmt.empty()) continue;
    if (stmt.front() == '[')
      fail(ErrorCode::kConfig, source + ":" + std::to_string(line_no) +
                                   ": tables are not supported");
    while (bracket_balance(stmt) > 0 && std::getline(in, line)) {
      ++line_no;
      stmt += " " + trim(strip_comment(line));
    }
    const auto eq = stmt.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::kConfig,
           source + ":" + std::to_string(start_line) + ": expected 'key = value'");
    const std::string key = trim(stmt.substr(0, eq));
    if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) {
          return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
        }))
      fail(ErrorCode::kConfig, source + ":" + std::to_string(start_line) +
                                   ": invalid key '" + key + "'");
    if (doc.values_.count(key))
      fail(ErrorCode::kConfig, source + ":" + std::to_string(start_line) +
                                   ": duplicate key '" + key + "'");
    const std::string where = source + ":" + std::to_string(start_line);
    doc.values_.emplace(key, ValueParser(stmt.substr(eq + 1), where).parse_all());
  }
  return doc;
}

Document Document::load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kConfig, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const Value &Document::get(const std::string &key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::kConfig, source_ + ": missing key '" + key + "'");
  return it->second;
}

double Document::number(const std::string &key) const {
  const Value &v = get(key);
  if (!v.is_number()) fail(ErrorCode::kConfig, source_ + ": '" + key + "' must be a number");
  return std::get<double>(v.data);
}

double Document::number_or(const std::string &key, double fallback) const {
  return contains(key) ? number(key) : fallback;
}

std::string Document::string(const std::string &key) const {
  const Value &v = get(key);
  if (!v.is_string()) fail(ErrorCode::kConfig, source_ + ": '" + key + "' must be a string");
  return std::get<std::string>(v.data);
}

bool Document::boolean_or(const std::string &key, bool fallback) const {
  if (!contains(key)) return fallback;
  const Value &v = get(key);
  if (!v.is_bool()) fail(ErrorCode::kConfig, source_ + ": '" + key + "' must be a boolean");
  return std::get<bool>(v.data);
}

std::vector<double> Document::numbers(const std::string &key) const {
  const Value &v = get(key);
  if (!v.is_array()) fail(ErrorCode::kConfig, source_ + ": '" + key + "' must be an array");
  std::vector<double> out;
  for (const Value &item : std::get<std::vector<Value>>(v.data)) {
    if (!item.is_number())
      fail(ErrorCode::kConfig, source_ + ": '" + key + "' must contain only numbers");
    out.push_back(std::get<double>(item.data));
  }
  return out;
}

std::vector<std::vector<double>> Document::number_rows(const std::string &key) const {
  const Value &v = get(key);
  if (!v.is_array()) fail(ErrorCode::kConfig, source_ + ": '" + key + "' must be an array");
  std::vector<std::vector<double>> rows;
  for (const Value &row : std::get<std::vector<Value>>(v.data)) {
    if (!row.is_array())
      fail(ErrorCode::kConfig, source_ + ": '" + key + "' must be an array of arrays");
    std::vector<double> r;
    for (const Value &item : std::get<std::vector<Value>>(row.data)) {
      if (!item.is_number())
        fail(ErrorCode::kConfig, source_ + ": '" + key + "' must contain only numbers");
      r.push_back(std::get<double>(item.data));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace posebias::config
