#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace posebias::config {

// Minimal TOML-style document: flat `key = value` pairs where a value is a
// number, a quoted string, a boolean or a (possibly nested) array. Arrays may
// span lines. `#` starts a comment. Tables are not supported.
struct Value {
  std::variant<double, std::string, bool, std::vector<Value>> data;

  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<std::vector<Value>>(data); }
};

class Document {
 public:
  static Document parse(std::string_view text, const std::string &source = "<string>");
  static Document load(const std::filesystem::path &path);

  bool contains(const std::string &key) const { return values_.count(key) != 0; }

  // Accessors throw ErrorCode::kConfig naming the key on type mismatch or
  // absence.
  double number(const std::string &key) const;
  double number_or(const std::string &key, double fallback) const;
  std::string string(const std::string &key) const;
  bool boolean_or(const std::string &key, bool fallback) const;
  std::vector<double> numbers(const std::string &key) const;
  std::vector<std::vector<double>> number_rows(const std::string &key) const;

  const std::string &source() const { return source_; }

 private:
  const Value &get(const std::string &key) const;

  std::string source_;
  std::map<std::string, Value> values_;
};

}  // namespace posebias::config
