#pragma once

// Minimal reader for the scenario config format: a human-editable key-value
// document with [section] headers, repeatable [[block]] headers, `key = value`
// pairs, # comments, and values that are numbers, booleans, quoted strings or
// (nested) numeric arrays. This is a deliberate subset of TOML; scenario
// files that stick to the documented schema parse identically under both.

#include <Eigen/Dense>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "zgem/error.hpp"

namespace zgem {

class ConfigValue {
 public:
  enum class Kind { kNumber, kBool, kString, kArray };

  Kind kind = Kind::kNumber;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> array;

  double as_number(const std::string& key) const {
    if (kind != Kind::kNumber) {
      throw ValidationError("config-schema", "key '" + key + "' must be a number");
    }
    return number;
  }

  Eigen::VectorXd as_vector(const std::string& key) const {
    if (kind != Kind::kArray) {
      throw ValidationError("config-schema", "key '" + key + "' must be an array");
    }
    Eigen::VectorXd v(array.size());
    for (std::size_t i = 0; i < array.size(); ++i) {
      v(static_cast<Eigen::Index>(i)) = array[i].as_number(key);
    }
    return v;
  }

  Eigen::MatrixXd as_matrix(const std::string& key) const {
    if (kind != Kind::kArray || array.empty() || array.front().kind != Kind::kArray) {
      throw ValidationError("config-schema", "key '" + key + "' must be an array of rows");
    }
    const auto cols = array.front().array.size();
    Eigen::MatrixXd m(array.size(), cols);
    for (std::size_t r = 0; r < array.size(); ++r) {
      const Eigen::VectorXd row = array[r].as_vector(key);
      if (static_cast<std::size_t>(row.size()) != cols) {
        throw ValidationError("config-schema", "ragged matrix for key '" + key + "'");
      }
      m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
  }
};

class ConfigTable {
 public:
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const ConfigValue& at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw ValidationError("config-schema", "missing key '" + key + "' in [" + name_ + "]");
    }
    return it->second;
  }

  double num(const std::string& key) const { return at(key).as_number(key); }
  double num_or(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
  }
  bool bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& v = at(key);
    if (v.kind != ConfigValue::Kind::kBool) {
      throw ValidationError("config-schema", "key '" + key + "' must be a boolean");
    }
    return v.boolean;
  }
  std::string str_or(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& v = at(key);
    if (v.kind != ConfigValue::Kind::kString) {
      throw ValidationError("config-schema", "key '" + key + "' must be a string");
    }
    return v.text;
  }
  Eigen::VectorXd vec(const std::string& key, Eigen::Index expected = -1) const {
    Eigen::VectorXd v = at(key).as_vector(key);
    if (expected >= 0 && v.size() != expected) {
      throw ValidationError("config-schema", "key '" + key + "' must have " +
                                                 std::to_string(expected) + " entries");
    }
    return v;
  }
  Eigen::VectorXd vec_or(const std::string& key, const Eigen::VectorXd& fallback) const {
    return has(key) ? vec(key, fallback.size()) : fallback;
  }
  Eigen::MatrixXd mat(const std::string& key) const { return at(key).as_matrix(key); }

  void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }
  void set_name(const std::string& name) { name_ = name; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::map<std::string, ConfigValue> values_;
};

class Config {
 public:
  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      throw ValidationError("config-parse", "cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
  }

  static Config parse_string(const std::string& text);

  bool has(const std::string& section) const { return tables_.count(section) > 0; }

  const ConfigTable& section(const std::string& name) const {
    auto it = tables_.find(name);
    if (it == tables_.end() || it->second.empty()) {
      throw ValidationError("config-schema", "missing section [" + name + "]");
    }
    if (it->second.size() > 1) {
      throw ValidationError("config-schema", "section [" + name + "] given more than once");
    }
    return it->second.front();
  }

  /// All [[name]] blocks, in file order; empty if absent.
  std::vector<ConfigTable> blocks(const std::string& name) const {
    auto it = tables_.find(name);
    return it == tables_.end() ? std::vector<ConfigTable>{} : it->second;
  }

 private:
  std::map<std::string, std::vector<ConfigTable>> tables_;
};

namespace detail {

inline std::string config_trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Strips a trailing comment that is not inside a quoted string.
inline std::string config_strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline ConfigValue config_parse_value(const std::string& raw, int line);

inline ConfigValue config_parse_array(const std::string& raw, int line) {
  ConfigValue v;
  v.kind = ConfigValue::Kind::kArray;
  int depth = 0;
  std::string item;
  for (std::size_t i = 1; i + 1 <= raw.size(); ++i) {
    const char ch = raw[i];
    if (i == raw.size() - 1) {
      if (ch != ']') {
        throw ValidationError("config-parse", "line " + std::to_string(line) + ": unterminated array");
      }
      if (!config_trim(item).empty()) v.array.push_back(config_parse_value(config_trim(item), line));
      return v;
    }
    if (ch == '[') ++depth;
    if (ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      if (!config_trim(item).empty()) v.array.push_back(config_parse_value(config_trim(item), line));
      item.clear();
    } else {
      item += ch;
    }
  }
  throw ValidationError("config-parse", "line " + std::to_string(line) + ": bad array");
}

inline ConfigValue config_parse_value(const std::string& raw, int line) {
  ConfigValue v;
  if (raw.empty()) {
    throw ValidationError("config-parse", "line " + std::to_string(line) + ": empty value");
  }
  if (raw.front() == '[') return config_parse_array(raw, line);
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') {
      throw ValidationError("config-parse", "line " + std::to_string(line) + ": unterminated string");
    }
    v.kind = ConfigValue::Kind::kString;
    v.text = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = ConfigValue::Kind::kBool;
    v.boolean = (raw == "true");
    return v;
  }
  try {
    std::size_t used = 0;
    v.number = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
  } catch (const std::exception&) {
    throw ValidationError("config-parse",
                          "line " + std::to_string(line) + ": cannot parse value '" + raw + "'");
  }
  v.kind = ConfigValue::Kind::kNumber;
  return v;
}

}  // namespace detail

inline Config Config::parse_string(const std::string& text) {
  Config cfg;
  ConfigTable* current = nullptr;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::config_trim(detail::config_strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      const bool repeated = line.size() > 1 && line[1] == '[';
      const std::string close = repeated ? "]]" : "]";
      if (line.substr(line.size() - close.size()) != close) {
        throw ValidationError("config-parse",
                              "line " + std::to_string(line_no) + ": bad section header");
      }
      const std::string name = detail::config_trim(
          line.substr(repeated ? 2 : 1, line.size() - 2 * (repeated ? 2 : 1)));
      if (name.empty()) {
        throw ValidationError("config-parse",
                              "line " + std::to_string(line_no) + ": empty section name");
      }
      auto& vec = cfg.tables_[name];
      if (!repeated && !vec.empty()) {
        throw ValidationError("config-parse", "line " + std::to_string(line_no) + ": section [" +
                                                  name + "] repeated (use [[...]] for blocks)");
      }
      vec.emplace_back();
      vec.back().set_name(name);
      current = &vec.back();
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config-parse",
                            "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    if (current == nullptr) {
      throw ValidationError("config-parse",
                            "line " + std::to_string(line_no) + ": key outside any section");
    }
    const std::string key = detail::config_trim(line.substr(0, eq));
    const std::string value = detail::config_trim(line.substr(eq + 1));
    current->set(key, detail::config_parse_value(value, line_no));
  }
  return cfg;
}

}  // namespace zgem
