#pragma once
// Flat key-value experiment configuration with TOML-style sections:
//
//   [campaign]
//   kind = "clt"
//   replicas = 2000
//   [average]
//   windows = [256, 512]
//
// Keys are stored fully qualified ("campaign.kind").  The canonical form
// (sorted key=value lines, numbers at full round-trip precision) feeds the
// SHA-256 config digest that binds every result file to its configuration.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shelab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigValue {
  enum class Type { number, boolean, text, list };
  Type type = Type::number;
  double number = 0;
  bool boolean = false;
  std::string text;
  std::vector<double> list;
};

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_text(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  // Typed getters throw ConfigError on missing key or wrong type.
  double get_number(const std::string& key) const;
  double get_number(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_text(const std::string& key) const;
  std::string get_text(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_list(const std::string& key) const;
  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const;

  // Set/override from "section.key=value" (CLI) or typed.
  void set_from_string(const std::string& assignment);
  void set_number(const std::string& key, double v);
  void set_text(const std::string& key, const std::string& v);

  // Sorted "key=value" lines, one per key, full precision.
  std::string canonical_text() const;
  // SHA-256 hex of canonical_text().
  std::string digest() const;

  const std::map<std::string, ConfigValue>& values() const { return values_; }

 private:
  std::map<std::string, ConfigValue> values_;
};

std::string sha256_hex(const std::string& data);
std::string format_double(double v);  // shortest round-trip decimal

}  // namespace shelab
