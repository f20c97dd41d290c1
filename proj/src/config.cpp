#include "shelab/config.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace shelab {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("sha256: ctx allocation failed");
  if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256: digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

namespace {

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end;
}

ConfigValue parse_value(const std::string& raw, int line_no) {
  ConfigValue v;
  const std::string s = strip(raw);
  if (s.empty()) throw ConfigError("config: empty value on line " + std::to_string(line_no));
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw ConfigError("config: unterminated string on line " + std::to_string(line_no));
    v.type = ConfigValue::Type::text;
    v.text = s.substr(1, s.size() - 2);
    return v;
  }
  if (s == "true" || s == "false") {
    v.type = ConfigValue::Type::boolean;
    v.boolean = s == "true";
    return v;
  }
  if (s.front() == '[') {
    if (s.back() != ']')
      throw ConfigError("config: unterminated list on line " + std::to_string(line_no));
    v.type = ConfigValue::Type::list;
    std::string body = s.substr(1, s.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = strip(item);
      if (item.empty()) continue;
      double d;
      if (!parse_number(item, d))
        throw ConfigError("config: bad list entry '" + item + "' on line " +
                          std::to_string(line_no));
      v.list.push_back(d);
    }
    return v;
  }
  double d;
  if (!parse_number(s, d))
    throw ConfigError("config: cannot parse value '" + s + "' on line " + std::to_string(line_no));
  v.type = ConfigValue::Type::number;
  v.number = d;
  return v;
}

}  // namespace

Config Config::parse_text(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section on line " + std::to_string(line_no));
      section = strip(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config: empty section name on line " + std::to_string(line_no));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value on line " + std::to_string(line_no));
    std::string key = strip(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(line_no));
    if (!section.empty()) key = section + "." + key;
    cfg.values_[key] = parse_value(line.substr(eq + 1), line_no);
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

namespace {
const ConfigValue& require(const std::map<std::string, ConfigValue>& values,
                           const std::string& key) {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError("config: missing key '" + key + "'");
  return it->second;
}
}  // namespace

double Config::get_number(const std::string& key) const {
  const auto& v = require(values_, key);
  if (v.type != ConfigValue::Type::number)
    throw ConfigError("config: key '" + key + "' is not a number");
  return v.number;
}
double Config::get_number(const std::string& key, double fallback) const {
  return has(key) ? get_number(key) : fallback;
}

long long Config::get_int(const std::string& key) const {
  const double d = get_number(key);
  const long long i = std::llround(d);
  if (std::abs(d - double(i)) > 1e-9)
    throw ConfigError("config: key '" + key + "' is not an integer");
  return i;
}
long long Config::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = require(values_, key);
  if (v.type != ConfigValue::Type::boolean)
    throw ConfigError("config: key '" + key + "' is not a boolean");
  return v.boolean;
}

std::string Config::get_text(const std::string& key) const {
  const auto& v = require(values_, key);
  if (v.type != ConfigValue::Type::text)
    throw ConfigError("config: key '" + key + "' is not a string");
  return v.text;
}
std::string Config::get_text(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_text(key) : fallback;
}

std::vector<double> Config::get_list(const std::string& key) const {
  const auto& v = require(values_, key);
  if (v.type == ConfigValue::Type::list) return v.list;
  if (v.type == ConfigValue::Type::number) return {v.number};  // singleton promotion
  throw ConfigError("config: key '" + key + "' is not a list");
}
std::vector<double> Config::get_list(const std::string& key, std::vector<double> fallback) const {
  return has(key) ? get_list(key) : fallback;
}

void Config::set_from_string(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("config: override must look like section.key=value");
  const std::string key = strip(assignment.substr(0, eq));
  values_[key] = parse_value(assignment.substr(eq + 1), 0);
}

void Config::set_number(const std::string& key, double v) {
  ConfigValue cv;
  cv.type = ConfigValue::Type::number;
  cv.number = v;
  values_[key] = cv;
}

void Config::set_text(const std::string& key, const std::string& v) {
  ConfigValue cv;
  cv.type = ConfigValue::Type::text;
  cv.text = v;
  values_[key] = cv;
}

std::string Config::canonical_text() const {
  std::string out;
  for (const auto& [key, v] : values_) {
    out += key;
    out += '=';
    switch (v.type) {
      case ConfigValue::Type::number:
        out += format_double(v.number);
        break;
      case ConfigValue::Type::boolean:
        out += v.boolean ? "true" : "false";
        break;
      case ConfigValue::Type::text:
        out += '"';
        out += v.text;
        out += '"';
        break;
      case ConfigValue::Type::list: {
        out += '[';
        for (std::size_t i = 0; i < v.list.size(); ++i) {
          if (i) out += ',';
          out += format_double(v.list[i]);
        }
        out += ']';
        break;
      }
    }
    out += '\n';
  }
  return out;
}

std::string Config::digest() const { return sha256_hex(canonical_text()); }

}  // namespace shelab
