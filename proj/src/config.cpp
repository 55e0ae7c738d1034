// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0

#include "gi/config.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gi/error.hpp"

namespace gi {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "' as a number");
  return value;
}

}  // namespace

ConfigTree parse_config_text(const std::string& text) {
  std::istringstream in(text);
  ConfigTree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

ConfigTree read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config_text(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string config_to_text(const ConfigTree& tree) {
  std::ostringstream out;
  boost::property_tree::ini_parser::write_ini(out, tree);
  return out.str();
}

void apply_overrides(ConfigTree& tree, const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + a + "' is not of the form section.key=value");
    const std::string key = trim(a.substr(0, eq));
    if (key.find('.') == std::string::npos) throw ConfigError("override key '" + key + "' needs a section");
    tree.put(key, trim(a.substr(eq + 1)));
  }
}

bool has_key(const ConfigTree& tree, const std::string& key) { return tree.get_optional<std::string>(key).has_value(); }

std::string get_string(const ConfigTree& tree, const std::string& key, const std::string& fallback) {
  if (auto v = tree.get_optional<std::string>(key)) return trim(*v);
  return fallback;
}

std::size_t get_size(const ConfigTree& tree, const std::string& key, std::size_t fallback) {
  if (auto v = tree.get_optional<std::string>(key)) return parse_number<std::size_t>(key, *v);
  return fallback;
}

std::uint64_t get_u64(const ConfigTree& tree, const std::string& key, std::uint64_t fallback) {
  if (auto v = tree.get_optional<std::string>(key)) return parse_number<std::uint64_t>(key, *v);
  return fallback;
}

double get_double(const ConfigTree& tree, const std::string& key, double fallback) {
  if (auto v = tree.get_optional<std::string>(key)) return parse_number<double>(key, *v);
  return fallback;
}

bool get_bool(const ConfigTree& tree, const std::string& key, bool fallback) {
  auto v = tree.get_optional<std::string>(key);
  if (!v) return fallback;
  std::string s = trim(*v);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + *v + "' as a boolean");
}

std::vector<std::string> get_list(const ConfigTree& tree, const std::string& key) {
  std::vector<std::string> out;
  if (auto v = tree.get_optional<std::string>(key)) {
    std::string text = *v;
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    std::string item;
    while (in >> item) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> get_size_list(const ConfigTree& tree, const std::string& key) {
  std::vector<std::size_t> out;
  for (const std::string& s : get_list(tree, key)) out.push_back(parse_number<std::size_t>(key, s));
  return out;
}

std::vector<double> get_double_list(const ConfigTree& tree, const std::string& key) {
  std::vector<double> out;
  for (const std::string& s : get_list(tree, key)) out.push_back(parse_number<double>(key, s));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace gi
