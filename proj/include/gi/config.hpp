// Copyright 2026 The Genomic Interpreter Authors
// SPDX-License-Identifier: Apache-2.0
//
// Key-value configuration text.
//
//   ; comment
//   [section]
//   key = value
//   list_key = 1 2 3
//
// Keys are addressed as "section.key". Lists are whitespace separated.
// Booleans accept true/false/1/0/yes/no/on/off.

#pragma once

#include <boost/property_tree/ptree.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace gi {

using ConfigTree = boost::property_tree::ptree;

ConfigTree parse_config_text(const std::string& text);
/// Throws ConfigError naming the path when the file is missing or malformed.
ConfigTree read_config_file(const std::string& path);
std::string config_to_text(const ConfigTree& tree);

/// Applies "section.key=value" overrides; later entries win.
void apply_overrides(ConfigTree& tree, const std::vector<std::string>& assignments);

bool has_key(const ConfigTree& tree, const std::string& key);
std::string get_string(const ConfigTree& tree, const std::string& key, const std::string& fallback);
std::size_t get_size(const ConfigTree& tree, const std::string& key, std::size_t fallback);
std::uint64_t get_u64(const ConfigTree& tree, const std::string& key, std::uint64_t fallback);
double get_double(const ConfigTree& tree, const std::string& key, double fallback);
bool get_bool(const ConfigTree& tree, const std::string& key, bool fallback);
std::vector<std::string> get_list(const ConfigTree& tree, const std::string& key);
std::vector<std::size_t> get_size_list(const ConfigTree& tree, const std::string& key);
std::vector<double> get_double_list(const ConfigTree& tree, const std::string& key);

std::string format_double(double v);

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    if constexpr (std::is_same_v<T, std::string>)
      out += values[i];
    else if constexpr (std::is_floating_point_v<T>)
      out += format_double(values[i]);
    else
      out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace gi
