// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fc/core.hpp"
#include "fc/io.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fc {

/// Flat `key = value` settings. `#` starts a comment; later keys override
/// earlier ones. Reads are tracked so unknown keys can be reported.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text, const std::string& source = "<config>") {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto body = io::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw DataError(source + ":" + std::to_string(lineno) + ": expected key = value");
      }
      const auto key = std::string(io::trim(body.substr(0, eq)));
      if (key.empty()) throw DataError(source + ":" + std::to_string(lineno) + ": empty key");
      cfg.set(key, std::string(io::trim(body.substr(eq + 1))));
    }
    return cfg;
  }

  static Config load(const std::filesystem::path& path) { return parse(io::read_text(path), path.string()); }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    return io::parse_double_or_throw(*v, "config key '" + key + "'");
  }

  long get_int(const std::string& key, long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    const double d = io::parse_double_or_throw(*v, "config key '" + key + "'");
    if (d != std::floor(d)) throw DataError("config key '" + key + "' must be an integer");
    return static_cast<long>(d);
  }

  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stoull(*v);
    } catch (const std::exception&) {
      throw DataError("config key '" + key + "' must be a non-negative integer");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw DataError("config key '" + key + "' must be true or false");
  }

  /// Comma-separated list.
  std::vector<std::string> get_list(const std::string& key) const {
    auto v = get(key);
    if (!v) return {};
    auto parts = io::split(*v, ',');
    std::vector<std::string> out;
    for (auto& p : parts) {
      if (!p.empty()) out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(k);
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace fc
