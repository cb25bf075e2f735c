// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "actionpose/errors.hpp"

namespace actionpose {

// Flat typed key-value document: one "key = value" per line, '#' comments.
// Unknown keys are rejected at the consumer with their key path.
class KeyValues {
 public:
  KeyValues() = default;
  explicit KeyValues(std::map<std::string, std::string> entries)
      : entries_(std::move(entries)) {}

  static KeyValues parse_file(const std::string& path);
  static KeyValues parse_text(const std::string& text);
  void write_file(const std::string& path) const;

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void set_from_assignment(const std::string& key_eq_value);  // "key=value"

  const std::string& get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  // Keys present here but absent from `allowed`; used for validation.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace actionpose
