#pragma once

// Plain-text key=value documents used for manifests and noise specs.
// Lines starting with '#' are comments; keys keep their insertion order.
// Doubles are written in shortest round-trip form so a parsed value is
// bit-identical to the one that was written.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace h2tf {

class KeyValue {
 public:
  template <typename T>
  void set(const std::string& key, const T& value) {
    set_raw(key, fmt::format("{}", value));
  }
  void set_raw(const std::string& key, std::string value);

  // Appends every entry of `other` with "prefix." in front of its key.
  void merge(const KeyValue& other, const std::string& prefix);

  [[nodiscard]] std::optional<std::string> find(const std::string& key) const;
  [[nodiscard]] std::string get(const std::string& key) const;  // throws ConfigError when missing
  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] int get_int(const std::string& key, int fallback) const;
  [[nodiscard]] std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  [[nodiscard]] bool contains(const std::string& key) const { return find(key).has_value(); }

  // Entries under "prefix." with the prefix stripped.
  [[nodiscard]] KeyValue section(const std::string& prefix) const;

  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  [[nodiscard]] std::string to_text() const;
  static KeyValue parse(const std::string& text);

  void save(const std::string& path) const;
  static KeyValue load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace h2tf
