#include "h2tf/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "h2tf/errors.hpp"

namespace h2tf {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
  return value;
}

}  // namespace

void KeyValue::set_raw(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

void KeyValue::merge(const KeyValue& other, const std::string& prefix) {
  for (const auto& [k, v] : other.entries_) set_raw(prefix + "." + k, v);
}

std::optional<std::string> KeyValue::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

std::string KeyValue::get(const std::string& key) const {
  auto v = find(key);
  if (!v) throw ConfigError(fmt::format("missing key '{}'", key));
  return *v;
}

std::string KeyValue::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double KeyValue::get_double(const std::string& key, double fallback) const {
  auto v = find(key);
  return v ? parse_number<double>(key, *v) : fallback;
}

int KeyValue::get_int(const std::string& key, int fallback) const {
  auto v = find(key);
  return v ? parse_number<int>(key, *v) : fallback;
}

std::uint64_t KeyValue::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = find(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

KeyValue KeyValue::section(const std::string& prefix) const {
  KeyValue out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : entries_)
    if (k.starts_with(p)) out.set_raw(k.substr(p.size()), v);
  return out;
}

std::string KeyValue::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

KeyValue KeyValue::parse(const std::string& text) {
  KeyValue kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(fmt::format("line {}: expected key=value, got '{}'", lineno, line));
    }
    kv.set_raw(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

void KeyValue::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path));
  out << to_text();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path));
}

KeyValue KeyValue::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace h2tf
