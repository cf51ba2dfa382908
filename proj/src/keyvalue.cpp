#include "cfdepth/keyvalue.hpp"

#include "cfdepth/errors.hpp"

#include <charconv>
#include <sstream>

namespace cfd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end || text.empty()) {
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
  return v;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::size_t offset = 0;
  while (offset < text.size()) {
    std::size_t eol = text.find('\n', offset);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = trim(text.substr(offset, eol - offset));
    if (!line.empty() && line[0] != '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(offset, "expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ParseError(offset, "empty key");
      if (!kv.emplace(key, trim(line.substr(eq + 1))).second) throw ParseError(offset, "duplicate key " + key);
    }
    offset = eol + 1;
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void KeyReader::read(const std::string& key, int& out) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return;
  out = parse_number<int>(key, it->second);
  kv_.erase(it);
}

void KeyReader::read(const std::string& key, double& out) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return;
  out = parse_number<double>(key, it->second);
  kv_.erase(it);
}

void KeyReader::read(const std::string& key, std::uint64_t& out) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return;
  out = parse_number<std::uint64_t>(key, it->second);
  kv_.erase(it);
}

void KeyReader::read(const std::string& key, bool& out) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return;
  if (it->second == "true" || it->second == "1") {
    out = true;
  } else if (it->second == "false" || it->second == "0") {
    out = false;
  } else {
    throw ConfigError("bad value for " + key + ": '" + it->second + "'");
  }
  kv_.erase(it);
}

void KeyReader::read(const std::string& key, std::string& out) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return;
  out = it->second;
  kv_.erase(it);
}

void KeyReader::read(const std::string& key, std::vector<int>& out) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return;
  std::vector<int> v;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(parse_number<int>(key, trim(item)));
  out = std::move(v);
  kv_.erase(it);
}

KeyValues KeyReader::take_prefix(const std::string& prefix) {
  KeyValues out;
  for (auto it = kv_.begin(); it != kv_.end();) {
    if (it->first.rfind(prefix, 0) == 0) {
      out.insert(*it);
      it = kv_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

void KeyReader::finish() const {
  if (!kv_.empty()) throw ConfigError("unknown config key: " + kv_.begin()->first);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace cfd
