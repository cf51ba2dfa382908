#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cfd {

/// Ordered `key = value` pairs. Lines may be blank or start with '#'.
using KeyValues = std::map<std::string, std::string>;

/// Parses the text; duplicate keys and lines without '=' raise ParseError.
KeyValues parse_key_values(const std::string& text);

/// One `key = value` line per entry, in key order.
std::string format_key_values(const KeyValues& kv);

/// Typed field access. Each getter removes the key it reads, so whatever is
/// left at the end is unknown; `finish` raises ConfigError naming it.
class KeyReader {
 public:
  explicit KeyReader(KeyValues kv) : kv_(std::move(kv)) {}

  void read(const std::string& key, int& out);
  void read(const std::string& key, double& out);
  void read(const std::string& key, bool& out);
  void read(const std::string& key, std::uint64_t& out);
  void read(const std::string& key, std::string& out);
  void read(const std::string& key, std::vector<int>& out);

  /// Removes and returns all keys starting with `prefix`.
  KeyValues take_prefix(const std::string& prefix);
  void finish() const;

 private:
  KeyValues kv_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
std::string format_ints(const std::vector<int>& v);

}  // namespace cfd
