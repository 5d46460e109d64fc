#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sgfloc {

// Minimal "key = value" text format shared by calibration and config files.
// '#' starts a comment; blank lines are ignored; keys are unique.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& raw(const std::string& key) const;
  double number(const std::string& key) const;
  std::vector<double> numbers(const std::string& key, size_t expected) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  std::string to_string() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

double parse_double(const std::string& s, const std::string& what);
std::string format_double(double v);

}  // namespace sgfloc
