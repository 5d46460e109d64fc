#include "sgfloc/kv_file.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sgfloc/errors.hpp"

namespace sgfloc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!kv.values_.emplace(key, value).second) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot read " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const std::string& KeyValueFile::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw InvalidInput(origin_ + ": missing key '" + key + "'");
  }
  return it->second;
}

double KeyValueFile::number(const std::string& key) const { return parse_double(raw(key), origin_ + ": " + key); }

std::vector<double> KeyValueFile::numbers(const std::string& key, size_t expected) const {
  std::istringstream in(raw(key));
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    out.push_back(parse_double(tok, origin_ + ": " + key));
  }
  if (out.size() != expected) {
    throw InvalidInput(origin_ + ": key '" + key + "' expects " + std::to_string(expected) + " numbers");
  }
  return out;
}

std::string KeyValueFile::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k + " = " + v + "\n";
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto res = std::from_chars(t.data(), end, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != end) {
    throw InvalidInput(what + ": not a number: '" + s + "'");
  }
  return v;
}

std::string format_double(double v) {
  // Shortest representation that round-trips.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace sgfloc
