#include "mdt/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mdt/io_util.hpp"

namespace mdt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected `key = value`");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": empty key");
    }
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

Config Config::parse_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw std::invalid_argument("config file not found: " + path.string());
  }
  return parse_string(read_text_file(path), path.string());
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return false;
  return it->second.count(key) > 0;
}

std::string Config::get_string(const std::string& section,
                               const std::string& key,
                               const std::string& def) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return def;
  auto kt = it->second.find(key);
  return kt == it->second.end() ? def : kt->second;
}

std::string Config::require_string(const std::string& section,
                                   const std::string& key) const {
  if (!has(section, key)) {
    throw std::invalid_argument(origin_ + ": missing required key [" + section +
                                "] " + key);
  }
  return get_string(section, key, "");
}

double parse_double_str(const std::string& s, const std::string& context) {
  std::string t = s;
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (t == "inf" || t == "+inf" || t == "clean") {
    return std::numeric_limits<double>::infinity();
  }
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(context + ": cannot parse number `" + s + "`");
  }
}

double Config::get_double(const std::string& section, const std::string& key,
                          double def) const {
  if (!has(section, key)) return def;
  return parse_double_str(get_string(section, key, ""),
                          "[" + section + "] " + key);
}

std::int64_t Config::get_int(const std::string& section, const std::string& key,
                             std::int64_t def) const {
  if (!has(section, key)) return def;
  const std::string s = get_string(section, key, "");
  try {
    std::size_t pos = 0;
    std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("[" + section + "] " + key +
                                ": cannot parse integer `" + s + "`");
  }
}

std::uint64_t Config::get_u64(const std::string& section,
                              const std::string& key,
                              std::uint64_t def) const {
  if (!has(section, key)) return def;
  const std::string s = get_string(section, key, "");
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("[" + section + "] " + key +
                                ": cannot parse unsigned integer `" + s + "`");
  }
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      bool def) const {
  if (!has(section, key)) return def;
  std::string s = get_string(section, key, "");
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("[" + section + "] " + key +
                              ": cannot parse boolean `" + s + "`");
}

std::vector<std::string> Config::get_list(const std::string& section,
                                          const std::string& key,
                                          const std::string& def_csv) const {
  std::string csv = get_string(section, key, def_csv);
  std::vector<std::string> out;
  std::istringstream is(csv);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  sections_[section][key] = value;
}

std::string Config::section_text(const std::string& section) const {
  auto it = sections_.find(section);
  std::ostringstream os;
  if (it != sections_.end()) {
    for (const auto& [k, v] : it->second) {
      os << k << " = " << v << "\n";
    }
  }
  return os.str();
}

void Config::adopt_section(const Config& other, const std::string& from,
                           const std::string& to) {
  auto it = other.sections_.find(from);
  if (it == other.sections_.end()) return;
  for (const auto& [k, v] : it->second) {
    sections_[to][k] = v;
  }
}

void Config::validate_keys(const std::string& section,
                           const std::vector<std::string>& allowed) const {
  auto it = sections_.find(section);
  if (it == sections_.end()) return;
  for (const auto& [k, v] : it->second) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw std::invalid_argument(origin_ + ": unknown key `" + k +
                                  "` in section [" + section + "]");
    }
  }
}

}  // namespace mdt
