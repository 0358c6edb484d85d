#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mdt {

// Sectioned `key = value` configuration. '#' starts a comment, section
// headers look like `[corpus]`. Keys that appear before any section header
// land in the "" section, which is how flat (section-less) files such as a
// standalone corpus config are represented.
class Config {
 public:
  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>");
  static Config parse_file(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& def) const;
  std::string require_string(const std::string& section,
                             const std::string& key) const;
  double get_double(const std::string& section, const std::string& key,
                    double def) const;
  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t def) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t def) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool def) const;
  std::vector<std::string> get_list(const std::string& section,
                                    const std::string& key,
                                    const std::string& def_csv) const;

  void set(const std::string& section, const std::string& key,
           const std::string& value);

  // Canonical text of one section (sorted `key = value` lines); used for
  // stage staleness hashes so that key order in the file does not matter.
  std::string section_text(const std::string& section) const;

  // Copies every key of `from` in `other` into our section `to`.
  void adopt_section(const Config& other, const std::string& from,
                     const std::string& to);

  // Rejects unknown keys so a typo fails loudly instead of being ignored.
  void validate_keys(const std::string& section,
                     const std::vector<std::string>& allowed) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections()
      const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string origin_;
};

double parse_double_str(const std::string& s, const std::string& context);

}  // namespace mdt
