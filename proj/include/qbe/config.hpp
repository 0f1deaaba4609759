#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qbe::cli {

// Flat key=value configuration: optional UTF-8 file plus command-line
// overrides, overrides winning. Unknown keys are rejected up front.
class RunConfig {
 public:
  static const std::map<std::string, std::string>& defaults();

  static RunConfig load(
      const std::string& config_path,
      const std::vector<std::pair<std::string, std::string>>& overrides);

  bool is_set(const std::string& key) const;  // set beyond the default

  std::string get_string(const std::string& key) const;
  // Named variant for keys that must be non-empty (output/input paths).
  std::string require_path(const std::string& key) const;

  std::uint32_t get_u32(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;

  // Comma-separated u32 list, e.g. "128,512,2048".
  std::vector<std::uint32_t> get_u32_list(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicitly_set_;
};

}  // namespace qbe::cli
