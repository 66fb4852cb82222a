#pragma once

#include <string>
#include <vector>

namespace fxbench {

// Host descriptor embedded in every emitted report file.
struct EnvironmentInfo {
  std::string cpu_model;
  int core_count = 0;
  long total_ram_mib = 0;
  std::string os_version;

  // Reads /proc and uname; any field that cannot be determined comes back
  // as "unknown" / 0 rather than failing.
  static EnvironmentInfo capture();

  std::vector<std::string> comment_lines() const;
};

}  // namespace fxbench
