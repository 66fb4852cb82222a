#include "fxbench/env.hpp"

#include <sys/utsname.h>

#include <fstream>
#include <sstream>
#include <thread>

namespace fxbench {

EnvironmentInfo EnvironmentInfo::capture() {
  EnvironmentInfo info;
  info.cpu_model = "unknown";
  info.os_version = "unknown";

  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) != 0) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::size_t begin = colon + 1;
    while (begin < line.size() && line[begin] == ' ') ++begin;
    if (begin < line.size()) info.cpu_model = line.substr(begin);
    break;
  }

  info.core_count = static_cast<int>(std::thread::hardware_concurrency());

  std::ifstream meminfo("/proc/meminfo");
  while (std::getline(meminfo, line)) {
    if (line.rfind("MemTotal:", 0) != 0) continue;
    std::istringstream fields(line.substr(9));
    long kb = 0;
    if (fields >> kb) info.total_ram_mib = kb / 1024;
    break;
  }

  utsname uts{};
  if (uname(&uts) == 0)
    info.os_version = std::string(uts.sysname) + " " + uts.release;
  return info;
}

std::vector<std::string> EnvironmentInfo::comment_lines() const {
  return {
      "cpu: " + cpu_model,
      "cores: " + std::to_string(core_count),
      "ram_mib: " + std::to_string(total_ram_mib),
      "os: " + os_version,
  };
}

}  // namespace fxbench
