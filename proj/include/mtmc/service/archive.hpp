#pragma once

#include <string>
#include <utility>
#include <vector>

namespace mtmc::service {

/// Minimal POSIX ustar writer: regular files only, names < 100 bytes.
std::string make_tar(const std::vector<std::pair<std::string, std::string>>& files);

}  // namespace mtmc::service
