#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace xtqa {

// Flat "key = value" config file; '#' starts a comment. Values are typed at
// the point of use. CLI flags override file entries.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

}  // namespace xtqa
