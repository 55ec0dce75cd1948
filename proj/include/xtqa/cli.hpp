#pragma once

#include <string>
#include <vector>

namespace xtqa {

// Entry point behind main(); exposed so tests can drive the CLI in-process.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.
int cli_run(const std::vector<std::string>& args);

}  // namespace xtqa
