#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ifkit/gateway.hpp"

namespace ifkit {

/// Exit codes: 0 success, 1 usage error, 2 runtime error.
enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_runtime = 2 };

/// Runs one command. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(const std::vector<std::string>& args);

/// Offline provider used by --mock. Replies deterministically based on which
/// prompt template the request was rendered from.
std::shared_ptr<Provider> make_mock_provider();

}  // namespace ifkit
