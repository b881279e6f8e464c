#pragma once

#include <iosfwd>

#include "ouentry/config.hpp"

namespace ouentry {

// Exit codes shared by the CLI and the command implementations.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitSolver = 2;
inline constexpr int kExitVerification = 3;

int cmd_classify(const RunConfig& cfg, std::ostream& log);
int cmd_boundaries(const RunConfig& cfg, std::ostream& log);
int cmd_value_surface(const RunConfig& cfg, std::ostream& log);
int cmd_verify(const RunConfig& cfg, std::ostream& log);

}  // namespace ouentry
