#pragma once

namespace aop3d::cli {

// Entry point of the aop3d command. Returns 0 on success, 1 on a domain
// error, 2 on a usage error.
int dispatch(int argc, const char* const* argv);

}  // namespace aop3d::cli
