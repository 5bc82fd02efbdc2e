#pragma once

namespace rkd::cli {

/// Runs one command. Returns 0 on success, 1 on user error (bad config,
/// flags or paths), 2 on runtime failure (client errors, non-finite loss).
/// Logs go to stderr; results go only to files under --out-dir.
int dispatch(int argc, const char* const* argv);

}  // namespace rkd::cli
