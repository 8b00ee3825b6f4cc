#pragma once

namespace ice {

// Entry point behind the `ice` binary. Parses argv, dispatches to the study
// runners or the single-problem helpers, and maps failures to exit codes:
// 0 success, 1 usage error, 2 runtime error. Diagnostics go to the error
// stream; data goes to files or standard output only.
int cli_main(int argc, const char* const* argv);

}  // namespace ice
