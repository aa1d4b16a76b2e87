#pragma once

namespace ballot {

// Exit codes: 0 ok, 1 config or usage error, 2 data or persistence error,
// 3 numerical failure. Diagnostics go to stderr; results only to files.
int cli_main(int argc, const char* const* argv);

}  // namespace ballot
