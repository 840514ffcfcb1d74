#pragma once

#include <iosfwd>

namespace cmt::cli {

// Exit codes. Each failure prints one diagnostic line to the error stream.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,   // unknown subcommand or flag, bad flag value
  kIo = 3,      // unreadable input or unwritable output
  kSchema = 4,  // malformed file or unsupported schema version
  kDomain = 5,  // inputs readable but rejected (empty score, no EOS, non-finite loss, ...)
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cmt::cli
