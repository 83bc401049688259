#ifndef DETFUSE_CLI_H_
#define DETFUSE_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace detfuse {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Runs one subcommand. args excludes the program name.
// Subcommands: merge, fuse, eval, synth, sample-frames, stats, map-categories.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace detfuse

#endif  // DETFUSE_CLI_H_
