#ifndef MFC_CLI_HPP
#define MFC_CLI_HPP

#include <iosfwd>

namespace mfc {

inline constexpr const char* kToolVersion = "0.1.0";

// Runs one subcommand. Returns 0 on success, 1 on domain errors (divergence,
// failed checks, I/O) and 2 on configuration or usage errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfc

#endif  // MFC_CLI_HPP
