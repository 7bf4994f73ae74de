#ifndef ORTSAE_CLI_HPP
#define ORTSAE_CLI_HPP

namespace ortsae {

/// Command-line entry point; returns the process exit code. Subcommands:
/// gen-data, train, eval, metasae, decompose, compare.
int cli_run(int argc, const char* const* argv);

}  // namespace ortsae

#endif
