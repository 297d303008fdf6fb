#ifndef SLAFC_CLI_HPP
#define SLAFC_CLI_HPP

namespace slafc {

// Entry point for the `slafc` binary: gen / features / train / eval.
// Exit codes: 0 success, 1 usage, 2 config error, 3 I/O error,
// 4 data validation failure, 5 training divergence, 6 checkpoint mismatch.
int cli_main(int argc, char** argv);

} // namespace slafc

#endif // SLAFC_CLI_HPP
