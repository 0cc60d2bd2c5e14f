#pragma once

#include "tripod/config.hpp"

namespace tripod {

// Batch entry points behind the CLI subcommands. Each writes its CSV files
// plus run_manifest.txt under cfg.output_path and throws on any failure;
// partially written files are cleaned up by the CSV writer.
void command_closed(const RunConfig& cfg);
void command_lindblad(const RunConfig& cfg);
void command_mcwf(const RunConfig& cfg, int threads = 1);
void command_phases(const RunConfig& cfg);
void command_fidelity(const RunConfig& cfg, int threads = 1);

}  // namespace tripod
