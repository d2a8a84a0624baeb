#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vpc/verification.hpp"

namespace vpc {

struct ConfigKey {
    std::string name;
    bool required = false;
    std::string doc;  // meaning and default
};
const std::vector<ConfigKey>& config_keys();

// key=value lines, '#' comments, blank lines ignored. Unknown, duplicate, missing or unparsable keys throw
// Error("config error", "<source>:<line>: <key>: ...").
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
RunConfig parse_config(const std::string& path);
// Every key, round-trip exact.
std::string serialize_config(const RunConfig& cfg);

// machine-readable stderr line: error code=<code> message="<text>"
std::string error_line(const std::exception& e);

void write_trajectory_csv(std::ostream& os, const ForwardTrajectory& fwd, int time_stride = 1);
void write_diagnostics_csv(std::ostream& os, const ForwardTrajectory& fwd);
void write_trace_csv(std::ostream& os, const OptimizationTrace& tr);
void write_field_csv(std::ostream& os, const ControlField& B);
ControlField read_field_csv(std::istream& is, const RunConfig& cfg);
void write_field_bin(std::ostream& os, const ControlField& B);
ControlField read_field_bin(std::istream& is, const RunConfig& cfg);
// x1-x2 plane through the grid centre: charge density and |B| at time node k
void write_slice_csv(std::ostream& os, const ForwardTrajectory& fwd, int k);

struct Command {
    std::string name;  // forward | optimize | gradcheck | verify | export-plot
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::string format = "csv";  // csv | bin
    std::string field_path;      // optional control field input
    bool full = false;           // verify: include the optimization runs
};

// Exit codes: 0 success, 1 a required check failed, 2 usage or config error, 3 solver error.
int run_command(const Command& cmd, std::ostream& log, std::ostream& err);

}  // namespace vpc
