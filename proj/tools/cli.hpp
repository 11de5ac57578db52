#ifndef EMOB_TOOLS_CLI_HPP
#define EMOB_TOOLS_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "emob/telemetry.hpp"

namespace emob::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Entry point of the `emob` binary; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

struct PlotFiles {
    std::string svg;
    std::string csv;
    bool has_soc = false;
};

// Speed (left axis) and soc (right axis) against elapsed seconds. Throws
// InvalidTrace for an empty trace and MissingSoc for an e-scooter trace
// without soc; e-bike traces without soc give a speed-only plot.
PlotFiles render_trip_plot(const TripTrace& trace);

} // namespace emob::cli

#endif
