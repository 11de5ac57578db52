#ifndef EMOB_IO_HPP
#define EMOB_IO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace emob {

// Throws Error{Io} when the file cannot be opened or read.
std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);

} // namespace emob

#endif // EMOB_IO_HPP
