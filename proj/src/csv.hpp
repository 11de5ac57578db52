#ifndef EMOB_SRC_CSV_HPP
#define EMOB_SRC_CSV_HPP

#include <string>
#include <string_view>
#include <vector>

namespace emob::csv {

std::string_view trim(std::string_view s) noexcept;

// Splits one CSV record. Fields are whitespace-trimmed; double quotes may
// wrap a field containing commas ("" escapes a quote).
std::vector<std::string> split_line(std::string_view line);

// Splits text into lines, dropping '\r' and blank lines. Each entry keeps its
// 1-based physical line number for error messages.
struct Line {
    std::size_t number;
    std::string_view text;
};
std::vector<Line> lines(std::string_view text);

// Quotes a field only if it contains a comma, quote or surrounding space.
std::string escape(std::string_view field);

} // namespace emob::csv

#endif
