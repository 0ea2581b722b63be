#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dircast::csv {

// One parsed record plus the 1-based line it started on (for error messages).
struct Record {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

// RFC-4180 parser: quoted fields, doubled quotes, embedded newlines.
// Accepts both \n and \r\n terminators. Throws ParseError on a stray quote.
std::vector<Record> parse(std::string_view text);

// Quotes a field when it contains a comma, quote, CR/LF, or outer whitespace.
std::string escape(std::string_view field);

void write_row(std::ostream& os, std::span<const std::string> fields);

// Shortest round-trip decimal form of a double (via std::to_chars).
std::string format_double(double value);

}  // namespace dircast::csv
