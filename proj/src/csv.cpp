#include "dircast/csv.hpp"

#include <cctype>
#include <charconv>
#include <ostream>

#include "dircast/errors.hpp"

namespace dircast::csv {

std::vector<Record> parse(std::string_view text) {
    std::vector<Record> records;
    std::size_t line = 1;
    std::size_t i = 0;
    const std::size_t n = text.size();

    while (i < n) {
        Record rec;
        rec.line = line;
        std::string field;
        bool in_quotes = false;
        bool record_done = false;

        while (i < n && !record_done) {
            const char c = text[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < n && text[i + 1] == '"') {
                        field += '"';
                        i += 2;
                    } else {
                        in_quotes = false;
                        ++i;
                    }
                } else {
                    if (c == '\n') ++line;
                    field += c;
                    ++i;
                }
            } else {
                switch (c) {
                    case '"':
                        if (!field.empty()) {
                            throw ParseError("line " + std::to_string(line) +
                                             ": quote inside unquoted field");
                        }
                        in_quotes = true;
                        ++i;
                        break;
                    case ',':
                        rec.fields.push_back(std::move(field));
                        field.clear();
                        ++i;
                        break;
                    case '\r':
                        ++i;
                        if (i < n && text[i] == '\n') {
                            ++i;
                            ++line;
                            record_done = true;
                        }
                        break;
                    case '\n':
                        ++i;
                        ++line;
                        record_done = true;
                        break;
                    default:
                        field += c;
                        ++i;
                }
            }
        }
        if (in_quotes) {
            throw ParseError("line " + std::to_string(rec.line) +
                             ": unterminated quoted field");
        }
        rec.fields.push_back(std::move(field));
        // A blank line becomes a single empty field; callers reject it with
        // this record's line number. A trailing newline adds no record.
        records.push_back(std::move(rec));
    }
    return records;
}

std::string escape(std::string_view field) {
    bool needs_quotes = false;
    for (char c : field) {
        if (c == ',' || c == '"' || c == '\n' || c == '\r') {
            needs_quotes = true;
            break;
        }
    }
    if (!field.empty() &&
        (std::isspace(static_cast<unsigned char>(field.front())) ||
         std::isspace(static_cast<unsigned char>(field.back())))) {
        needs_quotes = true;
    }
    if (!needs_quotes) return std::string(field);

    std::string out;
    out.reserve(field.size() + 2);
    out += '"';
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream& os, std::span<const std::string> fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) os << ',';
        os << escape(fields[i]);
    }
    os << '\n';
}

std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) {
        throw InternalError("double formatting failed");
    }
    return std::string(buf, ptr);
}

}  // namespace dircast::csv
