#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace nbloch::io {

// Full-precision formatting: 17 significant digits round-trip any double
// exactly, which keeps regression files stable and resumable.
inline std::string sig17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

inline double parse_double(const std::string& s) {
    // strtod rather than stod: stod throws out_of_range on subnormal input
    // (underflow sets ERANGE even though the value is representable), which
    // would break exact round-trips of tiny stored values
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str())
        throw io_error("csv: malformed numeric field '" + s + "'");
    if (end != s.c_str() + s.size())
        throw io_error("csv: trailing characters in numeric field '" + s + "'");
    if (errno == ERANGE && !std::isfinite(v))
        throw io_error("csv: numeric field out of range '" + s + "'");
    return v;
}

// One CSV cell, already rendered.  Numeric constructors apply the pinned
// formats (17 significant digits for reals, decimal for integers).
struct Cell {
    std::string text;
    Cell(double v) : text(sig17(v)) {}
    Cell(long v) : text(std::to_string(v)) {}
    Cell(long long v) : text(std::to_string(v)) {}
    Cell(unsigned long v) : text(std::to_string(v)) {}
    Cell(unsigned long long v) : text(std::to_string(v)) {}
    Cell(int v) : text(std::to_string(v)) {}
    Cell(bool v) : text(v ? "1" : "0") {}
    Cell(const char* s) : text(s) {}
    Cell(std::string s) : text(std::move(s)) {}
};

// Header: one `#`-prefixed single-line JSON metadata record, then the column
// names.  The metadata line makes every file self-describing without a
// sidecar; it must not contain newlines.
inline void write_csv_header(std::ostream& os, const std::string& metadata_json,
                             const std::vector<std::string>& columns) {
    if (metadata_json.find('\n') != std::string::npos)
        throw io_error("csv: metadata must be a single line");
    os << "# " << metadata_json << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i)
        os << columns[i] << (i + 1 < columns.size() ? "," : "");
    os << '\n';
}

inline void write_csv_row(std::ostream& os, const std::vector<Cell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        os << cells[i].text << (i + 1 < cells.size() ? "," : "");
    os << '\n';
}

struct CsvDocument {
    std::string metadata_json; // empty when the file carries no metadata line
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

// Tolerant reader for resume and round-trip tests: metadata line optional,
// blank lines skipped, every data row must match the column count.
inline CsvDocument read_csv(std::istream& is) {
    CsvDocument doc;
    std::string line;
    bool have_columns = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::size_t start = 1;
            while (start < line.size() && line[start] == ' ') ++start;
            if (!have_columns && doc.metadata_json.empty())
                doc.metadata_json = line.substr(start);
            continue;
        }
        if (!have_columns) {
            doc.columns = detail::split_fields(line);
            have_columns = true;
            continue;
        }
        auto fields = detail::split_fields(line);
        if (fields.size() != doc.columns.size())
            throw io_error("csv: row has " + std::to_string(fields.size()) +
                           " fields, header has " +
                           std::to_string(doc.columns.size()));
        doc.rows.push_back(std::move(fields));
    }
    return doc;
}

inline CsvDocument read_csv_string(const std::string& text) {
    std::istringstream is(text);
    return read_csv(is);
}

} // namespace nbloch::io
