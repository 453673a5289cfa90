#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace refmarket::csv {

// 17 significant digits, so doubles round-trip exactly.
std::string format_double(double x);
std::string format_optional(const std::optional<double>& x);

// Splits a comma-separated line, trimming blanks; blank lines and '#' comments yield {}.
std::vector<std::string> split_fields(const std::string& line);

double parse_double(const std::string& text, int line);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t x);

class Table {
public:
    explicit Table(std::vector<std::string> header);
    void add_row(std::vector<std::string> row);
    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }
    // Comment line first, then header, then rows; LF endings.
    std::string render(const std::string& comment) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace refmarket::csv
