#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sbd {

/// Shortest decimal text that round-trips the value ("nan", "inf", "-inf"
/// for non-finite values).
std::string format_number(double v);

/// Splits one CSV line on commas. Double-quoted fields may contain commas and
/// doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view text);

/// Joins fields with commas, quoting where needed.
std::string csv_row(const std::vector<std::string>& fields);

/// Reads a CSV file with a header line. Throws IoError if unreadable and
/// FormatError if a row has a different field count than the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; throws FormatError if absent.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

double parse_double(std::string_view text);

}  // namespace sbd
