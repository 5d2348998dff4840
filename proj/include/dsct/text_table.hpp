#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dsct {

/// Whitespace-separated tokens of one non-empty line, '#' comments removed.
struct TokenRow {
    std::size_t line = 0;
    std::vector<std::string> tokens;
};

struct NumericRow {
    std::size_t line = 0;
    std::vector<double> values;
};

std::vector<TokenRow> read_token_rows(std::istream& in);

/// Parses a token as a finite double; throws DataError naming source and line.
double parse_number(const std::string& token, std::string_view source, std::size_t line);

/// Rows of exactly `columns` numbers each.
std::vector<NumericRow> read_numeric_rows(std::istream& in, std::string_view source,
                                          std::size_t columns);

} // namespace dsct
