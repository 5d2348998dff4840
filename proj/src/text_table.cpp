#include "dsct/text_table.hpp"

#include "dsct/error.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

namespace dsct {

std::vector<TokenRow> read_token_rows(std::istream& in)
{
    std::vector<TokenRow> rows;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (const auto hash = text.find('#'); hash != std::string::npos)
            text.erase(hash);
        std::istringstream fields(text);
        TokenRow row{line, {}};
        for (std::string token; fields >> token;)
            row.tokens.push_back(token);
        if (!row.tokens.empty())
            rows.push_back(std::move(row));
    }
    return rows;
}

double parse_number(const std::string& token, std::string_view source, std::size_t line)
{
    double value = 0.0;
    const char* first = token.data();
    const char* last = first + token.size();
    if (!token.empty() && *first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        std::ostringstream msg;
        msg << source << ":" << line << ": malformed number '" << token << "'";
        throw DataError(msg.str());
    }
    return value;
}

std::vector<NumericRow> read_numeric_rows(std::istream& in, std::string_view source,
                                          std::size_t columns)
{
    std::vector<NumericRow> out;
    for (const auto& row : read_token_rows(in)) {
        if (row.tokens.size() != columns) {
            std::ostringstream msg;
            msg << source << ":" << row.line << ": malformed line, expected " << columns
                << " columns";
            throw DataError(msg.str());
        }
        NumericRow parsed{row.line, {}};
        for (const auto& token : row.tokens)
            parsed.values.push_back(parse_number(token, source, row.line));
        out.push_back(std::move(parsed));
    }
    return out;
}

} // namespace dsct
