// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace llambert::csv {

/// RFC 4180 quoting: fields containing comma, quote, CR or LF are quoted.
std::string format_row(const std::vector<std::string>& fields);

/// Parses quoted fields (including embedded newlines). Throws kData on an
/// unterminated quote.
std::vector<std::vector<std::string>> parse(std::string_view text);

}  // namespace llambert::csv
