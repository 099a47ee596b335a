#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace knac::csv {

using Row = std::vector<std::string>;

/// Parses RFC-4180 text (quoted fields, doubled quotes, CRLF or LF line
/// endings). A trailing newline does not produce an empty record; blank lines
/// are skipped.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a separator, quote or line break.
std::string escape(std::string_view field);

std::string join(const Row& fields);

std::string read_file(const std::string& path);

}  // namespace knac::csv
