#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace xnec::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and newlines.
std::vector<Row> parse(std::string_view text);

struct Table {
  Row header;
  std::vector<Row> rows;

  // Index of a header column, throws Errc::validation if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

// Reads a file with a header line. When `required` is non-empty every listed
// column must be present.
Table read_table(const std::filesystem::path& path, const std::vector<std::string>& required = {});
Table parse_table(std::string_view text, const std::vector<std::string>& required = {});

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

double to_double(const std::string& text, std::string_view field);
long to_long(const std::string& text, std::string_view field);

}  // namespace xnec::csv
