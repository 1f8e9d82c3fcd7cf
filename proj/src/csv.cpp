#include "xnec/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "xnec/error.hpp"

namespace xnec {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::validation: return "validation";
    case Errc::corrupt_video: return "corrupt-video";
    case Errc::empty_telemetry: return "empty-telemetry";
    case Errc::version_mismatch: return "version-mismatch";
    case Errc::unknown_id: return "unknown-id";
    case Errc::arity: return "arity";
    case Errc::undefined: return "undefined";
    case Errc::too_short: return "too-short";
    case Errc::divergence: return "divergence";
    case Errc::not_found: return "not-found";
    case Errc::conflict: return "conflict";
    case Errc::io: return "io";
  }
  return "unknown";
}

namespace csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // A lone empty field is a blank line.
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          quoted = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw Error(Errc::validation, "csv: unterminated quoted field");
  if (!field.empty() || !row.empty() || field_started) end_row();
  return rows;
}

std::size_t Table::column(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(Errc::validation, "csv: missing column '" + std::string(name) + "'", std::string(name));
  return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

Table parse_table(std::string_view text, const std::vector<std::string>& required) {
  auto rows = parse(text);
  if (rows.empty()) throw Error(Errc::validation, "csv: missing header line");
  Table table;
  table.header = std::move(rows.front());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != table.header.size()) {
      throw Error(Errc::validation, "csv: row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                                        " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(rows[i]));
  }
  for (const auto& name : required) table.column(name);
  return table;
}

Table read_table(const std::filesystem::path& path, const std::vector<std::string>& required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_table(buffer.str(), required);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

double to_double(const std::string& text, std::string_view field) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw Error(Errc::validation, "field '" + std::string(field) + "': not a number: '" + text + "'", std::string(field));
  }
  return value;
}

long to_long(const std::string& text, std::string_view field) {
  errno = 0;
  char* end = nullptr;
  const long value = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw Error(Errc::validation, "field '" + std::string(field) + "': not an integer: '" + text + "'", std::string(field));
  }
  return value;
}

}  // namespace csv
}  // namespace xnec
