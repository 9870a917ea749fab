#include "ivmr/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "ivmr/error.hpp"

namespace ivmr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one line; double quotes group a field and "" escapes a quote.
std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

double parse_number(std::string_view s, std::size_t row, const std::string& column) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::ParseError, "column '" + column + "': cannot parse '" + std::string(s) + "'", row);
  return v;
}

}  // namespace

Dataset read_csv(std::istream& in, const ColumnMapping& mapping) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);
  auto find = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> cols{find(mapping.y), find(mapping.a), find(mapping.z)};
  if (mapping.x.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (std::find(cols.begin(), cols.begin() + 3, j) == cols.begin() + 3) cols.push_back(j);
  } else {
    for (const auto& name : mapping.x) cols.push_back(find(name));
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const std::size_t row = rows.size();
    const auto fields = split_line(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::ParseError,
                  "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()), row);
    std::vector<double> r(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) r[k] = parse_number(fields[cols[k]], row, header[cols[k]]);
    rows.push_back(std::move(r));
  }
  return validate_dataset(rows, ColumnSchema::leading(cols.size() - 3));
}

Dataset load_csv(const std::string& path, const ColumnMapping& mapping) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_csv(f, mapping);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "y,a,z";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",x" << j + 1;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    put(data.y(i));
    out << ',' << data.a(i) << ',' << data.z(i);
    for (std::size_t j = 0; j < data.dim(); ++j) {
      out << ',';
      put(data.x(i, j));
    }
    out << '\n';
  }
}

void export_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  write_dataset_csv(f, data);
  if (!f) throw Error(ErrorCode::IoError, "write to '" + path + "' failed");
}

}  // namespace ivmr
