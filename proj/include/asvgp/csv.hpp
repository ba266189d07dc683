#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "asvgp/error.hpp"

namespace asvgp::csv {

struct Options {
  char delimiter = ',';
  bool header = false;
};

/// Streaming numeric CSV reader. Every data row must have the same column
/// count; blank lines are skipped. Errors carry 1-based line numbers.
class Reader {
 public:
  Reader(std::istream& in, Options opt) : in_(in), opt_(opt) {}

  /// Reads the next row into `out`; false at end of input.
  bool next(std::vector<double>& out) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (opt_.header && !header_done_) {
        header_done_ = true;
        header_ = split(line);
        continue;
      }
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      parse(line, out);
      if (columns_ == 0) columns_ = out.size();
      if (out.size() != columns_) {
        throw InvalidData("line " + std::to_string(line_no_) + ": expected " + std::to_string(columns_) +
                              " columns, found " + std::to_string(out.size()),
                          row_);
      }
      ++row_;
      return true;
    }
    return false;
  }

  std::size_t line() const noexcept { return line_no_; }
  std::size_t rows() const noexcept { return row_; }
  std::size_t columns() const noexcept { return columns_; }
  const std::vector<std::string>& header() const noexcept { return header_; }

 private:
  std::vector<std::string> split(const std::string& line) const {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(opt_.delimiter, start);
      cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return cells;
  }

  void parse(const std::string& line, std::vector<double>& out) const {
    out.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(opt_.delimiter, start);
      const std::size_t end = pos == std::string::npos ? line.size() : pos;
      std::string_view cell(line.data() + start, end - start);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw InvalidData("line " + std::to_string(line_no_) + ": cannot parse '" + std::string(cell) + "' as a number",
                          row_);
      }
      if (!std::isfinite(v)) {
        throw InvalidData("line " + std::to_string(line_no_) + ": non-finite value in row " + std::to_string(row_),
                          row_);
      }
      out.push_back(v);
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
  }

  std::istream& in_;
  Options opt_;
  std::size_t line_no_ = 0;
  std::size_t row_ = 0;
  std::size_t columns_ = 0;
  bool header_done_ = false;
  std::vector<std::string> header_;
};

/// Whole-file table: inputs row-major, last column as target when `with_target`.
struct Table {
  std::size_t dims = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::size_t size() const noexcept { return dims == 0 ? 0 : x.size() / dims; }
};

inline Table read_table(std::istream& in, Options opt, bool with_target) {
  Reader r(in, opt);
  Table t;
  std::vector<double> row;
  while (r.next(row)) {
    const std::size_t need = with_target ? 2 : 1;
    if (row.size() < need) {
      throw InvalidData("line " + std::to_string(r.line()) + ": need at least " + std::to_string(need) + " columns",
                        r.rows() - 1);
    }
    t.dims = with_target ? row.size() - 1 : row.size();
    t.x.insert(t.x.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(t.dims));
    if (with_target) t.y.push_back(row.back());
  }
  if (r.rows() == 0) throw InvalidData("no data rows");
  return t;
}

/// Shortest round-trip formatting.
inline void write_number(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

}  // namespace asvgp::csv
