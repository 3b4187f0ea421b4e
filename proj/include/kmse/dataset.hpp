#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kmse/errors.hpp"
#include "kmse/linalg.hpp"

namespace kmse {

struct Standardization {
  Vector mean;
  Vector std;                  // population (1/n) convention
  std::vector<bool> constant;  // zero-variance features: centered, not scaled
};

// n x d sample, one observation per row.
struct Dataset {
  Matrix rows;
  std::optional<Standardization> standardization;

  Dataset() = default;
  explicit Dataset(Matrix r) : rows(std::move(r)) {}

  Eigen::Index size() const noexcept { return rows.rows(); }
  Eigen::Index dim() const noexcept { return rows.cols(); }
  Vector point(Eigen::Index i) const { return rows.row(i).transpose(); }

  // Rows with index `skip` removed.
  Dataset without(Eigen::Index skip) const {
    const Eigen::Index n = size();
    Matrix out(n - 1, dim());
    if (skip > 0) out.topRows(skip) = rows.topRows(skip);
    if (skip < n - 1) out.bottomRows(n - 1 - skip) = rows.bottomRows(n - 1 - skip);
    return Dataset(std::move(out));
  }

  Dataset subset(const std::vector<Eigen::Index>& idx) const {
    Matrix out(static_cast<Eigen::Index>(idx.size()), dim());
    for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = rows.row(idx[k]);
    return Dataset(std::move(out));
  }
};

inline Dataset standardize(const Dataset& data) {
  const Eigen::Index n = data.size();
  if (n < 2) throw input_error("standardize: need at least 2 rows, got " + std::to_string(n));
  const Eigen::Index d = data.dim();
  Standardization stats;
  stats.mean = data.rows.colwise().mean().transpose();
  stats.std = Vector(d);
  stats.constant.assign(static_cast<std::size_t>(d), false);
  Matrix out = data.rows.rowwise() - stats.mean.transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(out.col(j).squaredNorm() / static_cast<double>(n));
    stats.std[j] = sd;
    if (sd > 0.0) {
      out.col(j) /= sd;
    } else {
      stats.constant[static_cast<std::size_t>(j)] = true;
    }
  }
  Dataset result(std::move(out));
  result.standardization = std::move(stats);
  return result;
}

// Maps standardized rows back to the original feature scale.
inline Matrix destandardize(const Dataset& data) {
  if (!data.standardization) return data.rows;
  const auto& s = *data.standardization;
  Matrix out = data.rows;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    if (!s.constant[static_cast<std::size_t>(j)]) out.col(j) *= s.std[j];
    out.col(j).array() += s.mean[j];
  }
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_double(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

}  // namespace detail

// Comma-separated numeric rows. A first line with any non-numeric cell is
// treated as a header. Blank lines are skipped.
inline Dataset parse_csv(std::istream& in) {
  std::vector<std::vector<double>> parsed;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto cells = detail::split_commas(body);
    std::vector<double> row;
    row.reserve(cells.size());
    bool numeric = true;
    for (const auto cell : cells) {
      const auto v = detail::parse_double(cell);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (first_content) {
      first_content = false;
      if (!numeric) continue;  // header
    }
    if (!numeric) throw parse_error("non-numeric cell", line_no);
    if (width == 0) {
      width = row.size();
    } else if (row.size() != width) {
      throw parse_error("expected " + std::to_string(width) + " columns, got " +
                            std::to_string(row.size()),
                        line_no);
    }
    parsed.push_back(std::move(row));
  }
  if (parsed.empty()) throw input_error("CSV contains no data rows");
  Matrix m(static_cast<Eigen::Index>(parsed.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < parsed.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parsed[i][j];
  return Dataset(std::move(m));
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  return parse_csv(in);
}

}  // namespace kmse
