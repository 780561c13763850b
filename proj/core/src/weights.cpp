#include "dsar/weights.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "dsar/csv.hpp"

namespace dsar {

Matrix row_normalize(const Matrix& w) {
  // Cushion keeps an already-normalized row (whose stored sum may land one
  // ulp above 1) from being rescaled again on reload.
  const double limit = 1.0 + 64.0 * std::numeric_limits<double>::epsilon();
  Matrix out = w;
  for (int i = 0; i < out.rows(); ++i) {
    double norm = out.row(i).cwiseAbs().sum();
    if (norm > limit) out.row(i) /= norm;
  }
  return out;
}

Matrix validate_weight_matrix(Matrix w, const std::string& name) {
  if (w.rows() != w.cols()) throw DataError(name + ": weight matrix must be square");
  if (!w.allFinite()) throw DataError(name + ": weight matrix has non-finite entries");
  bool dirty = false;
  for (int i = 0; i < w.rows(); ++i) {
    if (w(i, i) != 0.0) {
      w(i, i) = 0.0;
      dirty = true;
    }
  }
  if (dirty) warn(name + ": nonzero diagonal entries found; forced to zero");
  return w;
}

Matrix load_weight_matrix(const std::string& path, WeightFormat format, int d, bool normalize) {
  Matrix w = Matrix::Zero(d, d);
  if (format == WeightFormat::DenseCsv) {
    CsvTable table = read_csv(path, /*has_header=*/false);
    if (static_cast<int>(table.rows.size()) != d)
      throw DataError(path + ": expected " + std::to_string(d) + " rows, found " +
                      std::to_string(table.rows.size()));
    for (int i = 0; i < d; ++i) {
      const auto& row = table.rows[static_cast<std::size_t>(i)];
      if (static_cast<int>(row.size()) != d)
        throw DataError(path + ":" + std::to_string(i + 1) + ": expected " + std::to_string(d) +
                        " columns, found " + std::to_string(row.size()));
      for (int j = 0; j < d; ++j)
        w(i, j) = parse_double_cell(row[static_cast<std::size_t>(j)], path,
                                    static_cast<std::size_t>(i + 1));
    }
  } else {
    CsvTable table = read_csv(path, /*has_header=*/false);
    std::map<std::pair<int, int>, std::size_t> seen;
    for (std::size_t n = 0; n < table.rows.size(); ++n) {
      const auto& row = table.rows[n];
      std::size_t line = n + 1;
      if (row.size() != 3)
        throw DataError(path + ":" + std::to_string(line) + ": expected 'i,j,w' triplet");
      long long i = parse_int_cell(row[0], path, line);
      long long j = parse_int_cell(row[1], path, line);
      double value = parse_double_cell(row[2], path, line);
      if (i < 1 || i > d || j < 1 || j > d)
        throw DataError(path + ":" + std::to_string(line) + ": index out of range for d=" +
                        std::to_string(d));
      auto key = std::make_pair(static_cast<int>(i), static_cast<int>(j));
      auto [it, inserted] = seen.emplace(key, line);
      if (!inserted)
        throw DataError(path + ":" + std::to_string(line) + ": duplicate triplet for (" +
                        std::to_string(i) + "," + std::to_string(j) + "), first seen on line " +
                        std::to_string(it->second));
      w(static_cast<int>(i) - 1, static_cast<int>(j) - 1) = value;
    }
  }
  w = validate_weight_matrix(std::move(w), path);
  if (normalize) w = row_normalize(w);
  return w;
}

void save_weight_matrix(const std::string& path, const Matrix& w) {
  CsvWriter out(path);
  std::vector<std::string> cells(static_cast<std::size_t>(w.cols()));
  for (int i = 0; i < w.rows(); ++i) {
    for (int j = 0; j < w.cols(); ++j) cells[static_cast<std::size_t>(j)] = format_double(w(i, j));
    out.write_row(cells);
  }
}

}  // namespace dsar
