#pragma once

#include <string>

#include "dsar/types.hpp"

namespace dsar {

enum class WeightFormat { DenseCsv, TripletCsv };

// Scales any row whose L1 norm exceeds one down to unit norm; other rows are
// left untouched and the zero diagonal is preserved. The comparison uses a
// 64*eps cushion so that normalize/save/load round-trips are bit-stable.
Matrix row_normalize(const Matrix& w);

// Forces the diagonal to zero (with a warning when nonzero entries are
// dropped) and checks finiteness.
Matrix validate_weight_matrix(Matrix w, const std::string& name);

// Reads a d x d weight matrix. DenseCsv is a headerless d x d table;
// TripletCsv rows are "i,j,w" with 1-based indices. Parse failures carry the
// offending line number. Row normalization is applied unless disabled.
Matrix load_weight_matrix(const std::string& path, WeightFormat format, int d,
                          bool normalize = true);

void save_weight_matrix(const std::string& path, const Matrix& w);

}  // namespace dsar
