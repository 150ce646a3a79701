#pragma once

#include "partnet/types.hpp"

namespace partnet {

// Row->column assignment; -1 marks unassigned rows (rectangular inputs).
struct Assignment {
  std::vector<int> col_of_row;
  double value = 0.0;  // sum of selected scores
};

// Maximum-weight linear assignment. Rectangular matrices are padded with
// zero-score dummies internally.
Assignment max_assignment(const Matrix& score);

// Rounds a dense coupling to an extreme point of the coupling polytope by
// maximizing the selected mass. Among maximizers, returns the
// lexicographically smallest assignment (lowest row index first, then lowest
// column index).
Assignment round_to_permutation(const Matrix& pi);

}  // namespace partnet
