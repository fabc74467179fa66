#include "ucdir/bank.hpp"

#include <algorithm>
#include <string>

#include "ucdir/error.hpp"

namespace ucdir {

void FeatureBank::overwrite(std::span<const std::size_t> indices, const DenseArray& fresh) {
  if (fresh.rows() != indices.size() || fresh.cols() != dim()) {
    throw StructuralError("bank overwrite: got " + fresh.shape().str() + " for " +
                          std::to_string(indices.size()) + " indices of dim " + std::to_string(dim()));
  }
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) {
      throw DataError("bank overwrite: index " + std::to_string(indices[r]) + " missing from bank of " +
                      std::to_string(size()));
    }
    std::copy_n(fresh.row_span(r).begin(), dim(), features.row_span(indices[r]).begin());
  }
}

}  // namespace ucdir
