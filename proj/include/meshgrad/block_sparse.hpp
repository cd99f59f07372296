#pragma once

#include "meshgrad/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <string>
#include <vector>

namespace meshgrad {

/// Symmetric matrix of dense n x n blocks in CSR layout over vertex pairs.
///
/// Block rows are vertices; columns are sorted within a row and both (i, j)
/// and (j, i) are stored. Block values are row-major and contiguous, so block
/// k occupies values()[k * n * n, (k + 1) * n * n).
class BlockSparseMatrix {
 public:
  BlockSparseMatrix() = default;
  /// `row_offsets` has block_rows + 1 entries; `cols` must be sorted per row.
  BlockSparseMatrix(int block_dim, std::vector<Index> row_offsets, std::vector<Index> cols);

  int block_dim() const { return block_dim_; }
  Index block_rows() const { return static_cast<Index>(row_offsets_.size()) - 1; }
  Index rows() const { return block_rows() * block_dim_; }
  Index num_blocks() const { return static_cast<Index>(cols_.size()); }
  std::size_t nonzeros() const { return values_.size(); }
  bool empty() const { return cols_.empty(); }

  const std::vector<Index>& row_offsets() const { return row_offsets_; }
  const std::vector<Index>& cols() const { return cols_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  /// Block slot of (i, j), or -1 when the pair is outside the pattern.
  Index find_block(Index i, Index j) const;
  bool contains(Index i, Index j) const { return find_block(i, j) >= 0; }

  using BlockMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  BlockMap block(Index slot) const {
    return BlockMap(values_.data() + static_cast<std::size_t>(slot) * block_dim_ * block_dim_,
                    block_dim_, block_dim_);
  }

  void set_zero();
  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd to_dense() const;
  Eigen::SparseMatrix<double, Eigen::RowMajor> to_sparse() const;

  /// max |A(i, j) - A(j, i)| over stored entries, divided by max |A|.
  double relative_asymmetry() const;

 private:
  int block_dim_ = 1;
  std::vector<Index> row_offsets_{0};
  std::vector<Index> cols_;
  std::vector<double> values_;
};

/// MatrixMarket coordinate output, 1-indexed, every stored scalar written
/// explicitly with 17 significant digits.
void write_matrix_market(std::ostream& out, const BlockSparseMatrix& m);
void write_matrix_market(const std::string& path, const BlockSparseMatrix& m);
Eigen::SparseMatrix<double> read_matrix_market(const std::string& path);

/// Plain text, one value per line, 17 significant digits.
void write_vector(const std::string& path, const Eigen::VectorXd& v);

}  // namespace meshgrad
