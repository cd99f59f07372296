#include "meshgrad/block_sparse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace meshgrad {

BlockSparseMatrix::BlockSparseMatrix(int block_dim, std::vector<Index> row_offsets,
                                     std::vector<Index> cols)
    : block_dim_(block_dim), row_offsets_(std::move(row_offsets)), cols_(std::move(cols)) {
  if (block_dim_ < 1) throw std::invalid_argument("block dimension must be positive");
  if (row_offsets_.empty() || row_offsets_.back() != static_cast<Index>(cols_.size())) {
    throw std::invalid_argument("row offsets do not match column count");
  }
  values_.assign(cols_.size() * block_dim_ * block_dim_, 0.0);
}

Index BlockSparseMatrix::find_block(Index i, Index j) const {
  if (i < 0 || i >= block_rows()) return -1;
  const auto first = cols_.begin() + row_offsets_[i];
  const auto last = cols_.begin() + row_offsets_[i + 1];
  const auto it = std::lower_bound(first, last, j);
  return it != last && *it == j ? static_cast<Index>(it - cols_.begin()) : -1;
}

void BlockSparseMatrix::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

Eigen::VectorXd BlockSparseMatrix::multiply(const Eigen::VectorXd& v) const {
  if (v.size() != rows()) throw std::invalid_argument("multiply: dimension mismatch");
  const int n = block_dim_;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows());
  for (Index i = 0; i < block_rows(); ++i) {
    for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      const double* b = values_.data() + static_cast<std::size_t>(k) * n * n;
      const Index j = cols_[k];
      for (int r = 0; r < n; ++r) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c) acc += b[r * n + c] * v[j * n + c];
        out[i * n + r] += acc;
      }
    }
  }
  return out;
}

Eigen::MatrixXd BlockSparseMatrix::to_dense() const {
  const int n = block_dim_;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows(), rows());
  for (Index i = 0; i < block_rows(); ++i) {
    for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      d.block(i * n, cols_[k] * n, n, n) = block(k);
    }
  }
  return d;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> BlockSparseMatrix::to_sparse() const {
  const int n = block_dim_;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(values_.size());
  for (Index i = 0; i < block_rows(); ++i) {
    for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          triplets.emplace_back(i * n + r, cols_[k] * n + c,
                                values_[static_cast<std::size_t>(k) * n * n + r * n + c]);
        }
      }
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> s(rows(), rows());
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

double BlockSparseMatrix::relative_asymmetry() const {
  double max_abs = 0.0;
  double max_diff = 0.0;
  for (Index i = 0; i < block_rows(); ++i) {
    for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      const Index kt = find_block(cols_[k], i);
      if (kt < 0) return INFINITY;
      const auto a = block(k);
      const auto at = block(kt);
      max_abs = std::max(max_abs, a.cwiseAbs().maxCoeff());
      max_diff = std::max(max_diff, (a - at.transpose()).cwiseAbs().maxCoeff());
    }
  }
  return max_abs > 0 ? max_diff / max_abs : 0.0;
}

void write_matrix_market(std::ostream& out, const BlockSparseMatrix& m) {
  const int n = m.block_dim();
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.rows() << ' ' << m.nonzeros() << '\n';
  out << std::setprecision(17);
  const auto& offsets = m.row_offsets();
  const auto& cols = m.cols();
  const auto& values = m.values();
  for (Index i = 0; i < m.block_rows(); ++i) {
    for (int r = 0; r < n; ++r) {
      for (Index k = offsets[i]; k < offsets[i + 1]; ++k) {
        for (int c = 0; c < n; ++c) {
          out << i * n + r + 1 << ' ' << cols[k] * n + c + 1 << ' '
              << values[static_cast<std::size_t>(k) * n * n + r * n + c] << '\n';
        }
      }
    }
  }
}

void write_matrix_market(const std::string& path, const BlockSparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_matrix_market(out, m);
}

Eigen::SparseMatrix<double> read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket matrix coordinate real", 0) != 0) {
    throw std::runtime_error("not a MatrixMarket coordinate file: " + path);
  }
  const bool symmetric = line.find("symmetric") != std::string::npos;
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
  }
  std::istringstream header(line);
  long rows = 0, cols = 0, entries = 0;
  if (!(header >> rows >> cols >> entries)) throw std::runtime_error("bad MatrixMarket size line");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(entries);
  for (long k = 0; k < entries; ++k) {
    long i = 0, j = 0;
    double v = 0;
    if (!(in >> i >> j >> v)) throw std::runtime_error("truncated MatrixMarket file: " + path);
    triplets.emplace_back(i - 1, j - 1, v);
    if (symmetric && i != j) triplets.emplace_back(j - 1, i - 1, v);
  }
  Eigen::SparseMatrix<double> s(rows, cols);
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

void write_vector(const std::string& path, const Eigen::VectorXd& v) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v[i] << '\n';
}

}  // namespace meshgrad
