#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mepp/state.hpp"

namespace mepp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;
using Vector = Eigen::VectorXd;

/// LU solve; throws ErrorKind::domain when the factorization fails.
Vector solve_sparse(const SparseMatrix& A, const Vector& b, const char* what);

/// Flatten component-major: index = k * n + i.
Vector flatten(const State& s);
State unflatten(const Vector& v, const State& like);

/// Discrete divergence (cells x faces) and gradient (faces x cells) matrices
/// for the homogeneous part of the operators (dirichlet walls held at zero).
SparseMatrix divergence_matrix(const Grid1D& g);
SparseMatrix gradient_matrix(const Grid1D& g);

}  // namespace mepp
