#pragma once

#include <span>
#include <string>
#include <vector>

namespace sddql {

// Compressed sparse row matrix. Column indices are strictly increasing within a row.
struct SparseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_offsets;  // length rows+1
    std::vector<int> col_indices;
    std::vector<double> values;

    int nnz() const { return static_cast<int>(col_indices.size()); }
};

// Incremental triplet builder; entries may arrive in any order, duplicates are summed.
class SparseBuilder {
  public:
    SparseBuilder(int rows, int cols) : rows_(rows), cols_(cols) {}
    void add(int row, int col, double value);
    SparseMatrix build() const;

  private:
    int rows_, cols_;
    std::vector<int> r_, c_;
    std::vector<double> v_;
};

void validate_sparse(const SparseMatrix& m);
SparseMatrix identity(int n, double scale = 1.0);
SparseMatrix explicit_transpose(const SparseMatrix& m);

std::vector<double> spmv(const SparseMatrix& m, std::span<const double> v);
std::vector<double> spmv_transpose(const SparseMatrix& m, std::span<const double> v);

// Matrix Market coordinate text dump, for solver triage.
void dump_matrix_market(const SparseMatrix& m, const std::string& path);

// Forward-difference gradient operators on a width x height row-major grid.
// Rows at the right (cx) / bottom (cy) boundary are all-zero.
struct GradientOperators {
    int width = 0;
    int height = 0;
    SparseMatrix cx;  // N x N, row p: {-1 at p, +1 at p+1} when col(p) < width-1
    SparseMatrix cy;  // N x N, row p: {-1 at p, +1 at p+width} when row(p) < height-1
};

GradientOperators build_gradient_ops(int width, int height);

// w_p = 1 / (|d_p| + epsilon)
std::vector<double> weights_from_gradient(std::span<const double> d, double epsilon);

// s_p = sgn(d_p), with sgn(0) = 0
std::vector<double> signs_from_gradient(std::span<const double> d);

// A = 2I + lambda*(1-alpha)*(Cx' Wx Cx + Cy' Wy Cy). 5-point stencil, SPD.
// For alpha == 1 the result is exactly the diagonal matrix 2I.
SparseMatrix assemble_system(const GradientOperators& ops, std::span<const double> wx,
                             std::span<const double> wy, double lambda, double alpha);

// b = v_g + v_fhat - lambda*(alpha/2)*(Cx' sx + Cy' sy)
std::vector<double> assemble_rhs(std::span<const double> v_g, std::span<const double> v_fhat,
                                 const GradientOperators& ops, std::span<const double> sx,
                                 std::span<const double> sy, double lambda, double alpha);

}  // namespace sddql
