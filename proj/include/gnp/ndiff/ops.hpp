#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gnp/ndiff/tape.hpp"

// Differentiable operations. Every op evaluates eagerly and records a
// backward rule on the tape of its first operand. Matrix semantics follow
// Tensor::rows()/cols().

namespace gnp::nd {

// Elementwise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var relu(Var a);
/// log(1 + e^x), evaluated without overflow.
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

// Broadcasting used by the layers.
/// x (r x c) + b (1 x c) added to every row.
Var add_row_vector(Var x, Var b);
/// x (r x c) + b (r x 1) added to every column.
Var add_col_vector(Var x, Var b);
/// Row i of x (r x c) multiplied by v_i, v (r x 1).
Var mul_col_vector(Var x, Var v);
/// Adds d (n x 1) to the diagonal of the square s (n x n).
Var add_diag(Var s, Var d);

// Reductions.
Var sum(Var a);
/// Column means of x (r x c) as a 1 x c row; zeros when r == 0.
Var mean_rows(Var x);

// Shape manipulation.
Var transpose(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
/// Stacks a 1 x c row n times.
Var repeat_rows(Var row, std::size_t n);

// Linear algebra.
Var matmul(Var a, Var b);
/// x W^T + b with x (n x in), W (out x in), b (1 x out) or invalid for no bias.
Var linear(Var x, Var w, Var b);
/// Lower Cholesky factor with the jitter ladder; the jitter is treated as a
/// constant in the backward rule.
Var cholesky(Var s);
/// L^{-1} B for lower-triangular L.
Var solve_lower(Var l, Var b);
/// sum_i log L_ii.
Var sum_log_diag(Var l);
/// Row-wise softmax.
Var softmax_rows(Var x);

// Kernels.
/// K_ij = exp(-0.5 * |g_i - g_j|^2) for the rows g_i of G (M x D).
Var eq_gram(Var g);
/// v v^T * eq_gram(G) + diag(noise) in one pass; v and noise are M x 1.
Var kvv_covariance(Var g, Var v, Var noise);

// 1D convolutions over (channels, length) feature maps. Weights are stored as
// (c_out, c_in * kernel) with tap index fastest; bias is (c_out x 1).
struct ConvGeometry {
  std::size_t kernel = 5;
  std::size_t stride = 1;
  std::size_t padding = 2;
  std::size_t output_padding = 0;  ///< transpose convolutions only
};

/// Output length of a strided cross-correlation.
std::size_t conv_output_length(std::size_t length, const ConvGeometry& g);
/// Output length of a transpose convolution: (L-1)*stride - 2*pad + kernel + output_padding.
std::size_t conv_transpose_output_length(std::size_t length, const ConvGeometry& g);

Var conv1d(Var x, Var w, Var b, const ConvGeometry& geometry);
Var conv_transpose1d(Var x, Var w, Var b, const ConvGeometry& geometry);

}  // namespace gnp::nd
