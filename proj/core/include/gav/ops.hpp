#pragma once

#include <vector>

#include "gav/tape.hpp"

namespace gav {
namespace ops {

enum class UnaryOp { Exp, Log, Sigmoid, Softplus, Gelu, Negate, Sqrt, Tanh, Abs, Relu };
enum class BinaryOp { Add, Sub, Mul, Div };
enum class ReduceOp { Sum, Mean, Max };

/// Elementwise unary op. Log and Sqrt require strictly positive input and
/// report the offending flat index otherwise.
Var apply_unary(UnaryOp op, const Var& x);

Var exp(const Var& x);
Var log(const Var& x);
Var sigmoid(const Var& x);
Var softplus(const Var& x);
Var gelu(const Var& x);
Var negate(const Var& x);
Var sqrt(const Var& x);
Var tanh(const Var& x);
Var abs(const Var& x);
Var relu(const Var& x);

/// Elementwise binary op with numpy-style broadcasting (extents align from
/// the trailing axis; each pair must match or one must be 1).
Var apply_binary(BinaryOp op, const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add(const Var& a, double b);
Var sub(const Var& a, double b);
Var mul(const Var& a, double b);
Var square(const Var& a);

/// Matrix product. Accepts [m,k]x[k,n]; leading batch dims on `a` (and
/// optionally matching dims on `b`) are flattened and mapped over.
Var matmul(const Var& a, const Var& b);

/// Swap the last two axes.
Var transpose(const Var& a);

Var reshape(const Var& a, Shape s);

/// Contiguous slice along `axis`.
Var slice(const Var& a, int64_t axis, int64_t start, int64_t len);

/// Concatenate along `axis`; all other extents must agree.
Var concat(int64_t axis, const std::vector<Var>& parts);

/// Select rows (axis 0) by index; backward scatter-adds.
Var gather_rows(const Var& a, const std::vector<int64_t>& indices);

/// Reduce along one axis. Max records arg-max indices for gradient routing,
/// ties broken by lowest index. Accumulation runs in flat index order.
Var reduce(ReduceOp op, const Var& x, int64_t axis, bool keepdim = false);
Var sum_all(const Var& x);
Var mean_all(const Var& x);

/// Numerically stable softmax along `axis` (max-subtraction).
Var softmax(const Var& x, int64_t axis);

/// Layer normalization over the last axis: per-row zero mean and unit
/// variance (eps floor under the root), then the gain/bias affine.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

/// x [..., in] * w [in, out] + b [out].
Var linear(const Var& x, const Var& w, const Var& b);

/// Rows of p [N,3] mapped by constant per-row affine matrices [N,3,4].
Var affine_rows(const Var& p, const Tensor& mats);

/// Hamilton product qc (constant, [N,4] wxyz) * r (variable, [N,4]).
Var quat_mul_left(const Tensor& qc, const Var& r);

/// 2-D convolution of x [H,W,Cin] with a constant kernel [K,K,Cin,Cout],
/// stride 1, zero "same" padding. Gradient flows to x only.
Var conv2d_const(const Var& x, const Tensor& kernel);

/// 2x2 average pooling of x [H,W,C]; extents must be even.
Var avg_pool2(const Var& x);

/// Rows scaled to unit L2 norm (composite; last axis).
Var normalize_rows(const Var& x);

}  // namespace ops
}  // namespace gav
