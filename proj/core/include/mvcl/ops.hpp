#pragma once

#include <cstdint>
#include <vector>

#include "mvcl/tensor.hpp"

// Differentiable primitives. Every primitive checks its output for
// NaN/Inf and fails with NonFiniteValue. Elementwise binary ops broadcast
// only over leading dimensions: the smaller operand's shape must be a
// suffix of the larger one's.
namespace mvcl::ad {

/// (..., m, k) x (..., k, n). The right operand is either rank 2 (shared
/// across all leading dims) or has exactly the same leading dims.
template <typename T> Tensor<T> MatMul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> Add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> AddScalar(const Tensor<T>& x, T offset);

template <typename T> Tensor<T> Relu(const Tensor<T>& x);
/// Exact (erf) GELU.
template <typename T> Tensor<T> Gelu(const Tensor<T>& x);
template <typename T> Tensor<T> Exp(const Tensor<T>& x);
template <typename T> Tensor<T> Log(const Tensor<T>& x);
/// log(1 + exp(x)), evaluated stably.
template <typename T> Tensor<T> Softplus(const Tensor<T>& x);

/// Reductions drop the reduced axis.
template <typename T> Tensor<T> Sum(const Tensor<T>& x, int axis);
template <typename T> Tensor<T> Mean(const Tensor<T>& x, int axis);
template <typename T> Tensor<T> SumAll(const Tensor<T>& x);
template <typename T> Tensor<T> MeanAll(const Tensor<T>& x);

/// Swaps the last two axes.
template <typename T> Tensor<T> Transpose(const Tensor<T>& x);
template <typename T> Tensor<T> Permute(const Tensor<T>& x, const std::vector<int>& axes);
template <typename T> Tensor<T> Reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> Concat(const std::vector<Tensor<T>>& xs, int axis);
/// Half-open range [begin, end) along `axis`; the axis is kept.
template <typename T> Tensor<T> Slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end);

template <typename T> Tensor<T> Softmax(const Tensor<T>& x, int axis);
template <typename T> Tensor<T> LogSumExp(const Tensor<T>& x, int axis);
/// Log-sum-exp over the entries of each last-axis row where mask != 0.
/// `mask` has the shape of x; a row with no selected entry is an error.
template <typename T>
Tensor<T> MaskedLogSumExp(const Tensor<T>& x, const std::vector<std::uint8_t>& mask);
/// Normalizes along `axis` with learnable per-position scale and shift.
template <typename T>
Tensor<T> LayerNorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, int axis,
                    T eps = T(1e-5));
/// Unit L2 norm along `axis`; a zero vector is a NonFiniteValue error.
template <typename T> Tensor<T> L2Normalize(const Tensor<T>& x, int axis);

}  // namespace mvcl::ad
