#include "mvcl/ops.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "mvcl/error.hpp"
#include "mvcl/gemm.hpp"

namespace mvcl::ad {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// Inf and NaN are exactly the values whose exponent bits are all set. An
// integer OR-reduction vectorizes, unlike a floating-point sum.
template <typename T>
bool AllFinite(const std::vector<T>& values) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits kExponent = sizeof(T) == 4 ? Bits(0x7f800000u) : Bits(0x7ff0000000000000ull);
  Bits hit = 0;
  for (const T v : values) {
    const Bits e = std::bit_cast<Bits>(v) & kExponent;
    hit |= Bits(e == kExponent);
  }
  return hit == 0;
}

template <typename T>
Tensor<T> MakeResult(const char* op, Shape shape, std::vector<T> value,
                     std::vector<NodePtr<T>> parents, std::function<void(Node<T>&)> backward) {
  if (!AllFinite(value)) {
    Fail(ErrorCode::kNonFiniteValue, std::string(op) + " produced a non-finite value");
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (GradEnabled()) {
    for (const auto& p : parents) node->requires_grad = node->requires_grad || p->requires_grad;
  }
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

int NormAxis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    Fail(ErrorCode::kShapeMismatch, "axis " + std::to_string(axis) + " out of range for rank " +
                                        std::to_string(rank));
  }
  return a;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit Split(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

bool IsSuffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Shape DropAxis(Shape shape, int axis) {
  shape.erase(shape.begin() + axis);
  return shape;
}

enum class BinaryKind { kAdd, kSub, kMul };

template <typename T>
T Apply(BinaryKind kind, T x, T y) {
  return kind == BinaryKind::kAdd ? x + y : kind == BinaryKind::kSub ? x - y : x * y;
}

// The smaller operand is a suffix of the larger, so it repeats every `period`
// elements of the output.
template <typename T>
Tensor<T> Binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
  const char* name = kind == BinaryKind::kAdd ? "add" : kind == BinaryKind::kSub ? "sub" : "mul";
  const bool a_big = IsSuffix(b.shape(), a.shape());
  if (!a_big && !IsSuffix(a.shape(), b.shape())) {
    Fail(ErrorCode::kShapeMismatch, std::string(name) + ": " + ShapeString(a.shape()) + " vs " +
                                        ShapeString(b.shape()));
  }
  const Shape out_shape = a_big ? a.shape() : b.shape();
  const std::size_t n = NumElements(out_shape);
  const std::size_t na = a.size(), nb = b.size();
  const T* av = a.data().data();
  const T* bv = b.data().data();
  std::vector<T> out(n);
  if (na == nb) {
    for (std::size_t i = 0; i < n; ++i) out[i] = Apply(kind, av[i], bv[i]);
  } else if (na > nb && nb > 0) {
    for (std::size_t r = 0; r < n; r += nb) {
      for (std::size_t j = 0; j < nb; ++j) out[r + j] = Apply(kind, av[r + j], bv[j]);
    }
  } else if (na > 0) {
    for (std::size_t r = 0; r < n; r += na) {
      for (std::size_t j = 0; j < na; ++j) out[r + j] = Apply(kind, av[j], bv[r + j]);
    }
  }
  return MakeResult<T>(
      name, out_shape, std::move(out), {a.node_ptr(), b.node_ptr()}, [kind, n](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        const T* g = self.grad.data();
        // dst[i % nd] += g[i] * (other[i % no] or sign)
        auto accumulate = [&](std::vector<T>& dst, const std::vector<T>& other, T sign) {
          const std::size_t nd = dst.size(), no = other.size();
          const bool mul = kind == BinaryKind::kMul;
          if (nd == 0 || no == 0) return;
          if (nd == n && no == n) {
            if (mul) {
              for (std::size_t i = 0; i < n; ++i) dst[i] += g[i] * other[i];
            } else {
              for (std::size_t i = 0; i < n; ++i) dst[i] += sign * g[i];
            }
          } else if (nd == n) {
            for (std::size_t r = 0; r < n; r += no) {
              if (mul) {
                for (std::size_t j = 0; j < no; ++j) dst[r + j] += g[r + j] * other[j];
              } else {
                for (std::size_t j = 0; j < no; ++j) dst[r + j] += sign * g[r + j];
              }
            }
          } else {
            for (std::size_t r = 0; r < n; r += nd) {
              if (mul) {
                for (std::size_t j = 0; j < nd; ++j) dst[j] += g[r + j] * other[r + j];
              } else {
                for (std::size_t j = 0; j < nd; ++j) dst[j] += sign * g[r + j];
              }
            }
          }
        };
        if (pa.requires_grad) accumulate(pa.EnsureGrad(), pb.value, T(1));
        if (pb.requires_grad) {
          accumulate(pb.EnsureGrad(), pa.value, kind == BinaryKind::kSub ? T(-1) : T(1));
        }
      });
}

/// Elementwise unary op given value and derivative functions of (x, y).
template <typename T, typename F, typename D>
Tensor<T> Unary(const char* name, const Tensor<T>& x, F f, D df) {
  auto xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return MakeResult<T>(name, x.shape(), std::move(out), {x.node_ptr()}, [df](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    auto& gx = px.EnsureGrad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * df(px.value[i], self.value[i]);
  });
}

/// Calls fn(out_flat, in_flat) for every element of a permuted view.
template <typename F>
void ForEachPermuted(const Shape& out_shape, const std::vector<std::size_t>& in_strides, F fn) {
  const std::size_t rank = out_shape.size();
  const std::size_t n = NumElements(out_shape);
  if (n == 0) return;
  if (rank == 0) {
    fn(0, 0);
    return;
  }
  // The last output axis runs as a tight loop; the odometer only advances
  // the outer axes.
  const std::size_t row = out_shape[rank - 1];
  const std::size_t step = in_strides[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t in_off = 0;
  for (std::size_t o = 0; o < n; o += row) {
    for (std::size_t j = 0; j < row; ++j) fn(o + j, in_off + j * step);
    for (std::size_t d = rank - 1; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        in_off += in_strides[d];
        break;
      }
      in_off -= in_strides[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> MatMul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) Fail(ErrorCode::kShapeMismatch, "matmul needs rank >= 2");
  const std::size_t m = a.dim(-2), k = a.dim(-1);
  const std::size_t kb = b.dim(-2), n = b.dim(-1);
  if (k != kb) {
    Fail(ErrorCode::kShapeMismatch, "matmul inner dims: " + ShapeString(a.shape()) + " x " +
                                        ShapeString(b.shape()));
  }
  Shape out_shape = a.shape();
  out_shape.back() = n;

  if (b.rank() == 2) {
    const std::size_t rows = a.size() / k;
    std::vector<T> out(rows * n);
    Gemm<T>(false, false, rows, n, k, T(1), a.data().data(), k, b.data().data(), n, T(0),
            out.data(), n);
    return MakeResult<T>("matmul", out_shape, std::move(out), {a.node_ptr(), b.node_ptr()},
                         [rows, n, k](Node<T>& self) {
                           Node<T>& pa = *self.parents[0];
                           Node<T>& pb = *self.parents[1];
                           if (pa.requires_grad) {
                             Gemm<T>(false, true, rows, k, n, T(1), self.grad.data(), n,
                                     pb.value.data(), n, T(1), pa.EnsureGrad().data(), k);
                           }
                           if (pb.requires_grad) {
                             Gemm<T>(true, false, k, n, rows, T(1), pa.value.data(), k,
                                     self.grad.data(), n, T(1), pb.EnsureGrad().data(), n);
                           }
                         });
  }

  if (a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
    Fail(ErrorCode::kShapeMismatch, "batched matmul leading dims: " + ShapeString(a.shape()) +
                                        " x " + ShapeString(b.shape()));
  }
  const std::size_t batch = a.size() / (m * k);
  std::vector<T> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    Gemm<T>(false, false, m, n, k, T(1), a.data().data() + i * m * k, k,
            b.data().data() + i * k * n, n, T(0), out.data() + i * m * n, n);
  }
  return MakeResult<T>("bmm", out_shape, std::move(out), {a.node_ptr(), b.node_ptr()},
                       [batch, m, n, k](Node<T>& self) {
                         Node<T>& pa = *self.parents[0];
                         Node<T>& pb = *self.parents[1];
                         for (std::size_t i = 0; i < batch; ++i) {
                           const T* g = self.grad.data() + i * m * n;
                           if (pa.requires_grad) {
                             Gemm<T>(false, true, m, k, n, T(1), g, n, pb.value.data() + i * k * n,
                                     n, T(1), pa.EnsureGrad().data() + i * m * k, k);
                           }
                           if (pb.requires_grad) {
                             Gemm<T>(true, false, k, n, m, T(1), pa.value.data() + i * m * k, k, g,
                                     n, T(1), pb.EnsureGrad().data() + i * k * n, n);
                           }
                         }
                       });
}

template <typename T>
Tensor<T> Add(const Tensor<T>& a, const Tensor<T>& b) {
  return Binary(a, b, BinaryKind::kAdd);
}
template <typename T>
Tensor<T> Sub(const Tensor<T>& a, const Tensor<T>& b) {
  return Binary(a, b, BinaryKind::kSub);
}
template <typename T>
Tensor<T> Mul(const Tensor<T>& a, const Tensor<T>& b) {
  return Binary(a, b, BinaryKind::kMul);
}

template <typename T>
Tensor<T> Scale(const Tensor<T>& x, T factor) {
  return Unary<T>("scale", x, [factor](T v) { return v * factor; },
                  [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> AddScalar(const Tensor<T>& x, T offset) {
  return Unary<T>("add_scalar", x, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> Relu(const Tensor<T>& x) {
  return Unary<T>("relu", x, [](T v) { return v > T(0) ? v : T(0); },
                  [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> Gelu(const Tensor<T>& x) {
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return Unary<T>(
      "gelu", x, [inv_sqrt2](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
      [inv_sqrt2, inv_sqrt2pi](T v, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt2pi * std::exp(T(-0.5) * v * v);
      });
}

template <typename T>
Tensor<T> Exp(const Tensor<T>& x) {
  return Unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> Log(const Tensor<T>& x) {
  return Unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> Softplus(const Tensor<T>& x) {
  return Unary<T>(
      "softplus", x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) {
        // logistic sigmoid, branch chosen to avoid overflow
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      });
}

template <typename T>
Tensor<T> Sum(const Tensor<T>& x, int axis) {
  const int ax = NormAxis(axis, x.rank());
  const AxisSplit s = Split(x.shape(), ax);
  auto xv = x.data();
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < s.n; ++j) {
      const T* row = xv.data() + (o * s.n + j) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  return MakeResult<T>("sum", DropAxis(x.shape(), ax), std::move(out), {x.node_ptr()},
                       [s](Node<T>& self) {
                         auto& gx = self.parents[0]->EnsureGrad();
                         for (std::size_t o = 0; o < s.outer; ++o) {
                           for (std::size_t j = 0; j < s.n; ++j) {
                             T* dst = gx.data() + (o * s.n + j) * s.inner;
                             const T* g = self.grad.data() + o * s.inner;
                             for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i];
                           }
                         }
                       });
}

template <typename T>
Tensor<T> Mean(const Tensor<T>& x, int axis) {
  const std::size_t n = x.dim(axis);
  return Scale(Sum(x, axis), T(1) / static_cast<T>(n));
}

template <typename T>
Tensor<T> SumAll(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  return MakeResult<T>("sum_all", {}, {acc}, {x.node_ptr()}, [](Node<T>& self) {
    auto& gx = self.parents[0]->EnsureGrad();
    for (T& g : gx) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> MeanAll(const Tensor<T>& x) {
  return Scale(SumAll(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> Permute(const Tensor<T>& x, const std::vector<int>& axes) {
  const std::size_t rank = x.rank();
  if (axes.size() != rank) Fail(ErrorCode::kShapeMismatch, "permute: axes/rank mismatch");
  std::vector<bool> seen(rank, false);
  std::vector<std::size_t> strides(rank, 1);
  for (std::size_t d = rank; d-- > 1;) strides[d - 1] = strides[d] * x.shape()[d];
  Shape out_shape(rank);
  std::vector<std::size_t> in_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const int a = NormAxis(axes[i], rank);
    if (seen[a]) Fail(ErrorCode::kShapeMismatch, "permute: repeated axis");
    seen[a] = true;
    out_shape[i] = x.shape()[a];
    in_strides[i] = strides[a];
  }
  auto xv = x.data();
  std::vector<T> out(x.size());
  ForEachPermuted(out_shape, in_strides, [&](std::size_t o, std::size_t in) { out[o] = xv[in]; });
  return MakeResult<T>("permute", out_shape, std::move(out), {x.node_ptr()},
                       [out_shape, in_strides](Node<T>& self) {
                         auto& gx = self.parents[0]->EnsureGrad();
                         ForEachPermuted(out_shape, in_strides, [&](std::size_t o, std::size_t in) {
                           gx[in] += self.grad[o];
                         });
                       });
}

template <typename T>
Tensor<T> Transpose(const Tensor<T>& x) {
  if (x.rank() < 2) Fail(ErrorCode::kShapeMismatch, "transpose needs rank >= 2");
  std::vector<int> axes(x.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<int>(i);
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return Permute(x, axes);
}

template <typename T>
Tensor<T> Reshape(const Tensor<T>& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    Fail(ErrorCode::kShapeMismatch, "reshape " + ShapeString(x.shape()) + " -> " + ShapeString(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return MakeResult<T>("reshape", std::move(shape), std::move(out), {x.node_ptr()},
                       [](Node<T>& self) {
                         auto& gx = self.parents[0]->EnsureGrad();
                         for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
                       });
}

template <typename T>
Tensor<T> Concat(const std::vector<Tensor<T>>& xs, int axis) {
  if (xs.empty()) Fail(ErrorCode::kShapeMismatch, "concat of nothing");
  const int ax = NormAxis(axis, xs[0].rank());
  Shape reference = xs[0].shape();
  reference[ax] = 0;
  Shape out_shape = reference;
  std::vector<std::size_t> widths;
  for (const auto& x : xs) {
    Shape probe = x.shape();
    if (probe.size() != reference.size()) Fail(ErrorCode::kShapeMismatch, "concat rank mismatch");
    probe[ax] = 0;
    if (probe != reference) Fail(ErrorCode::kShapeMismatch, "concat shape mismatch");
    out_shape[ax] += x.shape()[ax];
  }
  const AxisSplit s = Split(out_shape, ax);
  std::vector<T> out(NumElements(out_shape));
  std::vector<NodePtr<T>> parents;
  std::size_t offset = 0;
  for (const auto& x : xs) {
    const std::size_t chunk = x.shape()[ax] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(x.data().data() + o * chunk, chunk, out.data() + o * s.n * s.inner + offset);
    }
    widths.push_back(chunk);
    offset += chunk;
    parents.push_back(x.node_ptr());
  }
  return MakeResult<T>("concat", out_shape, std::move(out), std::move(parents),
                       [s, widths](Node<T>& self) {
                         std::size_t offset = 0;
                         for (std::size_t p = 0; p < self.parents.size(); ++p) {
                           Node<T>& px = *self.parents[p];
                           const std::size_t chunk = widths[p];
                           if (px.requires_grad) {
                             auto& gx = px.EnsureGrad();
                             for (std::size_t o = 0; o < s.outer; ++o) {
                               const T* g = self.grad.data() + o * s.n * s.inner + offset;
                               T* dst = gx.data() + o * chunk;
                               for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
                             }
                           }
                           offset += chunk;
                         }
                       });
}

template <typename T>
Tensor<T> Slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end) {
  const int ax = NormAxis(axis, x.rank());
  if (begin >= end || end > x.shape()[ax]) {
    Fail(ErrorCode::kShapeMismatch, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                        ") of axis size " + std::to_string(x.shape()[ax]));
  }
  const AxisSplit s = Split(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = end - begin;
  const std::size_t chunk = (end - begin) * s.inner;
  std::vector<T> out(s.outer * chunk);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data().data() + (o * s.n + begin) * s.inner, chunk, out.data() + o * chunk);
  }
  return MakeResult<T>("slice", out_shape, std::move(out), {x.node_ptr()},
                       [s, begin, chunk](Node<T>& self) {
                         auto& gx = self.parents[0]->EnsureGrad();
                         for (std::size_t o = 0; o < s.outer; ++o) {
                           T* dst = gx.data() + (o * s.n + begin) * s.inner;
                           const T* g = self.grad.data() + o * chunk;
                           for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
                         }
                       });
}

template <typename T>
Tensor<T> Softmax(const Tensor<T>& x, int axis) {
  const int ax = NormAxis(axis, x.rank());
  const AxisSplit s = Split(x.shape(), ax);
  auto xv = x.data();
  std::vector<T> out(x.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      T total = T(0);
      for (std::size_t j = 0; j < s.n; ++j) {
        const T e = std::exp(xv[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= total;
    }
  }
  return MakeResult<T>("softmax", x.shape(), std::move(out), {x.node_ptr()}, [s](Node<T>& self) {
    auto& gx = self.parents[0]->EnsureGrad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.n * s.inner + i;
        T dot = T(0);
        for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t at = base + j * s.inner;
          gx[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> LogSumExp(const Tensor<T>& x, int axis) {
  const int ax = NormAxis(axis, x.rank());
  const AxisSplit s = Split(x.shape(), ax);
  auto xv = x.data();
  std::vector<T> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      T total = T(0);
      for (std::size_t j = 0; j < s.n; ++j) total += std::exp(xv[base + j * s.inner] - mx);
      out[o * s.inner + i] = mx + std::log(total);
    }
  }
  return MakeResult<T>("logsumexp", DropAxis(x.shape(), ax), std::move(out), {x.node_ptr()},
                       [s](Node<T>& self) {
                         Node<T>& px = *self.parents[0];
                         auto& gx = px.EnsureGrad();
                         for (std::size_t o = 0; o < s.outer; ++o) {
                           for (std::size_t i = 0; i < s.inner; ++i) {
                             const T lse = self.value[o * s.inner + i];
                             const T g = self.grad[o * s.inner + i];
                             const std::size_t base = o * s.n * s.inner + i;
                             for (std::size_t j = 0; j < s.n; ++j) {
                               const std::size_t at = base + j * s.inner;
                               gx[at] += g * std::exp(px.value[at] - lse);
                             }
                           }
                         }
                       });
}

template <typename T>
Tensor<T> MaskedLogSumExp(const Tensor<T>& x, const std::vector<std::uint8_t>& mask) {
  if (x.rank() < 1 || mask.size() != x.size()) {
    Fail(ErrorCode::kShapeMismatch, "masked logsumexp: mask size " + std::to_string(mask.size()) +
                                        " vs " + ShapeString(x.shape()));
  }
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.size() / n;
  auto xv = x.data();
  std::vector<T> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[r * n + j]) mx = std::max(mx, xv[r * n + j]);
    }
    if (mx == -std::numeric_limits<T>::infinity()) {
      Fail(ErrorCode::kNonFiniteValue, "masked logsumexp: row " + std::to_string(r) + " selects nothing");
    }
    T total = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[r * n + j]) total += std::exp(xv[r * n + j] - mx);
    }
    out[r] = mx + std::log(total);
  }
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  return MakeResult<T>("masked_logsumexp", out_shape, std::move(out), {x.node_ptr()},
                       [mask, n, rows](Node<T>& self) {
                         Node<T>& px = *self.parents[0];
                         auto& gx = px.EnsureGrad();
                         for (std::size_t r = 0; r < rows; ++r) {
                           const T lse = self.value[r];
                           const T g = self.grad[r];
                           for (std::size_t j = 0; j < n; ++j) {
                             if (mask[r * n + j]) gx[r * n + j] += g * std::exp(px.value[r * n + j] - lse);
                           }
                         }
                       });
}

template <typename T>
Tensor<T> LayerNorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, int axis,
                    T eps) {
  const int ax = NormAxis(axis, x.rank());
  const AxisSplit s = Split(x.shape(), ax);
  if (gamma.size() != s.n || beta.size() != s.n) {
    Fail(ErrorCode::kShapeMismatch, "layernorm scale/shift must have " + std::to_string(s.n) + " entries");
  }
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  std::vector<T> out(x.size());
  std::vector<T> xhat(x.size());
  std::vector<T> rstd(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      T mean = T(0);
      for (std::size_t j = 0; j < s.n; ++j) mean += xv[base + j * s.inner];
      mean /= static_cast<T>(s.n);
      T var = T(0);
      for (std::size_t j = 0; j < s.n; ++j) {
        const T d = xv[base + j * s.inner] - mean;
        var += d * d;
      }
      var /= static_cast<T>(s.n);
      const T r = T(1) / std::sqrt(var + eps);
      rstd[o * s.inner + i] = r;
      for (std::size_t j = 0; j < s.n; ++j) {
        const std::size_t at = base + j * s.inner;
        xhat[at] = (xv[at] - mean) * r;
        out[at] = xhat[at] * gv[j] + bv[j];
      }
    }
  }
  return MakeResult<T>(
      "layernorm", x.shape(), std::move(out), {x.node_ptr(), gamma.node_ptr(), beta.node_ptr()},
      [s, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pg = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        const auto& g = self.grad;
        std::vector<T> dxhat(s.n);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.n * s.inner + i;
            if (pg.requires_grad || pb.requires_grad) {
              auto& gg = pg.EnsureGrad();
              auto& gb = pb.EnsureGrad();
              for (std::size_t j = 0; j < s.n; ++j) {
                const std::size_t at = base + j * s.inner;
                if (pg.requires_grad) gg[j] += g[at] * xhat[at];
                if (pb.requires_grad) gb[j] += g[at];
              }
            }
            if (px.requires_grad) {
              auto& gx = px.EnsureGrad();
              T mean_d = T(0), mean_dx = T(0);
              for (std::size_t j = 0; j < s.n; ++j) {
                const std::size_t at = base + j * s.inner;
                dxhat[j] = g[at] * pg.value[j];
                mean_d += dxhat[j];
                mean_dx += dxhat[j] * xhat[at];
              }
              mean_d /= static_cast<T>(s.n);
              mean_dx /= static_cast<T>(s.n);
              const T r = rstd[o * s.inner + i];
              for (std::size_t j = 0; j < s.n; ++j) {
                const std::size_t at = base + j * s.inner;
                gx[at] += r * (dxhat[j] - mean_d - xhat[at] * mean_dx);
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> L2Normalize(const Tensor<T>& x, int axis) {
  const int ax = NormAxis(axis, x.rank());
  const AxisSplit s = Split(x.shape(), ax);
  auto xv = x.data();
  std::vector<T> out(x.size());
  std::vector<T> norms(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      T sq = T(0);
      for (std::size_t j = 0; j < s.n; ++j) sq += xv[base + j * s.inner] * xv[base + j * s.inner];
      const T norm = std::sqrt(sq);
      if (!(norm > T(0))) Fail(ErrorCode::kNonFiniteValue, "l2_normalize of a zero vector");
      norms[o * s.inner + i] = norm;
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] = xv[base + j * s.inner] / norm;
    }
  }
  return MakeResult<T>("l2_normalize", x.shape(), std::move(out), {x.node_ptr()},
                       [s, norms = std::move(norms)](Node<T>& self) {
                         auto& gx = self.parents[0]->EnsureGrad();
                         const auto& y = self.value;
                         const auto& g = self.grad;
                         for (std::size_t o = 0; o < s.outer; ++o) {
                           for (std::size_t i = 0; i < s.inner; ++i) {
                             const std::size_t base = o * s.n * s.inner + i;
                             T dot = T(0);
                             for (std::size_t j = 0; j < s.n; ++j) {
                               dot += g[base + j * s.inner] * y[base + j * s.inner];
                             }
                             const T inv = T(1) / norms[o * s.inner + i];
                             for (std::size_t j = 0; j < s.n; ++j) {
                               const std::size_t at = base + j * s.inner;
                               gx[at] += (g[at] - y[at] * dot) * inv;
                             }
                           }
                         }
                       });
}

#define MVCL_INSTANTIATE_OPS(T)                                                                \
  template Tensor<T> MatMul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> Add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> Sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> Mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> Scale(const Tensor<T>&, T);                                               \
  template Tensor<T> AddScalar(const Tensor<T>&, T);                                           \
  template Tensor<T> Relu(const Tensor<T>&);                                                   \
  template Tensor<T> Gelu(const Tensor<T>&);                                                   \
  template Tensor<T> Exp(const Tensor<T>&);                                                    \
  template Tensor<T> Log(const Tensor<T>&);                                                    \
  template Tensor<T> Softplus(const Tensor<T>&);                                               \
  template Tensor<T> Sum(const Tensor<T>&, int);                                               \
  template Tensor<T> Mean(const Tensor<T>&, int);                                              \
  template Tensor<T> SumAll(const Tensor<T>&);                                                 \
  template Tensor<T> MeanAll(const Tensor<T>&);                                                \
  template Tensor<T> Transpose(const Tensor<T>&);                                              \
  template Tensor<T> Permute(const Tensor<T>&, const std::vector<int>&);                       \
  template Tensor<T> Reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> Concat(const std::vector<Tensor<T>>&, int);                               \
  template Tensor<T> Slice(const Tensor<T>&, int, std::size_t, std::size_t);                   \
  template Tensor<T> Softmax(const Tensor<T>&, int);                                           \
  template Tensor<T> LogSumExp(const Tensor<T>&, int);                                         \
  template Tensor<T> MaskedLogSumExp(const Tensor<T>&, const std::vector<std::uint8_t>&);      \
  template Tensor<T> LayerNorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, T);  \
  template Tensor<T> L2Normalize(const Tensor<T>&, int);

MVCL_INSTANTIATE_OPS(float)
MVCL_INSTANTIATE_OPS(double)

}  // namespace mvcl::ad
