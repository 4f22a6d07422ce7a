#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "winoforms/gradcore/parameters.hpp"
#include "winoforms/gradcore/tensor.hpp"

namespace winoforms {

// Handle to a node recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
  friend bool operator==(Var, Var) = default;
};

enum class Op : std::uint8_t {
  Constant,
  Leaf,
  Param,
  MatMul,
  MatMulNT,
  Add,
  AddRow,
  Scale,
  LayerNorm,
  Gelu,
  Softmax,
  LogSoftmax,
  Sigmoid,
  Log,
  Clamp,
  GatherRows,
  SliceCols,
  ConcatCols,
  ConcatRows,
  MeanAll,
  MeanRows,
  SumAll,
  Element,
  Dropout,
};

constexpr std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Leaf: return "leaf";
    case Op::Param: return "param";
    case Op::MatMul: return "matmul";
    case Op::MatMulNT: return "matmul_nt";
    case Op::Add: return "add";
    case Op::AddRow: return "add_row";
    case Op::Scale: return "scale";
    case Op::LayerNorm: return "layer_norm";
    case Op::Gelu: return "gelu";
    case Op::Softmax: return "softmax";
    case Op::LogSoftmax: return "log_softmax";
    case Op::Sigmoid: return "sigmoid";
    case Op::Log: return "log";
    case Op::Clamp: return "clamp";
    case Op::GatherRows: return "gather_rows";
    case Op::SliceCols: return "slice_cols";
    case Op::ConcatCols: return "concat_cols";
    case Op::ConcatRows: return "concat_rows";
    case Op::MeanAll: return "mean_all";
    case Op::MeanRows: return "mean_rows";
    case Op::SumAll: return "sum_all";
    case Op::Element: return "element";
    case Op::Dropout: return "dropout";
  }
  return "?";
}

// Reverse-mode tape. Nodes are appended in evaluation order, so the record is
// topologically sorted by construction. Gradients of parameter nodes are
// accumulated straight into Parameter::grad, which lets a caller run several
// tapes (one per example) before a single optimizer step.
template <std::floating_point T>
class Tape {
 public:
  using Mask = std::vector<std::uint8_t>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const noexcept { return nodes_.size(); }
  Op op(Var v) const { return node(v).op; }
  std::span<const std::uint32_t> inputs(Var v) const { return node(v).inputs; }

  const Tensor<T>& value(Var v) const {
    const Node& n = node(v);
    return n.param ? n.param->value : n.value;
  }

  // Gradient of the last backward() target with respect to v. For parameter
  // nodes this is the parameter's accumulated gradient.
  const Tensor<T>& grad(Var v) const {
    const Node& n = node(v);
    if (n.param) return n.param->grad;
    if (n.grad.empty()) throw Error("tape: no gradient recorded for node");
    return n.grad;
  }

  Var constant(Tensor<T> value) { return push(Op::Constant, std::move(value), {}, false); }

  Var leaf(Tensor<T> value) { return push(Op::Leaf, std::move(value), {}, true); }

  Var parameter(Parameter<T>& p) {
    Var v = push(Op::Param, Tensor<T>{}, {}, true);
    nodes_[v.id].param = &p;
    return v;
  }

  void backward(Var loss) {
    const Node& ln = node(loss);
    if (value(loss).size() != 1) {
      throw Error("tape: backward target must be a scalar, got shape " +
                  shape_string(value(loss).shape()));
    }
    if (!ln.requires_grad) return;
    for (auto& n : nodes_) {
      if (!n.param) n.grad = Tensor<T>{};
    }
    if (nodes_[loss.id].param) {
      nodes_[loss.id].param->grad[0] += T{1};
      return;
    }
    grad_ref(loss.id).fill(T{1});
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, static_cast<std::uint32_t>(i));
    }
  }

  // ---- primitive operations ----

  // a[m,k] * b[k,n]
  Var matmul(Var a, Var b) {
    const auto& A = value(a);
    const auto& B = value(b);
    if (A.cols() != B.rows()) {
      throw Error("matmul: inner dimensions differ " + shape_string(A.shape()) +
                  " x " + shape_string(B.shape()));
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor<T> out = Tensor<T>::matrix(m, n);
    kernels::gemm_nn(A.data().data(), B.data().data(), out.data().data(), m, k, n, false);
    return push(Op::MatMul, std::move(out), {a.id, b.id}, any_grad(a, b),
                [m, k, n](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  const auto ia = t.nodes_[self].inputs[0];
                  const auto ib = t.nodes_[self].inputs[1];
                  if (t.nodes_[ia].requires_grad) {
                    kernels::gemm_nt(G.data().data(), t.value_at(ib).data().data(),
                                     t.grad_ref(ia).data().data(), m, n, k, true);
                  }
                  if (t.nodes_[ib].requires_grad) {
                    kernels::gemm_tn(t.value_at(ia).data().data(), G.data().data(),
                                     t.grad_ref(ib).data().data(), k, m, n, true);
                  }
                });
  }

  // a[m,k] * b[n,k]^T
  Var matmul_nt(Var a, Var b) {
    const auto& A = value(a);
    const auto& B = value(b);
    if (A.cols() != B.cols()) {
      throw Error("matmul_nt: inner dimensions differ " + shape_string(A.shape()) +
                  " x " + shape_string(B.shape()) + "^T");
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
    Tensor<T> out = Tensor<T>::matrix(m, n);
    kernels::gemm_nt(A.data().data(), B.data().data(), out.data().data(), m, k, n, false);
    return push(Op::MatMulNT, std::move(out), {a.id, b.id}, any_grad(a, b),
                [m, k, n](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  const auto ia = t.nodes_[self].inputs[0];
                  const auto ib = t.nodes_[self].inputs[1];
                  if (t.nodes_[ia].requires_grad) {
                    kernels::gemm_nn(G.data().data(), t.value_at(ib).data().data(),
                                     t.grad_ref(ia).data().data(), m, n, k, true);
                  }
                  if (t.nodes_[ib].requires_grad) {
                    kernels::gemm_tn(G.data().data(), t.value_at(ia).data().data(),
                                     t.grad_ref(ib).data().data(), n, m, k, true);
                  }
                });
  }

  Var add(Var a, Var b) {
    const auto& A = value(a);
    const auto& B = value(b);
    if (!A.same_shape(B)) {
      throw Error("add: shapes differ " + shape_string(A.shape()) + " vs " +
                  shape_string(B.shape()));
    }
    Tensor<T> out = A;
    auto od = out.data();
    auto bd = B.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
    return push(Op::Add, std::move(out), {a.id, b.id}, any_grad(a, b),
                [](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  for (auto in : t.nodes_[self].inputs) {
                    if (t.nodes_[in].requires_grad) t.accumulate(in, G.data(), T{1});
                  }
                });
  }

  // Adds a [1,n] bias to every row of a [m,n] matrix.
  Var add_row(Var a, Var bias) {
    const auto& A = value(a);
    const auto& Bv = value(bias);
    if (Bv.rows() != 1 || Bv.cols() != A.cols()) {
      throw Error("add_row: bias shape " + shape_string(Bv.shape()) +
                  " incompatible with " + shape_string(A.shape()));
    }
    Tensor<T> out = A;
    const std::size_t m = A.rows(), n = A.cols();
    for (std::size_t r = 0; r < m; ++r) {
      auto row = out.row(r);
      for (std::size_t c = 0; c < n; ++c) row[c] += Bv[c];
    }
    return push(Op::AddRow, std::move(out), {a.id, bias.id}, any_grad(a, bias),
                [m, n](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  const auto ia = t.nodes_[self].inputs[0];
                  const auto ib = t.nodes_[self].inputs[1];
                  if (t.nodes_[ia].requires_grad) t.accumulate(ia, G.data(), T{1});
                  if (t.nodes_[ib].requires_grad) {
                    auto& gb = t.grad_ref(ib);
                    for (std::size_t r = 0; r < m; ++r) {
                      for (std::size_t c = 0; c < n; ++c) gb[c] += G(r, c);
                    }
                  }
                });
  }

  // factor * a + shift, elementwise.
  Var scale(Var a, T factor, T shift = T{0}) {
    Tensor<T> out = value(a);
    for (auto& v : out.data()) v = factor * v + shift;
    return push(Op::Scale, std::move(out), {a.id}, any_grad(a),
                [factor](Tape& t, std::uint32_t self) {
                  t.accumulate(t.nodes_[self].inputs[0], t.nodes_[self].grad.data(), factor);
                });
  }

  // Row-wise normalization followed by the affine map gamma * xhat + beta.
  Var layer_norm(Var x, Var gamma, Var beta, T eps = T(1e-5)) {
    const auto& X = value(x);
    const auto& Gm = value(gamma);
    const auto& Bt = value(beta);
    const std::size_t m = X.rows(), n = X.cols();
    if (Gm.size() != n || Bt.size() != n) {
      throw Error("layer_norm: affine parameters must have " + std::to_string(n) +
                  " entries");
    }
    Tensor<T> out = Tensor<T>::matrix(m, n);
    Tensor<T> xhat = Tensor<T>::matrix(m, n);
    std::vector<T> rstd(m);
    for (std::size_t r = 0; r < m; ++r) {
      auto row = X.row(r);
      T mean{0};
      for (T v : row) mean += v;
      mean /= static_cast<T>(n);
      T var{0};
      for (T v : row) var += (v - mean) * (v - mean);
      var /= static_cast<T>(n);
      rstd[r] = T{1} / std::sqrt(var + eps);
      for (std::size_t c = 0; c < n; ++c) {
        xhat(r, c) = (row[c] - mean) * rstd[r];
        out(r, c) = xhat(r, c) * Gm[c] + Bt[c];
      }
    }
    return push(Op::LayerNorm, std::move(out), {x.id, gamma.id, beta.id},
                any_grad(x, gamma, beta),
                [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t,
                                                                      std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  const auto ix = t.nodes_[self].inputs[0];
                  const auto ig = t.nodes_[self].inputs[1];
                  const auto ib = t.nodes_[self].inputs[2];
                  const auto& Gm = t.value_at(ig);
                  if (t.nodes_[ig].requires_grad) {
                    auto& gg = t.grad_ref(ig);
                    for (std::size_t r = 0; r < m; ++r)
                      for (std::size_t c = 0; c < n; ++c) gg[c] += G(r, c) * xhat(r, c);
                  }
                  if (t.nodes_[ib].requires_grad) {
                    auto& gb = t.grad_ref(ib);
                    for (std::size_t r = 0; r < m; ++r)
                      for (std::size_t c = 0; c < n; ++c) gb[c] += G(r, c);
                  }
                  if (t.nodes_[ix].requires_grad) {
                    auto& gx = t.grad_ref(ix);
                    std::vector<T> dxhat(n);
                    for (std::size_t r = 0; r < m; ++r) {
                      T mean_d{0}, mean_dx{0};
                      for (std::size_t c = 0; c < n; ++c) {
                        dxhat[c] = G(r, c) * Gm[c];
                        mean_d += dxhat[c];
                        mean_dx += dxhat[c] * xhat(r, c);
                      }
                      mean_d /= static_cast<T>(n);
                      mean_dx /= static_cast<T>(n);
                      for (std::size_t c = 0; c < n; ++c) {
                        gx(r, c) += rstd[r] * (dxhat[c] - mean_d - xhat(r, c) * mean_dx);
                      }
                    }
                  }
                });
  }

  // Exact (erf) GELU.
  Var gelu(Var x) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) {
      v = T(0.5) * v * (T{1} + std::erf(v * (T{1} / std::numbers::sqrt2_v<T>)));
    }
    return push(Op::Gelu, std::move(out), {x.id}, any_grad(x),
                [](Tape& t, std::uint32_t self) {
                  const auto ix = t.nodes_[self].inputs[0];
                  const auto& X = t.value_at(ix);
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(ix);
                  const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * (T{1} / std::numbers::sqrt2_v<T>);
                  for (std::size_t i = 0; i < X.size(); ++i) {
                    const T v = X[i];
                    const T cdf = T(0.5) * (T{1} + std::erf(v * (T{1} / std::numbers::sqrt2_v<T>)));
                    const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
                    gx[i] += G[i] * (cdf + v * pdf);
                  }
                });
  }

  // Row-wise softmax. When key_mask is non-empty, columns with mask 0 get
  // probability zero.
  Var softmax(Var x, const Mask& key_mask = {}) {
    const auto& X = value(x);
    const std::size_t m = X.rows(), n = X.cols();
    if (!key_mask.empty() && key_mask.size() != n) {
      throw Error("softmax: mask length does not match row width");
    }
    Tensor<T> out = Tensor<T>::matrix(m, n);
    for (std::size_t r = 0; r < m; ++r) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t c = 0; c < n; ++c)
        if (key_mask.empty() || key_mask[c]) mx = std::max(mx, X(r, c));
      if (!std::isfinite(mx)) throw Error("softmax: row fully masked");
      T sum{0};
      for (std::size_t c = 0; c < n; ++c) {
        const T e = (key_mask.empty() || key_mask[c]) ? std::exp(X(r, c) - mx) : T{0};
        out(r, c) = e;
        sum += e;
      }
      for (std::size_t c = 0; c < n; ++c) out(r, c) /= sum;
    }
    return push(Op::Softmax, std::move(out), {x.id}, any_grad(x),
                [m, n](Tape& t, std::uint32_t self) {
                  const auto& Y = t.nodes_[self].value;
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(t.nodes_[self].inputs[0]);
                  for (std::size_t r = 0; r < m; ++r) {
                    T dot{0};
                    for (std::size_t c = 0; c < n; ++c) dot += G(r, c) * Y(r, c);
                    for (std::size_t c = 0; c < n; ++c) gx(r, c) += Y(r, c) * (G(r, c) - dot);
                  }
                });
  }

  Var log_softmax(Var x) {
    const auto& X = value(x);
    const std::size_t m = X.rows(), n = X.cols();
    Tensor<T> out = Tensor<T>::matrix(m, n);
    for (std::size_t r = 0; r < m; ++r) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t c = 0; c < n; ++c) mx = std::max(mx, X(r, c));
      T sum{0};
      for (std::size_t c = 0; c < n; ++c) sum += std::exp(X(r, c) - mx);
      const T lse = mx + std::log(sum);
      for (std::size_t c = 0; c < n; ++c) out(r, c) = X(r, c) - lse;
    }
    return push(Op::LogSoftmax, std::move(out), {x.id}, any_grad(x),
                [m, n](Tape& t, std::uint32_t self) {
                  const auto& Y = t.nodes_[self].value;
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(t.nodes_[self].inputs[0]);
                  for (std::size_t r = 0; r < m; ++r) {
                    T gsum{0};
                    for (std::size_t c = 0; c < n; ++c) gsum += G(r, c);
                    for (std::size_t c = 0; c < n; ++c)
                      gx(r, c) += G(r, c) - std::exp(Y(r, c)) * gsum;
                  }
                });
  }

  Var sigmoid(Var x) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) {
      v = v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v));
    }
    return push(Op::Sigmoid, std::move(out), {x.id}, any_grad(x),
                [](Tape& t, std::uint32_t self) {
                  const auto& Y = t.nodes_[self].value;
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(t.nodes_[self].inputs[0]);
                  for (std::size_t i = 0; i < Y.size(); ++i) gx[i] += G[i] * Y[i] * (T{1} - Y[i]);
                });
  }

  Var log(Var x) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) {
      if (!(v > T{0})) throw Error("log: non-positive argument");
      v = std::log(v);
    }
    return push(Op::Log, std::move(out), {x.id}, any_grad(x),
                [](Tape& t, std::uint32_t self) {
                  const auto ix = t.nodes_[self].inputs[0];
                  const auto& X = t.value_at(ix);
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(ix);
                  for (std::size_t i = 0; i < X.size(); ++i) gx[i] += G[i] / X[i];
                });
  }

  // Gradient passes where lo <= x <= hi.
  Var clamp(Var x, T lo, T hi) {
    Tensor<T> out = value(x);
    for (auto& v : out.data()) v = std::clamp(v, lo, hi);
    return push(Op::Clamp, std::move(out), {x.id}, any_grad(x),
                [lo, hi](Tape& t, std::uint32_t self) {
                  const auto ix = t.nodes_[self].inputs[0];
                  const auto& X = t.value_at(ix);
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(ix);
                  for (std::size_t i = 0; i < X.size(); ++i)
                    if (X[i] >= lo && X[i] <= hi) gx[i] += G[i];
                });
  }

  // out[r] = x[rows[r]]; used both for embedding lookup and position picking.
  Var gather_rows(Var x, std::span<const std::size_t> rows) {
    const auto& X = value(x);
    const std::size_t n = X.cols();
    Tensor<T> out = Tensor<T>::matrix(rows.size(), n);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] >= X.rows()) {
        throw Error("gather_rows: row " + std::to_string(rows[r]) + " out of range " +
                    std::to_string(X.rows()));
      }
      std::copy_n(X.row(rows[r]).begin(), n, out.row(r).begin());
    }
    return push(Op::GatherRows, std::move(out), {x.id}, any_grad(x),
                [n, idx = std::vector<std::size_t>(rows.begin(), rows.end())](
                    Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(t.nodes_[self].inputs[0]);
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    auto dst = gx.row(idx[r]);
                    auto src = G.row(r);
                    for (std::size_t c = 0; c < n; ++c) dst[c] += src[c];
                  }
                });
  }

  Var slice_cols(Var x, std::size_t start, std::size_t count) {
    const auto& X = value(x);
    const std::size_t m = X.rows(), n = X.cols();
    if (start + count > n) throw Error("slice_cols: range out of bounds");
    Tensor<T> out = Tensor<T>::matrix(m, count);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < count; ++c) out(r, c) = X(r, start + c);
    return push(Op::SliceCols, std::move(out), {x.id}, any_grad(x),
                [m, start, count](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(t.nodes_[self].inputs[0]);
                  for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < count; ++c) gx(r, start + c) += G(r, c);
                });
  }

  Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw Error("concat_cols: no inputs");
    const std::size_t m = value(parts[0]).rows();
    std::size_t n = 0;
    std::vector<std::uint32_t> ids;
    bool req = false;
    for (Var p : parts) {
      if (value(p).rows() != m) throw Error("concat_cols: row counts differ");
      n += value(p).cols();
      ids.push_back(p.id);
      req = req || node(p).requires_grad;
    }
    Tensor<T> out = Tensor<T>::matrix(m, n);
    std::size_t off = 0;
    for (Var p : parts) {
      const auto& P = value(p);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < P.cols(); ++c) out(r, off + c) = P(r, c);
      off += P.cols();
    }
    return push(Op::ConcatCols, std::move(out), std::move(ids), req,
                [m](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  std::size_t off = 0;
                  for (auto in : t.nodes_[self].inputs) {
                    const std::size_t w = t.value_at(in).cols();
                    if (t.nodes_[in].requires_grad) {
                      auto& gx = t.grad_ref(in);
                      for (std::size_t r = 0; r < m; ++r)
                        for (std::size_t c = 0; c < w; ++c) gx(r, c) += G(r, off + c);
                    }
                    off += w;
                  }
                });
  }

  Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw Error("concat_rows: no inputs");
    const std::size_t n = value(parts[0]).cols();
    std::size_t m = 0;
    std::vector<std::uint32_t> ids;
    bool req = false;
    for (Var p : parts) {
      if (value(p).cols() != n) throw Error("concat_rows: column counts differ");
      m += value(p).rows();
      ids.push_back(p.id);
      req = req || node(p).requires_grad;
    }
    std::vector<T> data;
    data.reserve(m * n);
    for (Var p : parts) {
      auto d = value(p).data();
      data.insert(data.end(), d.begin(), d.end());
    }
    return push(Op::ConcatRows, Tensor<T>(Shape{m, n}, std::move(data)), std::move(ids), req,
                [](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  std::size_t off = 0;
                  for (auto in : t.nodes_[self].inputs) {
                    const std::size_t len = t.value_at(in).size();
                    if (t.nodes_[in].requires_grad) {
                      t.accumulate(in, G.data().subspan(off, len), T{1});
                    }
                    off += len;
                  }
                });
  }

  Var sum_all(Var x) {
    T s{0};
    for (T v : value(x).data()) s += v;
    return push(Op::SumAll, Tensor<T>::scalar(s), {x.id}, any_grad(x),
                [](Tape& t, std::uint32_t self) {
                  const T g = t.nodes_[self].grad[0];
                  for (auto& v : t.grad_ref(t.nodes_[self].inputs[0]).data()) v += g;
                });
  }

  Var mean_all(Var x) {
    const auto& X = value(x);
    T s{0};
    for (T v : X.data()) s += v;
    const T inv = T{1} / static_cast<T>(X.size());
    return push(Op::MeanAll, Tensor<T>::scalar(s * inv), {x.id}, any_grad(x),
                [inv](Tape& t, std::uint32_t self) {
                  const T g = t.nodes_[self].grad[0] * inv;
                  for (auto& v : t.grad_ref(t.nodes_[self].inputs[0]).data()) v += g;
                });
  }

  // Column-wise mean over the rows of x: [m,n] -> [1,n].
  Var mean_rows(Var x) {
    const auto& X = value(x);
    const std::size_t m = X.rows(), n = X.cols();
    if (m == 0) throw Error("mean_rows: empty input");
    Tensor<T> out = Tensor<T>::matrix(1, n);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) out[c] += X(r, c);
    const T inv = T{1} / static_cast<T>(m);
    for (auto& v : out.data()) v *= inv;
    return push(Op::MeanRows, std::move(out), {x.id}, any_grad(x),
                [m, n, inv](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(t.nodes_[self].inputs[0]);
                  for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < n; ++c) gx(r, c) += G[c] * inv;
                });
  }

  Var element(Var x, std::size_t r, std::size_t c) {
    const auto& X = value(x);
    if (r >= X.rows() || c >= X.cols()) throw Error("element: index out of range");
    return push(Op::Element, Tensor<T>::scalar(X(r, c)), {x.id}, any_grad(x),
                [r, c](Tape& t, std::uint32_t self) {
                  t.grad_ref(t.nodes_[self].inputs[0])(r, c) += t.nodes_[self].grad[0];
                });
  }

  // Inverted dropout; rate 0 returns x unchanged.
  template <class Rng>
  Var dropout(Var x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw Error("dropout: rate must be below 1");
    const auto& X = value(x);
    std::bernoulli_distribution keep(1.0 - rate);
    const T scale_kept = static_cast<T>(1.0 / (1.0 - rate));
    std::vector<T> mask(X.size());
    for (auto& m : mask) m = keep(rng) ? scale_kept : T{0};
    Tensor<T> out = X;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return push(Op::Dropout, std::move(out), {x.id}, any_grad(x),
                [mask = std::move(mask)](Tape& t, std::uint32_t self) {
                  const auto& G = t.nodes_[self].grad;
                  auto& gx = t.grad_ref(t.nodes_[self].inputs[0]);
                  for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += G[i] * mask[i];
                });
  }

 private:
  struct Node {
    Op op = Op::Constant;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::uint32_t> inputs;
    std::function<void(Tape&, std::uint32_t)> backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) {
      throw Error("tape: dangling node reference " + std::to_string(v.id));
    }
    return nodes_[v.id];
  }

  const Tensor<T>& value_at(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }

  Tensor<T>& grad_ref(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.param) return n.param->grad;
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  void accumulate(std::uint32_t id, std::span<const T> g, T factor) {
    if (!nodes_[id].requires_grad) return;
    auto dst = grad_ref(id).data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += factor * g[i];
  }

  template <class... Vs>
  bool any_grad(Vs... vs) const {
    return (node(vs).requires_grad || ...);
  }

  Var push(Op op, Tensor<T> value, std::vector<std::uint32_t> inputs, bool requires_grad,
           std::function<void(Tape&, std::uint32_t)> backward = {}) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
};

}  // namespace winoforms
