#include "gav/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gav {
namespace ops {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// ---- broadcasting helpers ----

Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (size_t i = 0; i < r; ++i) {
    int64_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    int64_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1)
      throw Error("incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    out[i] = std::max(ea, eb);
  }
  return out;
}

// Row-major strides of `s` as seen from broadcast shape `out` (0 where
// the extent is broadcast).
std::vector<int64_t> strides_for(const Shape& s, const Shape& out) {
  std::vector<int64_t> full(s.size());
  int64_t acc = 1;
  for (size_t i = s.size(); i-- > 0;) {
    full[i] = acc;
    acc *= s[i];
  }
  std::vector<int64_t> st(out.size(), 0);
  size_t off = out.size() - s.size();
  for (size_t i = 0; i < s.size(); ++i)
    st[off + i] = (s[i] == 1 && out[off + i] != 1) ? 0 : full[i];
  return st;
}

template <class F>
void for_broadcast(const Shape& out, const Shape& sa, const Shape& sb, F&& f) {
  auto sta = strides_for(sa, out);
  auto stb = strides_for(sb, out);
  int64_t n = shape_numel(out);
  size_t r = out.size();
  std::vector<int64_t> idx(r, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t flat = 0; flat < n; ++flat) {
    f(flat, ia, ib);
    for (size_t d = r; d-- > 0;) {
      idx[d]++;
      ia += sta[d];
      ib += stb[d];
      if (idx[d] < out[d]) break;
      ia -= sta[d] * out[d];
      ib -= stb[d] * out[d];
      idx[d] = 0;
    }
  }
}

// Sum gradient `g` (broadcast shape) down to `target` shape.
Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor out(target);
  auto st = strides_for(target, g.shape());
  int64_t n = g.size();
  size_t r = g.shape().size();
  std::vector<int64_t> idx(r, 0);
  int64_t it = 0;
  for (int64_t flat = 0; flat < n; ++flat) {
    out[it] += g[flat];
    for (size_t d = r; d-- > 0;) {
      idx[d]++;
      it += st[d];
      if (idx[d] < g.shape()[d]) break;
      it -= st[d] * g.shape()[d];
      idx[d] = 0;
    }
  }
  return out;
}

double stable_sigmoid(double v) {
  if (v >= 0) {
    double e = std::exp(-v);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(v);
  return e / (1.0 + e);
}

double stable_softplus(double v) {
  return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
}

}  // namespace

// ---- unary ----

Var apply_unary(UnaryOp op, const Var& x) {
  const Tensor& xv = x.value();
  xv.check_finite("apply_unary input");
  if (op == UnaryOp::Log || op == UnaryOp::Sqrt) {
    for (int64_t i = 0; i < xv.size(); ++i)
      if (xv[i] <= 0.0)
        throw Error(std::string(op == UnaryOp::Log ? "log" : "sqrt") +
                    ": non-positive input at flat index " + std::to_string(i));
  }
  Tensor y(xv.shape());
  for (int64_t i = 0; i < xv.size(); ++i) {
    double v = xv[i];
    switch (op) {
      case UnaryOp::Exp: y[i] = std::exp(v); break;
      case UnaryOp::Log: y[i] = std::log(v); break;
      case UnaryOp::Sigmoid: y[i] = stable_sigmoid(v); break;
      case UnaryOp::Softplus: y[i] = stable_softplus(v); break;
      case UnaryOp::Gelu: y[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); break;
      case UnaryOp::Negate: y[i] = -v; break;
      case UnaryOp::Sqrt: y[i] = std::sqrt(v); break;
      case UnaryOp::Tanh: y[i] = std::tanh(v); break;
      case UnaryOp::Abs: y[i] = std::abs(v); break;
      case UnaryOp::Relu: y[i] = v > 0.0 ? v : 0.0; break;
    }
  }
  Tape* tp = common_tape({&x});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(y.shape());
  Var out = tp->wrap(std::move(y), oid);
  auto xs = x.val;
  auto ys = out.val;
  int64_t xid = x.id;
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g) return;
    Tensor gx(xs->shape());
    for (int64_t i = 0; i < gx.size(); ++i) {
      double v = (*xs)[i], w = (*ys)[i], d = 0;
      switch (op) {
        case UnaryOp::Exp: d = w; break;
        case UnaryOp::Log: d = 1.0 / v; break;
        case UnaryOp::Sigmoid: d = w * (1.0 - w); break;
        case UnaryOp::Softplus: d = stable_sigmoid(v); break;
        case UnaryOp::Gelu:
          d = 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
              v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
          break;
        case UnaryOp::Negate: d = -1.0; break;
        case UnaryOp::Sqrt: d = 0.5 / w; break;
        case UnaryOp::Tanh: d = 1.0 - w * w; break;
        case UnaryOp::Abs: d = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); break;
        case UnaryOp::Relu: d = v > 0 ? 1.0 : 0.0; break;
      }
      gx[i] = (*g)[i] * d;
    }
    t.accum(xid, gx);
  });
  return out;
}

Var exp(const Var& x) { return apply_unary(UnaryOp::Exp, x); }
Var log(const Var& x) { return apply_unary(UnaryOp::Log, x); }
Var sigmoid(const Var& x) { return apply_unary(UnaryOp::Sigmoid, x); }
Var softplus(const Var& x) { return apply_unary(UnaryOp::Softplus, x); }
Var gelu(const Var& x) { return apply_unary(UnaryOp::Gelu, x); }
Var negate(const Var& x) { return apply_unary(UnaryOp::Negate, x); }
Var sqrt(const Var& x) { return apply_unary(UnaryOp::Sqrt, x); }
Var tanh(const Var& x) { return apply_unary(UnaryOp::Tanh, x); }
Var abs(const Var& x) { return apply_unary(UnaryOp::Abs, x); }
Var relu(const Var& x) { return apply_unary(UnaryOp::Relu, x); }

// ---- binary ----

Var apply_binary(BinaryOp op, const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape oshape = broadcast_shape(av.shape(), bv.shape());
  if (op == BinaryOp::Div) {
    for (int64_t i = 0; i < bv.size(); ++i)
      if (bv[i] == 0.0)
        throw Error("division by zero at flat index " + std::to_string(i));
  }
  Tensor y(oshape);
  if (av.shape() == bv.shape()) {
    const double* pa = av.data();
    const double* pb = bv.data();
    double* py = y.data();
    int64_t n = y.size();
    switch (op) {
      case BinaryOp::Add: for (int64_t i = 0; i < n; ++i) py[i] = pa[i] + pb[i]; break;
      case BinaryOp::Sub: for (int64_t i = 0; i < n; ++i) py[i] = pa[i] - pb[i]; break;
      case BinaryOp::Mul: for (int64_t i = 0; i < n; ++i) py[i] = pa[i] * pb[i]; break;
      case BinaryOp::Div: for (int64_t i = 0; i < n; ++i) py[i] = pa[i] / pb[i]; break;
    }
  } else {
    for_broadcast(oshape, av.shape(), bv.shape(), [&](int64_t o, int64_t ia, int64_t ib) {
      switch (op) {
        case BinaryOp::Add: y[o] = av[ia] + bv[ib]; break;
        case BinaryOp::Sub: y[o] = av[ia] - bv[ib]; break;
        case BinaryOp::Mul: y[o] = av[ia] * bv[ib]; break;
        case BinaryOp::Div: y[o] = av[ia] / bv[ib]; break;
      }
    });
  }
  Tape* tp = common_tape({&a, &b});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(oshape);
  Var out = tp->wrap(std::move(y), oid);
  auto as = a.val, bs = b.val;
  int64_t aid = a.id, bid = b.id;
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g) return;
    const Shape& os = g->shape();
    if (aid >= 0) {
      Tensor ga(os);
      switch (op) {
        case BinaryOp::Add:
        case BinaryOp::Sub:
          ga = *g;
          break;
        case BinaryOp::Mul:
          for_broadcast(os, as->shape(), bs->shape(),
                        [&](int64_t o, int64_t, int64_t ib) { ga[o] = (*g)[o] * (*bs)[ib]; });
          break;
        case BinaryOp::Div:
          for_broadcast(os, as->shape(), bs->shape(),
                        [&](int64_t o, int64_t, int64_t ib) { ga[o] = (*g)[o] / (*bs)[ib]; });
          break;
      }
      t.accum(aid, reduce_to(ga, as->shape()));
    }
    if (bid >= 0) {
      Tensor gb(os);
      switch (op) {
        case BinaryOp::Add:
          gb = *g;
          break;
        case BinaryOp::Sub:
          for (int64_t i = 0; i < gb.size(); ++i) gb[i] = -(*g)[i];
          break;
        case BinaryOp::Mul:
          for_broadcast(os, as->shape(), bs->shape(),
                        [&](int64_t o, int64_t ia, int64_t) { gb[o] = (*g)[o] * (*as)[ia]; });
          break;
        case BinaryOp::Div:
          for_broadcast(os, as->shape(), bs->shape(), [&](int64_t o, int64_t ia, int64_t ib) {
            gb[o] = -(*g)[o] * (*as)[ia] / ((*bs)[ib] * (*bs)[ib]);
          });
          break;
      }
      t.accum(bid, reduce_to(gb, bs->shape()));
    }
  });
  return out;
}

Var add(const Var& a, const Var& b) { return apply_binary(BinaryOp::Add, a, b); }
Var sub(const Var& a, const Var& b) { return apply_binary(BinaryOp::Sub, a, b); }
Var mul(const Var& a, const Var& b) { return apply_binary(BinaryOp::Mul, a, b); }
Var div(const Var& a, const Var& b) { return apply_binary(BinaryOp::Div, a, b); }
Var add(const Var& a, double b) { return add(a, constant(b)); }
Var sub(const Var& a, double b) { return sub(a, constant(b)); }
Var mul(const Var& a, double b) { return mul(a, constant(b)); }
Var square(const Var& a) { return mul(a, a); }

// ---- matmul ----

namespace {

void mm_kernel(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  // c must be zero-initialized; i-k-j order for row locality.
#pragma omp parallel for if (m * n * k > (1 << 15)) schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t l = 0; l < k; ++l) {
      double av = a[i * k + l];
      if (av == 0.0) continue;
      const double* brow = b + l * n;
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_at_b(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  // c[k x n] += a[m x k]^T * b[m x n]
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t l = 0; l < k; ++l) {
      double av = a[i * k + l];
      if (av == 0.0) continue;
      const double* brow = b + i * n;
      double* crow = c + l * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void mm_a_bt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  // c[m x k] += a[m x n] * b[k x n]^T
#pragma omp parallel for if (m * n * k > (1 << 15)) schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t l = 0; l < k; ++l) {
      const double* arow = a + i * n;
      const double* brow = b + l * n;
      double s = 0;
      for (int64_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      c[i * k + l] += s;
    }
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 2 || bv.rank() < 2)
    throw Error("matmul: operands must have rank >= 2");
  int64_t m = av.shape()[av.rank() - 2];
  int64_t k = av.shape()[av.rank() - 1];
  int64_t kb = bv.shape()[bv.rank() - 2];
  int64_t n = bv.shape()[bv.rank() - 1];
  if (k != kb)
    throw Error("matmul: inner extents disagree, " + shape_str(av.shape()) +
                " x " + shape_str(bv.shape()));
  int64_t batch = 1;
  Shape oshape;
  for (int64_t i = 0; i + 2 < av.rank(); ++i) {
    batch *= av.shape()[i];
    oshape.push_back(av.shape()[i]);
  }
  bool b_batched = bv.rank() > 2;
  if (b_batched) {
    Shape lead_a(av.shape().begin(), av.shape().end() - 2);
    Shape lead_b(bv.shape().begin(), bv.shape().end() - 2);
    if (lead_a != lead_b)
      throw Error("matmul: batch extents disagree, " + shape_str(av.shape()) +
                  " x " + shape_str(bv.shape()));
  }
  oshape.push_back(m);
  oshape.push_back(n);

  Tensor y(oshape);
  for (int64_t bi = 0; bi < batch; ++bi) {
    mm_kernel(av.data() + bi * m * k, bv.data() + (b_batched ? bi * k * n : 0),
              y.data() + bi * m * n, m, k, n);
  }
  Tape* tp = common_tape({&a, &b});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(oshape);
  Var out = tp->wrap(std::move(y), oid);
  auto as = a.val, bs = b.val;
  int64_t aid = a.id, bid = b.id;
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g) return;
    if (aid >= 0) {
      Tensor ga(as->shape());
      for (int64_t bi = 0; bi < batch; ++bi)
        mm_a_bt(g->data() + bi * m * n, bs->data() + (b_batched ? bi * k * n : 0),
                ga.data() + bi * m * k, m, k, n);
      t.accum(aid, ga);
    }
    if (bid >= 0) {
      Tensor gb(bs->shape());
      for (int64_t bi = 0; bi < batch; ++bi)
        mm_at_b(as->data() + bi * m * k, g->data() + bi * m * n,
                gb.data() + (b_batched ? bi * k * n : 0), m, k, n);
      t.accum(bid, gb);
    }
  });
  return out;
}

Var transpose(const Var& a) {
  const Tensor& av = a.value();
  if (av.rank() < 2) throw Error("transpose: rank must be >= 2");
  Shape os = av.shape();
  std::swap(os[os.size() - 1], os[os.size() - 2]);
  int64_t r = av.shape()[av.rank() - 2];
  int64_t c = av.shape()[av.rank() - 1];
  int64_t batch = av.size() / (r * c);
  auto tr = [&](const Tensor& src, Tensor& dst, int64_t rr, int64_t cc) {
    for (int64_t bi = 0; bi < batch; ++bi) {
      const double* s = src.data() + bi * rr * cc;
      double* d = dst.data() + bi * rr * cc;
      for (int64_t i = 0; i < rr; ++i)
        for (int64_t j = 0; j < cc; ++j) d[j * rr + i] = s[i * cc + j];
    }
  };
  Tensor y(os);
  tr(av, y, r, c);
  Tape* tp = common_tape({&a});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(os);
  Var out = tp->wrap(std::move(y), oid);
  int64_t aid = a.id;
  Shape ashape = av.shape();
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || aid < 0) return;
    Tensor ga(ashape);
    for (int64_t bi = 0; bi < batch; ++bi) {
      const double* s = g->data() + bi * r * c;
      double* d = ga.data() + bi * r * c;
      for (int64_t i = 0; i < c; ++i)
        for (int64_t j = 0; j < r; ++j) d[j * c + i] = s[i * r + j];
    }
    t.accum(aid, ga);
  });
  return out;
}

Var reshape(const Var& a, Shape s) {
  Tensor y = a.value().reshaped(s);
  Tape* tp = common_tape({&a});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(s);
  Var out = tp->wrap(std::move(y), oid);
  int64_t aid = a.id;
  Shape ashape = a.value().shape();
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || aid < 0) return;
    t.accum(aid, g->reshaped(ashape));
  });
  return out;
}

namespace {
void axis_split(const Shape& s, int64_t axis, int64_t& outer, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}
int64_t norm_axis(int64_t axis, int64_t rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw Error("axis out of range");
  return axis;
}
}  // namespace

Var slice(const Var& a, int64_t axis, int64_t start, int64_t len) {
  const Tensor& av = a.value();
  axis = norm_axis(axis, av.rank());
  int64_t e = av.shape()[axis];
  if (start < 0 || len < 0 || start + len > e) throw Error("slice out of range");
  Shape os = av.shape();
  os[axis] = len;
  int64_t outer, inner;
  axis_split(av.shape(), axis, outer, inner);
  Tensor y(os);
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(y.data() + o * len * inner, av.data() + (o * e + start) * inner,
                sizeof(double) * len * inner);
  Tape* tp = common_tape({&a});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(os);
  Var out = tp->wrap(std::move(y), oid);
  int64_t aid = a.id;
  Shape ashape = av.shape();
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || aid < 0) return;
    Tensor ga(ashape);
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(ga.data() + (o * e + start) * inner, g->data() + o * len * inner,
                  sizeof(double) * len * inner);
    t.accum(aid, ga);
  });
  return out;
}

Var concat(int64_t axis, const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat: no inputs");
  const Shape base = parts[0].value().shape();
  axis = norm_axis(axis, static_cast<int64_t>(base.size()));
  Shape os = base;
  int64_t total = 0;
  for (const Var& p : parts) {
    Shape s = p.value().shape();
    if (s.size() != base.size()) throw Error("concat: rank mismatch");
    for (size_t i = 0; i < s.size(); ++i)
      if (static_cast<int64_t>(i) != axis && s[i] != base[i])
        throw Error("concat: extent mismatch off the concat axis");
    total += s[axis];
  }
  os[axis] = total;
  int64_t outer, inner;
  axis_split(os, axis, outer, inner);
  Tensor y(os);
  int64_t off = 0;
  for (const Var& p : parts) {
    int64_t e = p.value().shape()[axis];
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(y.data() + (o * total + off) * inner,
                  p.value().data() + o * e * inner, sizeof(double) * e * inner);
    off += e;
  }
  Tape* tp = nullptr;
  for (const Var& p : parts) {
    if (!p.is_const()) {
      if (tp && p.tape != tp) throw Error("tape: inputs from different tapes");
      tp = p.tape;
    }
  }
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(os);
  Var out = tp->wrap(std::move(y), oid);
  struct Piece {
    int64_t id;
    int64_t extent;
    Shape shape;
  };
  std::vector<Piece> pieces;
  for (const Var& p : parts)
    pieces.push_back({p.id, p.value().shape()[axis], p.value().shape()});
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g) return;
    int64_t o2 = 0;
    for (const Piece& pc : pieces) {
      if (pc.id >= 0) {
        Tensor gp(pc.shape);
        for (int64_t o = 0; o < outer; ++o)
          std::memcpy(gp.data() + o * pc.extent * inner,
                      g->data() + (o * total + o2) * inner,
                      sizeof(double) * pc.extent * inner);
        t.accum(pc.id, gp);
      }
      o2 += pc.extent;
    }
  });
  return out;
}

Var gather_rows(const Var& a, const std::vector<int64_t>& indices) {
  const Tensor& av = a.value();
  if (av.rank() < 1) throw Error("gather_rows: rank must be >= 1");
  int64_t rows = av.shape()[0];
  int64_t rowsz = rows ? av.size() / rows : 0;
  for (int64_t i : indices)
    if (i < 0 || i >= rows) throw Error("gather_rows: index out of range");
  Shape os = av.shape();
  os[0] = static_cast<int64_t>(indices.size());
  Tensor y(os);
  for (size_t i = 0; i < indices.size(); ++i)
    std::memcpy(y.data() + i * rowsz, av.data() + indices[i] * rowsz,
                sizeof(double) * rowsz);
  Tape* tp = common_tape({&a});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(os);
  Var out = tp->wrap(std::move(y), oid);
  int64_t aid = a.id;
  Shape ashape = av.shape();
  auto idxs = indices;
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || aid < 0) return;
    Tensor ga(ashape);
    for (size_t i = 0; i < idxs.size(); ++i) {
      double* d = ga.data() + idxs[i] * rowsz;
      const double* s = g->data() + i * rowsz;
      for (int64_t j = 0; j < rowsz; ++j) d[j] += s[j];
    }
    t.accum(aid, ga);
  });
  return out;
}

Var reduce(ReduceOp op, const Var& x, int64_t axis, bool keepdim) {
  const Tensor& xv = x.value();
  axis = norm_axis(axis, xv.rank());
  int64_t e = xv.shape()[axis];
  if (e == 0) throw Error("reduce: empty reduction axis");
  int64_t outer, inner;
  axis_split(xv.shape(), axis, outer, inner);
  Shape os;
  for (int64_t i = 0; i < xv.rank(); ++i) {
    if (i == axis) {
      if (keepdim) os.push_back(1);
      continue;
    }
    os.push_back(xv.shape()[i]);
  }
  Tensor y(os);
  std::vector<int64_t> argmax;
  if (op == ReduceOp::Max) argmax.assign(static_cast<size_t>(outer * inner), 0);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      int64_t oi = o * inner + in;
      if (op == ReduceOp::Max) {
        double best = xv[(o * e) * inner + in];
        int64_t bj = 0;
        for (int64_t j = 1; j < e; ++j) {
          double v = xv[(o * e + j) * inner + in];
          if (v > best) {  // strict: ties keep the lowest index
            best = v;
            bj = j;
          }
        }
        y[oi] = best;
        argmax[static_cast<size_t>(oi)] = bj;
      } else {
        double s = 0;
        for (int64_t j = 0; j < e; ++j) s += xv[(o * e + j) * inner + in];
        y[oi] = op == ReduceOp::Mean ? s / static_cast<double>(e) : s;
      }
    }
  }
  Tape* tp = common_tape({&x});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(os);
  Var out = tp->wrap(std::move(y), oid);
  int64_t xid = x.id;
  Shape xshape = xv.shape();
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || xid < 0) return;
    Tensor gx(xshape);
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t in = 0; in < inner; ++in) {
        double gv = (*g)[o * inner + in];
        switch (op) {
          case ReduceOp::Sum:
            for (int64_t j = 0; j < e; ++j) gx[(o * e + j) * inner + in] = gv;
            break;
          case ReduceOp::Mean:
            for (int64_t j = 0; j < e; ++j)
              gx[(o * e + j) * inner + in] = gv / static_cast<double>(e);
            break;
          case ReduceOp::Max:
            gx[(o * e + argmax[static_cast<size_t>(o * inner + in)]) * inner + in] = gv;
            break;
        }
      }
    }
    t.accum(xid, gx);
  });
  return out;
}

Var sum_all(const Var& x) {
  Var flat = reshape(x, Shape{x.value().size()});
  Var s = reduce(ReduceOp::Sum, flat, 0);
  return s;
}

Var mean_all(const Var& x) {
  if (x.value().size() == 0) throw Error("mean_all: empty input");
  return mul(sum_all(x), 1.0 / static_cast<double>(x.value().size()));
}

Var softmax(const Var& x, int64_t axis) {
  x.value().check_finite("softmax input");
  Var m = reduce(ReduceOp::Max, x, axis, /*keepdim=*/true);
  Var e = exp(sub(x, m));
  Var s = reduce(ReduceOp::Sum, e, axis, /*keepdim=*/true);
  return div(e, s);
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  if (eps <= 0) throw Error("layer_norm: eps must be positive");
  Var mu = reduce(ReduceOp::Mean, x, -1, /*keepdim=*/true);
  Var xc = sub(x, mu);
  Var v = reduce(ReduceOp::Mean, square(xc), -1, /*keepdim=*/true);
  Var xn = div(xc, sqrt(add(v, eps)));
  return add(mul(xn, gain), bias);
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Shape& xs = x.value().shape();
  const Shape& ws = w.value().shape();
  if (ws.size() != 2) throw Error("linear: weight must be a matrix");
  if (xs.empty() || xs.back() != ws[0])
    throw Error("linear: input width " + shape_str(xs) + " does not match weight " +
                shape_str(ws));
  int64_t rows = x.value().size() / ws[0];
  Var x2 = reshape(x, Shape{rows, ws[0]});
  Var y = add(matmul(x2, w), b);
  Shape os = xs;
  os.back() = ws[1];
  return reshape(y, os);
}

Var affine_rows(const Var& p, const Tensor& mats) {
  const Tensor& pv = p.value();
  if (pv.rank() != 2 || pv.shape()[1] != 3)
    throw Error("affine_rows: points must be [N,3]");
  int64_t n = pv.shape()[0];
  if (mats.shape() != Shape{n, 3, 4})
    throw Error("affine_rows: matrices must be [N,3,4]");
  Tensor y({n, 3});
  for (int64_t i = 0; i < n; ++i) {
    const double* M = mats.data() + i * 12;
    const double* q = pv.data() + i * 3;
    for (int64_t r = 0; r < 3; ++r)
      y[i * 3 + r] = M[r * 4 + 0] * q[0] + M[r * 4 + 1] * q[1] + M[r * 4 + 2] * q[2] + M[r * 4 + 3];
  }
  Tape* tp = common_tape({&p});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(y.shape());
  Var out = tp->wrap(std::move(y), oid);
  int64_t pid = p.id;
  auto ms = std::make_shared<Tensor>(mats);
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || pid < 0) return;
    Tensor gp({n, 3});
    for (int64_t i = 0; i < n; ++i) {
      const double* M = ms->data() + i * 12;
      const double* gr = g->data() + i * 3;
      for (int64_t c = 0; c < 3; ++c)
        gp[i * 3 + c] = M[0 * 4 + c] * gr[0] + M[1 * 4 + c] * gr[1] + M[2 * 4 + c] * gr[2];
    }
    t.accum(pid, gp);
  });
  return out;
}

Var quat_mul_left(const Tensor& qc, const Var& r) {
  const Tensor& rv = r.value();
  if (rv.rank() != 2 || rv.shape()[1] != 4 || qc.shape() != rv.shape())
    throw Error("quat_mul_left: expected matching [N,4] inputs");
  int64_t n = rv.shape()[0];
  Tensor y({n, 4});
  for (int64_t i = 0; i < n; ++i) {
    const double* a = qc.data() + i * 4;
    const double* b = rv.data() + i * 4;
    double* o = y.data() + i * 4;
    o[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3];
    o[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2];
    o[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1];
    o[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0];
  }
  Tape* tp = common_tape({&r});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(y.shape());
  Var out = tp->wrap(std::move(y), oid);
  int64_t rid = r.id;
  auto qs = std::make_shared<Tensor>(qc);
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || rid < 0) return;
    Tensor gr({n, 4});
    for (int64_t i = 0; i < n; ++i) {
      const double* a = qs->data() + i * 4;
      const double* go = g->data() + i * 4;
      double* gi = gr.data() + i * 4;
      // transpose of the left-multiplication matrix L(a)
      gi[0] = a[0] * go[0] + a[1] * go[1] + a[2] * go[2] + a[3] * go[3];
      gi[1] = -a[1] * go[0] + a[0] * go[1] + a[3] * go[2] - a[2] * go[3];
      gi[2] = -a[2] * go[0] - a[3] * go[1] + a[0] * go[2] + a[1] * go[3];
      gi[3] = -a[3] * go[0] + a[2] * go[1] - a[1] * go[2] + a[0] * go[3];
    }
    t.accum(rid, gr);
  });
  return out;
}

Var conv2d_const(const Var& x, const Tensor& kernel) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw Error("conv2d_const: input must be [H,W,C]");
  if (kernel.rank() != 4 || kernel.shape()[0] != kernel.shape()[1] ||
      kernel.shape()[2] != xv.shape()[2])
    throw Error("conv2d_const: kernel must be [K,K,Cin,Cout] with matching Cin");
  int64_t h = xv.shape()[0], w = xv.shape()[1], ci = xv.shape()[2];
  int64_t kk = kernel.shape()[0], co = kernel.shape()[3];
  int64_t pad = kk / 2;
  Tensor y({h, w, co});
#pragma omp parallel for if (h * w * ci * co * kk * kk > (1 << 16)) schedule(static)
  for (int64_t yy = 0; yy < h; ++yy) {
    for (int64_t xx = 0; xx < w; ++xx) {
      double* orow = y.data() + (yy * w + xx) * co;
      for (int64_t ky = 0; ky < kk; ++ky) {
        int64_t sy = yy + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (int64_t kx = 0; kx < kk; ++kx) {
          int64_t sx = xx + kx - pad;
          if (sx < 0 || sx >= w) continue;
          const double* irow = xv.data() + (sy * w + sx) * ci;
          const double* krow = kernel.data() + ((ky * kk + kx) * ci) * co;
          for (int64_t c = 0; c < ci; ++c)
            for (int64_t o = 0; o < co; ++o) orow[o] += irow[c] * krow[c * co + o];
        }
      }
    }
  }
  Tape* tp = common_tape({&x});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(y.shape());
  Var out = tp->wrap(std::move(y), oid);
  int64_t xid = x.id;
  auto ks = std::make_shared<Tensor>(kernel);
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || xid < 0) return;
    Tensor gx({h, w, ci});
    for (int64_t yy = 0; yy < h; ++yy) {
      for (int64_t xx = 0; xx < w; ++xx) {
        const double* grow = g->data() + (yy * w + xx) * co;
        for (int64_t ky = 0; ky < kk; ++ky) {
          int64_t sy = yy + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int64_t kx = 0; kx < kk; ++kx) {
            int64_t sx = xx + kx - pad;
            if (sx < 0 || sx >= w) continue;
            double* irow = gx.data() + (sy * w + sx) * ci;
            const double* krow = ks->data() + ((ky * kk + kx) * ci) * co;
            for (int64_t c = 0; c < ci; ++c)
              for (int64_t o = 0; o < co; ++o) irow[c] += grow[o] * krow[c * co + o];
          }
        }
      }
    }
    t.accum(xid, gx);
  });
  return out;
}

Var avg_pool2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw Error("avg_pool2: input must be [H,W,C]");
  int64_t h = xv.shape()[0], w = xv.shape()[1], c = xv.shape()[2];
  if (h % 2 || w % 2) throw Error("avg_pool2: extents must be even");
  int64_t oh = h / 2, ow = w / 2;
  Tensor y({oh, ow, c});
  for (int64_t yy = 0; yy < oh; ++yy)
    for (int64_t xx = 0; xx < ow; ++xx)
      for (int64_t ch = 0; ch < c; ++ch) {
        double s = xv[((2 * yy) * w + 2 * xx) * c + ch] +
                   xv[((2 * yy) * w + 2 * xx + 1) * c + ch] +
                   xv[((2 * yy + 1) * w + 2 * xx) * c + ch] +
                   xv[((2 * yy + 1) * w + 2 * xx + 1) * c + ch];
        y[(yy * ow + xx) * c + ch] = 0.25 * s;
      }
  Tape* tp = common_tape({&x});
  if (!tp) return constant(std::move(y));
  int64_t oid = tp->fresh(y.shape());
  Var out = tp->wrap(std::move(y), oid);
  int64_t xid = x.id;
  tp->record([=](Tape& t) {
    const Tensor* g = t.grad_in(oid);
    if (!g || xid < 0) return;
    Tensor gx({h, w, c});
    for (int64_t yy = 0; yy < oh; ++yy)
      for (int64_t xx = 0; xx < ow; ++xx)
        for (int64_t ch = 0; ch < c; ++ch) {
          double gv = 0.25 * (*g)[(yy * ow + xx) * c + ch];
          gx[((2 * yy) * w + 2 * xx) * c + ch] += gv;
          gx[((2 * yy) * w + 2 * xx + 1) * c + ch] += gv;
          gx[((2 * yy + 1) * w + 2 * xx) * c + ch] += gv;
          gx[((2 * yy + 1) * w + 2 * xx + 1) * c + ch] += gv;
        }
    t.accum(xid, gx);
  });
  return out;
}

Var normalize_rows(const Var& x) {
  Var n2 = reduce(ReduceOp::Sum, square(x), -1, /*keepdim=*/true);
  return div(x, sqrt(n2));
}

}  // namespace ops
}  // namespace gav
