#include "dua/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dua/error.hpp"

namespace dua::ops {
namespace {

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
  }
}

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      if (av == Real{0}) continue;
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt_acc(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const Real* brow = b + j * k;
      Real s{0};
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn_acc(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* arow = a + i * k;
    const Real* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      if (av == Real{0}) continue;
      Real* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() < 1 || x.rank() > 2 || y.rank() < 1 || y.rank() > 2 || (x.rank() == 1 && y.rank() == 1)) {
    mismatch("matmul", x, y);
  }
  const bool left_vec = x.rank() == 1;
  const bool right_vec = y.rank() == 1;
  const std::size_t m = left_vec ? 1 : x.dim(0);
  const std::size_t k = left_vec ? x.dim(0) : x.dim(1);
  const std::size_t k2 = y.dim(0);
  const std::size_t n = right_vec ? 1 : y.dim(1);
  if (k != k2) mismatch("matmul", x, y);

  Shape out_shape = left_vec ? Shape{n} : (right_vec ? Shape{m} : Shape{m, n});
  Tensor out(out_shape);
  gemm_acc(x.data().data(), y.data().data(), out.data().data(), m, k, n);

  return a.tape->record("matmul", std::move(out), {a.id, b.id}, [m, k, n](ad::BackwardContext& ctx) {
    const Real* g = ctx.out_grad().data().data();
    if (Tensor* ga = ctx.input_grad(0)) {
      gemm_nt_acc(g, ctx.input(1).data().data(), ga->data().data(), m, n, k);
    }
    if (Tensor* gb = ctx.input_grad(1)) {
      gemm_tn_acc(ctx.input(0).data().data(), g, gb->data().data(), m, k, n);
    }
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  require_rank("transpose", x, 2);
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return a.tape->record("transpose", std::move(out), {a.id}, [r, c](ad::BackwardContext& ctx) {
    Tensor* ga = ctx.input_grad(0);
    const Tensor& g = ctx.out_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[j * r + i];
  });
}

namespace {

void check_same(const char* op, Var a, Var b) {
  same_tape(a, b);
  if (a.value().shape() != b.value().shape()) mismatch(op, a.value(), b.value());
}

}  // namespace

Var add(Var a, Var b) {
  check_same("add", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return a.tape->record("add", std::move(out), {a.id, b.id}, [](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    for (std::size_t s = 0; s < 2; ++s) {
      if (Tensor* gi = ctx.input_grad(s))
        for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  check_same("sub", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return a.tape->record("sub", std::move(out), {a.id, b.id}, [](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    if (Tensor* ga = ctx.input_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (Tensor* gb = ctx.input_grad(1))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  check_same("mul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return a.tape->record("mul", std::move(out), {a.id, b.id}, [](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.input(1);
    if (Tensor* ga = ctx.input_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i];
    if (Tensor* gb = ctx.input_grad(1))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * x[i];
  });
}

Var scale(Var a, Real factor) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return a.tape->record("scale", std::move(out), {a.id}, [factor](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* ga = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * factor;
  });
}

Var one_minus(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Real{1} - x[i];
  return a.tape->record("one_minus", std::move(out), {a.id}, [](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* ga = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] -= g[i];
  });
}

namespace {

void check_rowvec(const char* op, Var m, Var v) {
  same_tape(m, v);
  if (m.value().rank() != 2 || v.value().rank() != 1 || m.value().dim(1) != v.value().dim(0)) {
    mismatch(op, m.value(), v.value());
  }
}

}  // namespace

Var add_rowvec(Var m, Var v) {
  check_rowvec("add_rowvec", m, v);
  const Tensor& x = m.value();
  const Tensor& y = v.value();
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + y[j];
  return m.tape->record("add_rowvec", std::move(out), {m.id, v.id}, [r, c](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    if (Tensor* gm = ctx.input_grad(0))
      for (std::size_t i = 0; i < g.size(); ++i) (*gm)[i] += g[i];
    if (Tensor* gv = ctx.input_grad(1))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gv)[j] += g[i * c + j];
  });
}

Var mul_rowvec(Var m, Var v) {
  check_rowvec("mul_rowvec", m, v);
  const Tensor& x = m.value();
  const Tensor& y = v.value();
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] * y[j];
  return m.tape->record("mul_rowvec", std::move(out), {m.id, v.id}, [r, c](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.input(1);
    if (Tensor* gm = ctx.input_grad(0))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gm)[i * c + j] += g[i * c + j] * y[j];
    if (Tensor* gv = ctx.input_grad(1))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gv)[j] += g[i * c + j] * x[i * c + j];
  });
}

Var concat_rowvec(Var m, Var v) {
  same_tape(m, v);
  const Tensor& x = m.value();
  const Tensor& y = v.value();
  if (x.rank() != 2 || y.rank() != 1) mismatch("concat_rowvec", x, y);
  const std::size_t r = x.dim(0), p = x.dim(1), q = y.dim(0);
  Tensor out({r, p + q});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(x.data().begin() + i * p, p, out.data().begin() + i * (p + q));
    std::copy_n(y.data().begin(), q, out.data().begin() + i * (p + q) + p);
  }
  return m.tape->record("concat_rowvec", std::move(out), {m.id, v.id}, [r, p, q](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* gm = ctx.input_grad(0);
    Tensor* gv = ctx.input_grad(1);
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t base = i * (p + q);
      if (gm)
        for (std::size_t j = 0; j < p; ++j) (*gm)[i * p + j] += g[base + j];
      if (gv)
        for (std::size_t j = 0; j < q; ++j) (*gv)[j] += g[base + p + j];
    }
  });
}

Var apply_activation(Activation kind, Var x) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  const char* name = "sigmoid";
  switch (kind) {
    case Activation::sigmoid:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = Real{1} / (Real{1} + std::exp(-in[i]));
      break;
    case Activation::tanh:
      name = "tanh";
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
      break;
    case Activation::relu:
      name = "relu";
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > Real{0} ? in[i] : Real{0};
      break;
  }
  return x.tape->record(name, std::move(out), {x.id}, [kind](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    const Tensor& y = ctx.out_value();
    const Tensor& in = ctx.input(0);
    Tensor* gx = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      Real d{0};
      switch (kind) {
        case Activation::sigmoid: d = y[i] * (Real{1} - y[i]); break;
        case Activation::tanh: d = Real{1} - y[i] * y[i]; break;
        case Activation::relu: d = in[i] > Real{0} ? Real{1} : Real{0}; break;
      }
      (*gx)[i] += g[i] * d;
    }
  });
}

Var softmax(Var x) {
  return masked_softmax(x, std::vector<bool>(x.value().size(), true));
}

Var masked_softmax(Var x, const std::vector<bool>& mask) {
  const Tensor& in = x.value();
  if (in.rank() != 1 || in.size() == 0) {
    throw DimensionError("softmax: expected a non-empty vector, got shape " + shape_string(in.shape()));
  }
  if (mask.size() != in.size()) {
    throw DimensionError("softmax: mask of length " + std::to_string(mask.size()) + " for shape " +
                         shape_string(in.shape()));
  }
  Real peak{0};
  bool any = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!mask[i]) continue;
    peak = any ? std::max(peak, in[i]) : in[i];
    any = true;
  }
  if (!any) throw ContractError("softmax: every position is masked");
  Tensor out(in.shape());
  Real total{0};
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = std::exp(in[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] /= total;
  return x.tape->record("softmax", std::move(out), {x.id}, [](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    const Tensor& y = ctx.out_value();
    Real dot{0};
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    Tensor* gx = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += y[i] * (g[i] - dot);
  });
}

Var conv2d_valid(Var input, Var kernel, Var bias) {
  same_tape(input, kernel);
  same_tape(input, bias);
  const Tensor& x = input.value();
  const Tensor& k = kernel.value();
  require_rank("conv2d_valid", x, 2);
  require_rank("conv2d_valid", k, 2);
  if (bias.value().size() != 1) {
    throw DimensionError("conv2d_valid: bias must be a scalar, got shape " + shape_string(bias.value().shape()));
  }
  const std::size_t h = x.dim(0), w = x.dim(1), kh = k.dim(0), kw = k.dim(1);
  if (kh > h || kw > w) mismatch("conv2d_valid", x, k);
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  const Real b = bias.value()[0];
  Tensor out({oh, ow});
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      Real s{0};
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t c = 0; c < kw; ++c) s += k[a * kw + c] * x[(i + a) * w + (j + c)];
      out[i * ow + j] = s + b;
    }
  return input.tape->record(
      "conv2d_valid", std::move(out), {input.id, kernel.id, bias.id}, [w, kh, kw, oh, ow](ad::BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        const Tensor& x = ctx.input(0);
        const Tensor& k = ctx.input(1);
        Tensor* gx = ctx.input_grad(0);
        Tensor* gk = ctx.input_grad(1);
        Tensor* gb = ctx.input_grad(2);
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) {
            const Real go = g[i * ow + j];
            if (go == Real{0}) continue;
            if (gb) (*gb)[0] += go;
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t c = 0; c < kw; ++c) {
                const std::size_t xi = (i + a) * w + (j + c);
                if (gx) (*gx)[xi] += go * k[a * kw + c];
                if (gk) (*gk)[a * kw + c] += go * x[xi];
              }
          }
      });
}

Var maxpool2d(Var input, std::size_t window) {
  const Tensor& x = input.value();
  require_rank("maxpool2d", x, 2);
  if (window == 0) throw DimensionError("maxpool2d: window must be positive");
  const std::size_t h = x.dim(0), w = x.dim(1);
  const std::size_t oh = (h + window - 1) / window, ow = (w + window - 1) / window;
  Tensor out({oh, ow});
  std::vector<std::size_t> argmax(oh * ow);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      const std::size_t r_end = std::min(h, (i + 1) * window);
      const std::size_t c_end = std::min(w, (j + 1) * window);
      std::size_t best = i * window * w + j * window;
      for (std::size_t r = i * window; r < r_end; ++r)
        for (std::size_t c = j * window; c < c_end; ++c)
          if (x[r * w + c] > x[best]) best = r * w + c;
      argmax[i * ow + j] = best;
      out[i * ow + j] = x[best];
    }
  return input.tape->record("maxpool2d", std::move(out), {input.id},
                            [argmax = std::move(argmax)](ad::BackwardContext& ctx) {
                              const Tensor& g = ctx.out_grad();
                              Tensor* gx = ctx.input_grad(0);
                              for (std::size_t i = 0; i < argmax.size(); ++i) (*gx)[argmax[i]] += g[i];
                            });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  std::vector<std::size_t> ids;
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    ids.push_back(p.id);
    sizes.push_back(p.value().size());
    total += p.value().size();
  }
  Tensor out({total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + offset);
    offset += p.value().size();
  }
  return parts.front().tape->record("concat", std::move(out), std::move(ids),
                                    [sizes = std::move(sizes)](ad::BackwardContext& ctx) {
                                      const Tensor& g = ctx.out_grad();
                                      std::size_t offset = 0;
                                      for (std::size_t s = 0; s < sizes.size(); ++s) {
                                        if (Tensor* gi = ctx.input_grad(s))
                                          for (std::size_t i = 0; i < sizes[s]; ++i) (*gi)[i] += g[offset + i];
                                        offset += sizes[s];
                                      }
                                    });
}

Var flatten(Var x) {
  Tensor out = x.value().reshaped({x.value().size()});
  return x.tape->record("flatten", std::move(out), {x.id}, [](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* gx = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var row(Var m, std::size_t index) {
  const Tensor& x = m.value();
  require_rank("row", x, 2);
  if (index >= x.dim(0)) {
    throw DimensionError("row: index " + std::to_string(index) + " out of range for " + shape_string(x.shape()));
  }
  const std::size_t c = x.dim(1);
  Tensor out({c}, std::vector<Real>(x.data().begin() + index * c, x.data().begin() + (index + 1) * c));
  return m.tape->record("row", std::move(out), {m.id}, [index, c](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* gm = ctx.input_grad(0);
    for (std::size_t j = 0; j < c; ++j) (*gm)[index * c + j] += g[j];
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t c = rows.front().value().size();
  std::vector<std::size_t> ids;
  Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    same_tape(rows.front(), rows[i]);
    const Tensor& r = rows[i].value();
    if (r.rank() != 1 || r.size() != c) mismatch("stack_rows", rows.front().value(), r);
    std::copy(r.data().begin(), r.data().end(), out.data().begin() + i * c);
    ids.push_back(rows[i].id);
  }
  return rows.front().tape->record("stack_rows", std::move(out), std::move(ids), [c](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    for (std::size_t i = 0; i < ctx.input_count(); ++i) {
      if (Tensor* gi = ctx.input_grad(i))
        for (std::size_t j = 0; j < c; ++j) (*gi)[j] += g[i * c + j];
    }
  });
}

Var slice_rows(Var m, std::size_t begin, std::size_t count) {
  const Tensor& x = m.value();
  require_rank("slice_rows", x, 2);
  if (begin + count > x.dim(0) || count == 0) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(x.shape()));
  }
  const std::size_t c = x.dim(1);
  Tensor out({count, c},
             std::vector<Real>(x.data().begin() + begin * c, x.data().begin() + (begin + count) * c));
  return m.tape->record("slice_rows", std::move(out), {m.id}, [begin, c](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* gm = ctx.input_grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) (*gm)[begin * c + i] += g[i];
  });
}

Var pad_rows(Var m, std::size_t rows) {
  const Tensor& x = m.value();
  require_rank("pad_rows", x, 2);
  return pad2d(m, rows, x.dim(1));
}

Var pad2d(Var m, std::size_t rows, std::size_t cols) {
  const Tensor& x = m.value();
  require_rank("pad2d", x, 2);
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (rows < r || cols < c) {
    throw DimensionError("pad2d: cannot pad " + shape_string(x.shape()) + " to " + shape_string({rows, cols}));
  }
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * cols + j] = x[i * c + j];
  return m.tape->record("pad2d", std::move(out), {m.id}, [r, c, cols](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* gm = ctx.input_grad(0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*gm)[i * c + j] += g[i * cols + j];
  });
}

Var select(Var t, std::size_t index) {
  const Tensor& x = t.value();
  if (x.rank() == 0) throw DimensionError("select: cannot slice a scalar");
  if (index >= x.dim(0)) {
    throw DimensionError("select: index " + std::to_string(index) + " out of range for " + shape_string(x.shape()));
  }
  Shape inner(x.shape().begin() + 1, x.shape().end());
  const std::size_t n = shape_size(inner);
  Tensor out(inner, std::vector<Real>(x.data().begin() + index * n, x.data().begin() + (index + 1) * n));
  return t.tape->record("select", std::move(out), {t.id}, [index, n](ad::BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad();
    Tensor* gt = ctx.input_grad(0);
    for (std::size_t i = 0; i < n; ++i) (*gt)[index * n + i] += g[i];
  });
}

Var gather_rows(Var table, std::span<const std::int32_t> ids) {
  const Tensor& x = table.value();
  require_rank("gather_rows", x, 2);
  if (ids.empty()) throw DimensionError("gather_rows: no ids");
  const std::size_t v = x.dim(0), c = x.dim(1);
  Tensor out({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw DimensionError("gather_rows: id " + std::to_string(ids[i]) + " outside table " + shape_string(x.shape()));
    }
    std::copy_n(x.data().begin() + ids[i] * c, c, out.data().begin() + i * c);
  }
  return table.tape->record("gather_rows", std::move(out), {table.id},
                            [ids = std::vector<std::int32_t>(ids.begin(), ids.end()), c](ad::BackwardContext& ctx) {
                              const Tensor& g = ctx.out_grad();
                              Tensor* gt = ctx.input_grad(0);
                              for (std::size_t i = 0; i < ids.size(); ++i)
                                for (std::size_t j = 0; j < c; ++j) (*gt)[ids[i] * c + j] += g[i * c + j];
                            });
}

Var sum(Var x) {
  Real s{0};
  for (Real v : x.value().data()) s += v;
  return x.tape->record("sum", Tensor::scalar(s), {x.id}, [](ad::BackwardContext& ctx) {
    const Real g = ctx.out_grad()[0];
    Tensor* gx = ctx.input_grad(0);
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
  });
}

Var cross_entropy(Var logits, std::size_t label) {
  const Tensor& z = logits.value();
  if (z.rank() != 1 || label >= z.size()) {
    throw DimensionError("cross_entropy: label " + std::to_string(label) + " for logits " + shape_string(z.shape()));
  }
  const Real peak = *std::max_element(z.data().begin(), z.data().end());
  Real total{0};
  for (Real v : z.data()) total += std::exp(v - peak);
  const Real log_norm = peak + std::log(total);
  return logits.tape->record("cross_entropy", Tensor::scalar(log_norm - z[label]), {logits.id},
                             [label, log_norm](ad::BackwardContext& ctx) {
                               const Real g = ctx.out_grad()[0];
                               const Tensor& z = ctx.input(0);
                               Tensor* gz = ctx.input_grad(0);
                               for (std::size_t i = 0; i < z.size(); ++i) {
                                 const Real p = std::exp(z[i] - log_norm);
                                 (*gz)[i] += g * (p - (i == label ? Real{1} : Real{0}));
                               }
                             });
}

}  // namespace dua::ops
