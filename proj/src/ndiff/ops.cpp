#include "gnp/ndiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "eigen_map.hpp"
#include "gnp/ndiff/linalg.hpp"

namespace gnp::nd {

namespace {

template <typename... Args>
[[noreturn]] void shape_fail(std::string_view op, std::initializer_list<Var> nodes, fmt::format_string<Args...> f,
                             Args&&... args) {
  std::string ids;
  for (const Var& v : nodes) ids += fmt::format("{}#{}", ids.empty() ? "" : ", ", v.id());
  throw ShapeError(fmt::format("{}: {} (nodes {})", op, fmt::format(f, std::forward<Args>(args)...), ids));
}

void require_same(std::string_view op, Var a, Var b) {
  if (a.value().size() != b.value().size() || a.rows() != b.rows()) {
    shape_fail(op, {a, b}, "shape mismatch {} vs {}", shape_string(a.value().shape()),
               shape_string(b.value().shape()));
  }
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  require_same("add", a, b);
  Tensor out = a.value();
  out += b.value();
  return a.tape().record("add", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record("sub", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    if (t.requires_grad(ib)) t.accumulate(ib, map(t.grad(self), [](double g) { return -g; }));
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * t.value(ib)[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * t.value(ia)[i];
    }
  });
}

Var div(Var a, Var b) {
  require_same("div", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  return a.tape().record("div", std::move(out), {a, b}, [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const Tensor& y = t.value(self);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * y[i] / bv[i];
    }
  });
}

Var scale(Var a, double factor) {
  return a.tape().record("scale", map(a.value(), [factor](double x) { return x * factor; }), {a},
                         [ia = a.id(), factor](Tape& t, std::size_t self) {
                           Tensor& ga = t.grad_buffer(ia);
                           const Tensor& g = t.grad(self);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
                         });
}

Var add_scalar(Var a, double c) {
  return a.tape().record("add_scalar", map(a.value(), [c](double x) { return x + c; }), {a},
                         [ia = a.id()](Tape& t, std::size_t self) { t.accumulate(ia, t.grad(self)); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  return a.tape().record("relu", map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
                         [ia = a.id()](Tape& t, std::size_t self) {
                           Tensor& ga = t.grad_buffer(ia);
                           const Tensor& g = t.grad(self);
                           const Tensor& x = t.value(ia);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (x[i] > 0.0) ga[i] += g[i];
                         });
}

Var softplus(Var a) {
  return a.tape().record(
      "softplus", map(a.value(), [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }),
      {a}, [ia = a.id()](Tape& t, std::size_t self) {
        Tensor& ga = t.grad_buffer(ia);
        const Tensor& g = t.grad(self);
        const Tensor& x = t.value(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sigmoid(x[i]);
      });
}

Var exp(Var a) {
  return a.tape().record("exp", map(a.value(), [](double x) { return std::exp(x); }), {a},
                         [ia = a.id()](Tape& t, std::size_t self) {
                           Tensor& ga = t.grad_buffer(ia);
                           const Tensor& g = t.grad(self);
                           const Tensor& y = t.value(self);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
                         });
}

Var log(Var a) {
  return a.tape().record("log", map(a.value(), [](double x) { return std::log(x); }), {a},
                         [ia = a.id()](Tape& t, std::size_t self) {
                           Tensor& ga = t.grad_buffer(ia);
                           const Tensor& g = t.grad(self);
                           const Tensor& x = t.value(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
                         });
}

Var square(Var a) {
  return a.tape().record("square", map(a.value(), [](double x) { return x * x; }), {a},
                         [ia = a.id()](Tape& t, std::size_t self) {
                           Tensor& ga = t.grad_buffer(ia);
                           const Tensor& g = t.grad(self);
                           const Tensor& x = t.value(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * x[i] * g[i];
                         });
}

Var add_row_vector(Var x, Var b) {
  const std::size_t r = x.rows(), c = x.cols();
  if (b.rows() != 1 || b.cols() != c) {
    shape_fail("add_row_vector", {x, b}, "row {} does not broadcast over {}", shape_string(b.value().shape()),
               shape_string(x.value().shape()));
  }
  Tensor out = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = x.value()(i, j) + b.value()[j];
  return x.tape().record("add_row_vector", std::move(out), {x, b},
                         [ix = x.id(), ib = b.id(), r, c](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           t.accumulate(ix, g);
                           if (t.requires_grad(ib)) {
                             Tensor& gb = t.grad_buffer(ib);
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) gb[j] += g(i, j);
                           }
                         });
}

Var add_col_vector(Var x, Var b) {
  const std::size_t r = x.rows(), c = x.cols();
  if (b.rows() != r || b.cols() != 1) {
    shape_fail("add_col_vector", {x, b}, "column {} does not broadcast over {}", shape_string(b.value().shape()),
               shape_string(x.value().shape()));
  }
  Tensor out = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = x.value()(i, j) + b.value()[i];
  return x.tape().record("add_col_vector", std::move(out), {x, b},
                         [ix = x.id(), ib = b.id(), r, c](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           t.accumulate(ix, g);
                           if (t.requires_grad(ib)) {
                             Tensor& gb = t.grad_buffer(ib);
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) gb[i] += g(i, j);
                           }
                         });
}

Var mul_col_vector(Var x, Var v) {
  const std::size_t r = x.rows(), c = x.cols();
  if (v.rows() != r || v.cols() != 1) {
    shape_fail("mul_col_vector", {x, v}, "column {} does not broadcast over {}", shape_string(v.value().shape()),
               shape_string(x.value().shape()));
  }
  Tensor out = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = x.value()(i, j) * v.value()[i];
  return x.tape().record("mul_col_vector", std::move(out), {x, v},
                         [ix = x.id(), iv = v.id(), r, c](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const Tensor& xv = t.value(ix);
                           const Tensor& vv = t.value(iv);
                           if (t.requires_grad(ix)) {
                             Tensor& gx = t.grad_buffer(ix);
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) gx(i, j) += g(i, j) * vv[i];
                           }
                           if (t.requires_grad(iv)) {
                             Tensor& gv = t.grad_buffer(iv);
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) gv[i] += g(i, j) * xv(i, j);
                           }
                         });
}

Var add_diag(Var s, Var d) {
  const std::size_t n = s.rows();
  if (s.cols() != n || d.value().size() != n) {
    shape_fail("add_diag", {s, d}, "diagonal {} does not fit {}", shape_string(d.value().shape()),
               shape_string(s.value().shape()));
  }
  Tensor out = s.value();
  for (std::size_t i = 0; i < n; ++i) out(i, i) += d.value()[i];
  return s.tape().record("add_diag", std::move(out), {s, d}, [is = s.id(), id = d.id(), n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    t.accumulate(is, g);
    if (t.requires_grad(id)) {
      Tensor& gd = t.grad_buffer(id);
      for (std::size_t i = 0; i < n; ++i) gd[i] += g(i, i);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  return a.tape().record("sum", Tensor::scalar(s), {a}, [ia = a.id()](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var mean_rows(Var x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = Tensor::matrix(1, c);
  if (r > 0) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j] += x.value()(i, j);
    for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
  }
  return x.tape().record("mean_rows", std::move(out), {x}, [ix = x.id(), r, c](Tape& t, std::size_t self) {
    if (r == 0) return;
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ix);
    const double inv = 1.0 / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx(i, j) += g[j] * inv;
  });
}

Var transpose(Var a) {
  return a.tape().record("transpose", transpose(a.value()), {a}, [ia = a.id()](Tape& t, std::size_t self) {
    t.accumulate(ia, transpose(t.grad(self)));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) {
      shape_fail("concat_cols", {parts[0], p}, "row counts {} vs {}", r, p.rows());
    }
    c += p.cols();
  }
  Tensor out = Tensor::matrix(r, c);
  std::vector<std::size_t> ids, widths;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, off + j) = v(i, j);
    off += v.cols();
    ids.push_back(p.id());
    widths.push_back(v.cols());
  }
  return parts[0].tape().record("concat_cols", std::move(out), parts,
                                [ids, widths, r](Tape& t, std::size_t self) {
                                  const Tensor& g = t.grad(self);
                                  std::size_t off = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (t.requires_grad(ids[k])) {
                                      Tensor& gp = t.grad_buffer(ids[k]);
                                      for (std::size_t i = 0; i < r; ++i)
                                        for (std::size_t j = 0; j < widths[k]; ++j) gp(i, j) += g(i, off + j);
                                    }
                                    off += widths[k];
                                  }
                                });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  for (const Var& p : parts) {
    if (p.cols() != c) {
      shape_fail("concat_rows", {parts[0], p}, "column counts {} vs {}", c, p.cols());
    }
    r += p.rows();
  }
  Tensor out = Tensor::matrix(r, c);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + off * c);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return parts[0].tape().record("concat_rows", std::move(out), parts, [ids, offsets, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Tensor& gp = t.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] * c + i];
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const std::size_t r = x.rows(), c = x.cols();
  if (begin + count > c) shape_fail("slice_cols", {x}, "columns [{}, {}) out of {}", begin, begin + count, c);
  Tensor out = Tensor::matrix(r, count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x.value()(i, begin + j);
  return x.tape().record("slice_cols", std::move(out), {x}, [ix = x.id(), r, begin, count](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) gx(i, begin + j) += g(i, j);
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const std::size_t r = x.rows(), c = x.cols();
  if (begin + count > r) shape_fail("slice_rows", {x}, "rows [{}, {}) out of {}", begin, begin + count, r);
  Tensor out = Tensor::matrix(count, c);
  std::copy(x.value().data() + begin * c, x.value().data() + (begin + count) * c, out.data());
  return x.tape().record("slice_rows", std::move(out), {x}, [ix = x.id(), c, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * c + i] += g[i];
  });
}

Var repeat_rows(Var row, std::size_t n) {
  if (row.rows() != 1) shape_fail("repeat_rows", {row}, "expected a single row, got {}", shape_string(row.value().shape()));
  const std::size_t c = row.cols();
  Tensor out = Tensor::matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) std::copy(row.value().data(), row.value().data() + c, out.data() + i * c);
  return row.tape().record("repeat_rows", std::move(out), {row}, [ir = row.id(), n, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gr = t.grad_buffer(ir);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) gr[j] += g(i, j);
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    shape_fail("matmul", {a, b}, "inner dimensions {} vs {}", a.cols(), b.rows());
  }
  return a.tape().record("matmul", matmul(a.value(), b.value()), {a, b},
                         [ia = a.id(), ib = b.id()](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           if (t.requires_grad(ia)) t.accumulate(ia, matmul_nt(g, t.value(ib)));
                           if (t.requires_grad(ib)) t.accumulate(ib, matmul_tn(t.value(ia), g));
                         });
}

Var linear(Var x, Var w, Var b) {
  if (x.cols() != w.cols()) {
    shape_fail("linear", {x, w}, "input width {} vs weight {}", x.cols(), shape_string(w.value().shape()));
  }
  const bool has_bias = b.valid();
  if (has_bias && b.value().size() != w.rows()) {
    shape_fail("linear", {w, b}, "bias {} vs {} outputs", shape_string(b.value().shape()), w.rows());
  }
  Tensor out = matmul_nt(x.value(), w.value());
  if (has_bias) {
    const std::size_t c = out.cols();
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < c; ++j) out(i, j) += b.value()[j];
  }
  auto fn = [ix = x.id(), iw = w.id(), ib = has_bias ? b.id() : Var::npos](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ix)) t.accumulate(ix, matmul(g, t.value(iw)));
    if (t.requires_grad(iw)) t.accumulate(iw, matmul_tn(g, t.value(ix)));
    if (ib != Var::npos && t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
    }
  };
  if (has_bias) return x.tape().record("linear", std::move(out), {x, w, b}, fn);
  return x.tape().record("linear", std::move(out), {x, w}, fn);
}

Var cholesky(Var s) {
  if (s.rows() != s.cols()) shape_fail("cholesky", {s}, "matrix is not square: {}", shape_string(s.value().shape()));
  CholeskyResult res = cholesky(s.value());
  if (res.level > 0) s.tape().note_jitter();
  return s.tape().record("cholesky", std::move(res.factor), {s}, [is = s.id()](Tape& t, std::size_t self) {
    // S_bar = sym(L^{-T} Phi(L^T L_bar) L^{-1}), Phi = lower triangle with halved diagonal.
    const Tensor& l = t.value(self);
    const std::size_t n = l.rows();
    Tensor lbar = t.grad(self);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) lbar(i, j) = 0.0;
    Tensor p = matmul_tn(l, lbar);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) p(i, j) = 0.0;
      p(i, i) *= 0.5;
    }
    // X = L^{-T} P, then S_bar = X L^{-1} = (L^{-T} X^T)^T.
    Tensor x = solve_lower_transposed(l, p);
    Tensor sbar = transpose(solve_lower_transposed(l, transpose(x)));
    Tensor sym = Tensor::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) sym(i, j) = 0.5 * (sbar(i, j) + sbar(j, i));
    t.accumulate(is, sym);
  });
}

Var solve_lower(Var l, Var b) {
  if (l.rows() != l.cols() || l.rows() != b.rows()) {
    shape_fail("solve_lower", {l, b}, "{} \\ {}", shape_string(l.value().shape()), shape_string(b.value().shape()));
  }
  return l.tape().record("solve_lower", solve_lower(l.value(), b.value()), {l, b},
                         [il = l.id(), ib = b.id()](Tape& t, std::size_t self) {
                           const Tensor& lv = t.value(il);
                           Tensor bbar = solve_lower_transposed(lv, t.grad(self));
                           if (t.requires_grad(il)) {
                             Tensor lbar = matmul_nt(bbar, t.value(self));
                             const std::size_t n = lbar.rows();
                             for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = 0; j < n; ++j) lbar(i, j) = j <= i ? -lbar(i, j) : 0.0;
                             t.accumulate(il, lbar);
                           }
                           if (t.requires_grad(ib)) t.accumulate(ib, bbar);
                         });
}

Var sum_log_diag(Var l) {
  if (l.rows() != l.cols()) shape_fail("sum_log_diag", {l}, "matrix is not square");
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l.value()(i, i));
  return l.tape().record("sum_log_diag", Tensor::scalar(s), {l}, [il = l.id()](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& lv = t.value(il);
    Tensor& gl = t.grad_buffer(il);
    for (std::size_t i = 0; i < lv.rows(); ++i) gl(i, i) += g / lv(i, i);
  });
}

Var softmax_rows(Var x) {
  const std::size_t r = x.rows(), c = x.cols();
  Tensor out = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x.value()(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (out(i, j) = std::exp(x.value()(i, j) - mx));
    for (std::size_t j = 0; j < c; ++j) out(i, j) /= z;
  }
  return x.tape().record("softmax_rows", std::move(out), {x}, [ix = x.id(), r, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < c; ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var eq_gram(Var g) {
  const std::size_t m = g.rows(), d = g.cols();
  const double* gv = g.value().data();
  Tensor k = Tensor::matrix(m, m);
  double* kv = k.data();
  for (std::size_t i = 0; i < m; ++i) {
    kv[i * m + i] = 1.0;
    const double* gi = gv + i * d;
    for (std::size_t j = 0; j < i; ++j) {
      const double* gj = gv + j * d;
      double d2 = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double diff = gi[a] - gj[a];
        d2 += diff * diff;
      }
      kv[i * m + j] = kv[j * m + i] = std::exp(-0.5 * d2);
    }
  }
  return g.tape().record("eq_gram", std::move(k), {g}, [ig = g.id(), m](Tape& t, std::size_t self) {
    // G_bar = W G - diag(W 1) G with W = (K_bar + K_bar^T) * K.
    const double* kbar = t.grad(self).data();
    const double* kv = t.value(self).data();
    Tensor w = Tensor::matrix(m, m);
    double* wv = w.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) wv[i * m + j] = i == j ? 0.0 : (kbar[i * m + j] + kbar[j * m + i]) * kv[i * m + j];
    const Tensor& gt = t.value(ig);
    Tensor gbar = matmul(w, gt);
    const std::size_t d = gt.cols();
    for (std::size_t i = 0; i < m; ++i) {
      double rs = 0.0;
      for (std::size_t j = 0; j < m; ++j) rs += wv[i * m + j];
      for (std::size_t a = 0; a < d; ++a) gbar(i, a) -= rs * gt(i, a);
    }
    t.accumulate(ig, gbar);
  });
}

Var kvv_covariance(Var g, Var v, Var noise) {
  const std::size_t m = g.rows(), d = g.cols();
  if (v.rows() != m || v.cols() != 1 || noise.rows() != m || noise.cols() != 1) {
    shape_fail("kvv_covariance", {g, v, noise}, "basis {}, scale {}, noise {}", shape_string(g.value().shape()),
               shape_string(v.value().shape()), shape_string(noise.value().shape()));
  }
  // Distances accumulate over features in order for each pair; the transposed
  // copy lets the inner loop run across pairs.
  const Tensor& gv = g.value();
  std::vector<double> gt(m * d), d2(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < d; ++a) gt[a * m + i] = gv(i, a);
  const double* vv = v.value().data();
  const double* nv = noise.value().data();
  Tensor k = Tensor::matrix(m, m);
  auto eq = std::make_shared<Tensor>(Tensor::matrix(m, m));
  double* kv = k.data();
  double* ev = eq->data();
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(i), 0.0);
    for (std::size_t a = 0; a < d; ++a) {
      const double gia = gt[a * m + i];
      const double* row = gt.data() + a * m;
      for (std::size_t j = 0; j < i; ++j) {
        const double diff = gia - row[j];
        d2[j] += diff * diff;
      }
    }
    ev[i * m + i] = 1.0;
    kv[i * m + i] = vv[i] * vv[i] + nv[i];
    for (std::size_t j = 0; j < i; ++j) {
      const double e = std::exp(-0.5 * d2[j]);
      ev[i * m + j] = ev[j * m + i] = e;
      kv[i * m + j] = kv[j * m + i] = vv[i] * vv[j] * e;
    }
  }
  return g.tape().record(
      "kvv_covariance", std::move(k), {g, v, noise},
      [ig = g.id(), iv = v.id(), in = noise.id(), eq, m](Tape& t, std::size_t self) {
        // With S = K_bar + K_bar^T, E the EQ Gram and u_ij = S_ij v_j E_ij (i != j):
        //   noise_bar = diag(K_bar), v_bar_i = 2 K_bar_ii v_i + sum_j u_ij,
        //   G_bar = W G - diag(W 1) G with W_ij = v_i u_ij.
        const double* kbar = t.grad(self).data();
        const double* ev = eq->data();
        const Tensor& gt = t.value(ig);
        const double* vv = t.value(iv).data();
        const std::size_t d = gt.cols();
        Tensor w = Tensor::matrix(m, m);
        Tensor vbar = Tensor::matrix(m, 1);
        Tensor nbar = Tensor::matrix(m, 1);
        double* wv = w.data();
        for (std::size_t i = 0; i < m; ++i) {
          nbar[i] = kbar[i * m + i];
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const double u = (kbar[i * m + j] + kbar[j * m + i]) * vv[j] * ev[i * m + j];
            acc += u;
            wv[i * m + j] = vv[i] * u;
          }
          vbar[i] = 2.0 * kbar[i * m + i] * vv[i] + acc;
        }
        if (t.requires_grad(ig)) {
          Tensor gbar = matmul(w, gt);
          for (std::size_t i = 0; i < m; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < m; ++j) rs += wv[i * m + j];
            for (std::size_t a = 0; a < d; ++a) gbar(i, a) -= rs * gt(i, a);
          }
          t.accumulate(ig, gbar);
        }
        if (t.requires_grad(iv)) t.accumulate(iv, vbar);
        if (t.requires_grad(in)) t.accumulate(in, nbar);
      });
}

std::size_t conv_output_length(std::size_t length, const ConvGeometry& g) {
  const std::size_t padded = length + 2 * g.padding;
  if (padded < g.kernel) return 0;
  return (padded - g.kernel) / g.stride + 1;
}

std::size_t conv_transpose_output_length(std::size_t length, const ConvGeometry& g) {
  if (length == 0) return 0;
  return (length - 1) * g.stride + g.kernel + g.output_padding - 2 * g.padding;
}

namespace {

void check_conv_operands(std::string_view op, Var x, Var w, Var b, const ConvGeometry& geo) {
  const std::size_t cin = x.rows();
  if (w.cols() != cin * geo.kernel) {
    shape_fail(op, {x, w}, "channel mismatch: input has {} channels, weight {} expects {}", cin,
               shape_string(w.value().shape()), w.cols() / std::max<std::size_t>(geo.kernel, 1));
  }
  if (b.valid() && b.value().size() != w.rows()) {
    shape_fail(op, {w, b}, "bias {} vs {} output channels", shape_string(b.value().shape()), w.rows());
  }
  if (geo.stride == 0 || geo.kernel == 0) shape_fail(op, {x}, "zero stride or kernel");
}

}  // namespace

Var conv1d(Var x, Var w, Var b, const ConvGeometry& geo) {
  check_conv_operands("conv1d", x, w, b, geo);
  const std::size_t cin = x.rows(), len = x.cols(), cout = w.rows(), k = geo.kernel;
  const std::size_t out_len = conv_output_length(len, geo);
  const auto pad = static_cast<std::ptrdiff_t>(geo.padding);

  // im2col: cols(ci*K + tap, o) = x(ci, o*stride - pad + tap)
  Tensor cols = Tensor::matrix(cin * k, out_len);
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t tap = 0; tap < k; ++tap)
      for (std::size_t o = 0; o < out_len; ++o) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(o * geo.stride + tap) - pad;
        if (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) cols(ci * k + tap, o) = x.value()(ci, src);
      }
  Tensor out = matmul(w.value(), cols);
  if (b.valid())
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t o = 0; o < out_len; ++o) out(co, o) += b.value()[co];

  auto fn = [ix = x.id(), iw = w.id(), ib = b.valid() ? b.id() : Var::npos, cols = std::move(cols), geo, cin, len,
             k](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(iw)) t.accumulate(iw, matmul_nt(g, cols));
    if (ib != Var::npos && t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t co = 0; co < g.rows(); ++co)
        for (std::size_t o = 0; o < g.cols(); ++o) gb[co] += g(co, o);
    }
    if (t.requires_grad(ix)) {
      Tensor gcols = matmul_tn(t.value(iw), g);
      Tensor& gx = t.grad_buffer(ix);
      const auto pad = static_cast<std::ptrdiff_t>(geo.padding);
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t tap = 0; tap < k; ++tap)
          for (std::size_t o = 0; o < gcols.cols(); ++o) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(o * geo.stride + tap) - pad;
            if (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) gx(ci, src) += gcols(ci * k + tap, o);
          }
    }
  };
  if (b.valid()) return x.tape().record("conv1d", std::move(out), {x, w, b}, std::move(fn));
  return x.tape().record("conv1d", std::move(out), {x, w}, std::move(fn));
}

Var conv_transpose1d(Var x, Var w, Var b, const ConvGeometry& geo) {
  check_conv_operands("conv_transpose1d", x, w, b, geo);
  const std::size_t cin = x.rows(), len = x.cols(), cout = w.rows(), k = geo.kernel;
  const std::size_t out_len = conv_transpose_output_length(len, geo);
  const auto pad = static_cast<std::ptrdiff_t>(geo.padding);

  // Tap-major weights: wr(tap*cout + co, ci) = w(co, ci*K + tap).
  Tensor wr = Tensor::matrix(k * cout, cin);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t tap = 0; tap < k; ++tap) wr(tap * cout + co, ci) = w.value()(co, ci * k + tap);
  // Each input position i contributes wr_tap * x(:, i) to output i*stride - pad + tap.
  Tensor contrib = matmul(wr, x.value());
  Tensor out = Tensor::matrix(cout, out_len);
  for (std::size_t tap = 0; tap < k; ++tap)
    for (std::size_t i = 0; i < len; ++i) {
      const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(i * geo.stride + tap) - pad;
      if (dst < 0 || dst >= static_cast<std::ptrdiff_t>(out_len)) continue;
      for (std::size_t co = 0; co < cout; ++co) out(co, dst) += contrib(tap * cout + co, i);
    }
  if (b.valid())
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t o = 0; o < out_len; ++o) out(co, o) += b.value()[co];

  auto fn = [ix = x.id(), iw = w.id(), ib = b.valid() ? b.id() : Var::npos, wr = std::move(wr), geo, cin, cout, len,
             k](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const auto pad = static_cast<std::ptrdiff_t>(geo.padding);
    Tensor gcontrib = Tensor::matrix(k * cout, len);
    for (std::size_t tap = 0; tap < k; ++tap)
      for (std::size_t i = 0; i < len; ++i) {
        const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(i * geo.stride + tap) - pad;
        if (dst < 0 || dst >= static_cast<std::ptrdiff_t>(g.cols())) continue;
        for (std::size_t co = 0; co < cout; ++co) gcontrib(tap * cout + co, i) = g(co, dst);
      }
    if (t.requires_grad(ix)) t.accumulate(ix, matmul_tn(wr, gcontrib));
    if (t.requires_grad(iw)) {
      Tensor gwr = matmul_nt(gcontrib, t.value(ix));
      Tensor& gw = t.grad_buffer(iw);
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t tap = 0; tap < k; ++tap) gw(co, ci * k + tap) += gwr(tap * cout + co, ci);
    }
    if (ib != Var::npos && t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t co = 0; co < g.rows(); ++co)
        for (std::size_t o = 0; o < g.cols(); ++o) gb[co] += g(co, o);
    }
  };
  if (b.valid()) return x.tape().record("conv_transpose1d", std::move(out), {x, w, b}, std::move(fn));
  return x.tape().record("conv_transpose1d", std::move(out), {x, w}, std::move(fn));
}

}  // namespace gnp::nd
