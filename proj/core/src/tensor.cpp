#include "dgwm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "dgwm/errors.hpp"

namespace dgwm {

namespace {

bool g_finite_checks = false;

// Largest double strictly below 1.
constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2;
constexpr double kTinyPositive = std::numeric_limits<double>::min();

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

void check_finite(std::span<const double> v, const char* op) {
  if (!g_finite_checks) return;
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string(op) + ": non-finite value produced");
    }
  }
}

void ensure_grad(detail::TensorNode& n) {
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch");
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.shape().size() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor");
  }
}

void require_vector(const Tensor& t, const char* op) {
  if (t.shape().size() != 1) {
    throw DimensionError(std::string(op) + ": expected a 1-D tensor");
  }
}

}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<Tensor> parents,
               std::function<void(detail::TensorNode&)> backprop) {
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const Tensor& p : parents) {
    node->parents.push_back(p.shared_node());
    if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) node->backprop = std::move(backprop);
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("from_values: shape does not match value count");
  }
  check_finite(values, "from_values");
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_values(std::move(shape), std::vector<double>(n, 0.0),
                     requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_values(std::move(shape), std::vector<double>(n, fill),
                     requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_values({1}, {v}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("shape: undefined tensor");
  return node_->shape;
}

int Tensor::dim(int i) const { return shape().at(static_cast<std::size_t>(i)); }

std::size_t Tensor::numel() const {
  if (!node_) throw ContractError("numel: undefined tensor");
  return node_->value.size();
}

const std::vector<double>& Tensor::value() const {
  if (!node_) throw ContractError("value: undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item: tensor is not scalar");
  return node_->value[0];
}

void Tensor::set_value(std::span<const double> values) {
  if (!node_) throw ContractError("set_value: undefined tensor");
  if (values.size() != node_->value.size()) {
    throw DimensionError("set_value: size mismatch");
  }
  check_finite(values, "set_value");
  std::copy(values.begin(), values.end(), node_->value.begin());
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!node_ || node_->grad.empty()) {
    throw ContractError("grad: no gradient recorded for this tensor");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  if (!node_) throw ContractError("detach: undefined tensor");
  return from_values(node_->shape, node_->value, false);
}

void Tensor::backward() {
  if (!node_) throw ContractError("backward: undefined tensor");
  if (node_->value.size() != 1) {
    throw ContractError("backward: loss must be scalar");
  }
  // Iterative DFS over parents; topo order is fixed by construction order,
  // which keeps gradient accumulation bit-reproducible.
  std::vector<detail::TensorNode*> topo;
  std::unordered_set<detail::TensorNode*> seen;
  struct Frame {
    detail::TensorNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (node_->requires_grad) {
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
  }
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }
  ensure_grad(*node_);
  node_->grad[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::TensorNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ---- ops ------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  check_finite(out, "add");
  auto* pa = a.node();
  auto* pb = b.node();
  return make_op(a.shape(), std::move(out), {a, b},
                 [pa, pb](detail::TensorNode& o) {
                   if (pa->requires_grad) {
                     ensure_grad(*pa);
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       pa->grad[i] += o.grad[i];
                   }
                   if (pb->requires_grad) {
                     ensure_grad(*pb);
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       pb->grad[i] += o.grad[i];
                   }
                 });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  check_finite(out, "sub");
  auto* pa = a.node();
  auto* pb = b.node();
  return make_op(a.shape(), std::move(out), {a, b},
                 [pa, pb](detail::TensorNode& o) {
                   if (pa->requires_grad) {
                     ensure_grad(*pa);
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       pa->grad[i] += o.grad[i];
                   }
                   if (pb->requires_grad) {
                     ensure_grad(*pb);
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       pb->grad[i] -= o.grad[i];
                   }
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  check_finite(out, "mul");
  auto* pa = a.node();
  auto* pb = b.node();
  return make_op(a.shape(), std::move(out), {a, b},
                 [pa, pb](detail::TensorNode& o) {
                   if (pa->requires_grad) {
                     ensure_grad(*pa);
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       pa->grad[i] += o.grad[i] * pb->value[i];
                   }
                   if (pb->requires_grad) {
                     ensure_grad(*pb);
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       pb->grad[i] += o.grad[i] * pa->value[i];
                   }
                 });
}

Tensor scale(const Tensor& a, double factor) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  check_finite(out, "scale");
  auto* pa = a.node();
  return make_op(a.shape(), std::move(out), {a},
                 [pa, factor](detail::TensorNode& o) {
                   if (!pa->requires_grad) return;
                   ensure_grad(*pa);
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     pa->grad[i] += o.grad[i] * factor;
                 });
}

Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
  require_matrix(mat, "add_rowvec");
  require_vector(vec, "add_rowvec");
  const int m = mat.dim(0);
  const int n = mat.dim(1);
  if (vec.dim(0) != n) throw DimensionError("add_rowvec: width mismatch");
  const auto& mv = mat.value();
  const auto& vv = vec.value();
  std::vector<double> out(mv.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[i * n + j] = mv[i * n + j] + vv[j];
  check_finite(out, "add_rowvec");
  auto* pm = mat.node();
  auto* pv = vec.node();
  return make_op({m, n}, std::move(out), {mat, vec},
                 [pm, pv, m, n](detail::TensorNode& o) {
                   if (pm->requires_grad) {
                     ensure_grad(*pm);
                     for (std::size_t i = 0; i < o.grad.size(); ++i)
                       pm->grad[i] += o.grad[i];
                   }
                   if (pv->requires_grad) {
                     ensure_grad(*pv);
                     for (int i = 0; i < m; ++i)
                       for (int j = 0; j < n; ++j)
                         pv->grad[j] += o.grad[i * n + j];
                   }
                 });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) throw DimensionError("matmul: inner dimensions disagree");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += av[i * k + t] * bv[t * n + j];
      out[i * n + j] = acc;
    }
  check_finite(out, "matmul");
  auto* pa = a.node();
  auto* pb = b.node();
  return make_op({m, n}, std::move(out), {a, b},
                 [pa, pb, m, n, k](detail::TensorNode& o) {
                   if (pa->requires_grad) {
                     ensure_grad(*pa);
                     for (int i = 0; i < m; ++i)
                       for (int t = 0; t < k; ++t) {
                         double acc = 0.0;
                         for (int j = 0; j < n; ++j)
                           acc += o.grad[i * n + j] * pb->value[t * n + j];
                         pa->grad[i * k + t] += acc;
                       }
                   }
                   if (pb->requires_grad) {
                     ensure_grad(*pb);
                     for (int t = 0; t < k; ++t)
                       for (int j = 0; j < n; ++j) {
                         double acc = 0.0;
                         for (int i = 0; i < m; ++i)
                           acc += pa->value[i * k + t] * o.grad[i * n + j];
                         pb->grad[t * n + j] += acc;
                       }
                   }
                 });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) throw DimensionError("matmul_nt: inner dimensions disagree");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int r = 0; r < n; ++r) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += av[i * k + j] * bv[r * k + j];
      out[i * n + r] = acc;
    }
  check_finite(out, "matmul_nt");
  auto* pa = a.node();
  auto* pb = b.node();
  return make_op({m, n}, std::move(out), {a, b},
                 [pa, pb, m, n, k](detail::TensorNode& o) {
                   if (pa->requires_grad) {
                     ensure_grad(*pa);
                     for (int i = 0; i < m; ++i)
                       for (int j = 0; j < k; ++j) {
                         double acc = 0.0;
                         for (int r = 0; r < n; ++r)
                           acc += o.grad[i * n + r] * pb->value[r * k + j];
                         pa->grad[i * k + j] += acc;
                       }
                   }
                   if (pb->requires_grad) {
                     ensure_grad(*pb);
                     for (int r = 0; r < n; ++r)
                       for (int j = 0; j < k; ++j) {
                         double acc = 0.0;
                         for (int i = 0; i < m; ++i)
                           acc += o.grad[i * n + r] * pa->value[i * k + j];
                         pb->grad[r * k + j] += acc;
                       }
                   }
                 });
}

Tensor outer(const Tensor& u, const Tensor& v) {
  require_vector(u, "outer");
  require_vector(v, "outer");
  const int m = u.dim(0), n = v.dim(0);
  const auto& uv = u.value();
  const auto& vv = v.value();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[i * n + j] = uv[i] * vv[j];
  check_finite(out, "outer");
  auto* pu = u.node();
  auto* pv = v.node();
  return make_op({m, n}, std::move(out), {u, v},
                 [pu, pv, m, n](detail::TensorNode& o) {
                   if (pu->requires_grad) {
                     ensure_grad(*pu);
                     for (int i = 0; i < m; ++i) {
                       double acc = 0.0;
                       for (int j = 0; j < n; ++j)
                         acc += o.grad[i * n + j] * pv->value[j];
                       pu->grad[i] += acc;
                     }
                   }
                   if (pv->requires_grad) {
                     ensure_grad(*pv);
                     for (int j = 0; j < n; ++j) {
                       double acc = 0.0;
                       for (int i = 0; i < m; ++i)
                         acc += o.grad[i * n + j] * pu->value[i];
                       pv->grad[j] += acc;
                     }
                   }
                 });
}

Tensor relu(const Tensor& a) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  check_finite(out, "relu");
  auto* pa = a.node();
  return make_op(a.shape(), std::move(out), {a},
                 [pa](detail::TensorNode& o) {
                   if (!pa->requires_grad) return;
                   ensure_grad(*pa);
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     if (pa->value[i] > 0.0) pa->grad[i] += o.grad[i];
                 });
}

Tensor sigmoid(const Tensor& a) {
  const auto& av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = sigmoid_value(av[i]);
  check_finite(out, "sigmoid");
  auto* pa = a.node();
  return make_op(a.shape(), std::move(out), {a},
                 [pa](detail::TensorNode& o) {
                   if (!pa->requires_grad) return;
                   ensure_grad(*pa);
                   for (std::size_t i = 0; i < o.grad.size(); ++i) {
                     const double s = o.value[i];
                     pa->grad[i] += o.grad[i] * s * (1.0 - s);
                   }
                 });
}

Tensor softmax(const Tensor& v) {
  require_vector(v, "softmax");
  std::vector<double> out = softmax_values(v.value());
  check_finite(out, "softmax");
  auto* pv = v.node();
  return make_op(v.shape(), std::move(out), {v},
                 [pv](detail::TensorNode& o) {
                   if (!pv->requires_grad) return;
                   ensure_grad(*pv);
                   double dot = 0.0;
                   for (std::size_t j = 0; j < o.grad.size(); ++j)
                     dot += o.grad[j] * o.value[j];
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     pv->grad[i] += o.value[i] * (o.grad[i] - dot);
                 });
}

Tensor cross_entropy(const Tensor& logits, int target) {
  require_vector(logits, "cross_entropy");
  const auto& z = logits.value();
  if (target < 0 || target >= static_cast<int>(z.size())) {
    throw IndexError("cross_entropy: target class out of range");
  }
  double zmax = z[0];
  for (double x : z) zmax = std::max(zmax, x);
  double acc = 0.0;
  for (double x : z) acc += std::exp(x - zmax);
  const double lse = zmax + std::log(acc);
  std::vector<double> out{lse - z[static_cast<std::size_t>(target)]};
  check_finite(out, "cross_entropy");
  auto* pz = logits.node();
  return make_op({1}, std::move(out), {logits},
                 [pz, lse, target](detail::TensorNode& o) {
                   if (!pz->requires_grad) return;
                   ensure_grad(*pz);
                   const double g = o.grad[0];
                   for (std::size_t i = 0; i < pz->value.size(); ++i) {
                     double p = std::exp(pz->value[i] - lse);
                     if (static_cast<int>(i) == target) p -= 1.0;
                     pz->grad[i] += g * p;
                   }
                 });
}

Tensor entropy(const Tensor& logits) {
  require_vector(logits, "entropy");
  const auto& z = logits.value();
  double zmax = z[0];
  for (double x : z) zmax = std::max(zmax, x);
  double acc = 0.0;
  for (double x : z) acc += std::exp(x - zmax);
  const double lse = zmax + std::log(acc);
  // H = -sum p log p with log p = z - lse, i.e. H = lse - sum p z.
  double pz_dot = 0.0;
  for (double x : z) pz_dot += std::exp(x - lse) * x;
  std::vector<double> out{lse - pz_dot};
  check_finite(out, "entropy");
  auto* pn = logits.node();
  return make_op({1}, std::move(out), {logits},
                 [pn, lse](detail::TensorNode& o) {
                   if (!pn->requires_grad) return;
                   ensure_grad(*pn);
                   const double g = o.grad[0];
                   const double h = o.value[0];
                   for (std::size_t i = 0; i < pn->value.size(); ++i) {
                     const double logp = pn->value[i] - lse;
                     pn->grad[i] += g * (-std::exp(logp) * (logp + h));
                   }
                 });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  require_vector(a, "concat");
  require_vector(b, "concat");
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> out;
  out.reserve(av.size() + bv.size());
  out.insert(out.end(), av.begin(), av.end());
  out.insert(out.end(), bv.begin(), bv.end());
  const int na = a.dim(0);
  auto* pa = a.node();
  auto* pb = b.node();
  return make_op({a.dim(0) + b.dim(0)}, std::move(out), {a, b},
                 [pa, pb, na](detail::TensorNode& o) {
                   if (pa->requires_grad) {
                     ensure_grad(*pa);
                     for (int i = 0; i < na; ++i) pa->grad[i] += o.grad[i];
                   }
                   if (pb->requires_grad) {
                     ensure_grad(*pb);
                     for (std::size_t i = na; i < o.grad.size(); ++i)
                       pb->grad[i - na] += o.grad[i];
                   }
                 });
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  if (shape_numel(new_shape) != t.numel()) {
    throw DimensionError("reshape: element count mismatch");
  }
  auto* pt = t.node();
  return make_op(std::move(new_shape), t.value(), {t},
                 [pt](detail::TensorNode& o) {
                   if (!pt->requires_grad) return;
                   ensure_grad(*pt);
                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                     pt->grad[i] += o.grad[i];
                 });
}

Tensor mean_rows(const Tensor& mat) {
  require_matrix(mat, "mean_rows");
  const int m = mat.dim(0), n = mat.dim(1);
  if (m == 0) throw DimensionError("mean_rows: empty matrix");
  const auto& mv = mat.value();
  const double inv = 1.0 / m;
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += mv[i * n + j];
    out[j] = acc * inv;
  }
  check_finite(out, "mean_rows");
  auto* pm = mat.node();
  return make_op({n}, std::move(out), {mat},
                 [pm, m, n, inv](detail::TensorNode& o) {
                   if (!pm->requires_grad) return;
                   ensure_grad(*pm);
                   for (int i = 0; i < m; ++i)
                     for (int j = 0; j < n; ++j)
                       pm->grad[i * n + j] += o.grad[j] * inv;
                 });
}

Tensor pick_row(const Tensor& mat, int row) {
  require_matrix(mat, "pick_row");
  const int m = mat.dim(0), n = mat.dim(1);
  if (row < 0 || row >= m) throw IndexError("pick_row: row out of range");
  const auto& mv = mat.value();
  std::vector<double> out(mv.begin() + static_cast<std::size_t>(row) * n,
                          mv.begin() + static_cast<std::size_t>(row + 1) * n);
  auto* pm = mat.node();
  return make_op({n}, std::move(out), {mat},
                 [pm, row, n](detail::TensorNode& o) {
                   if (!pm->requires_grad) return;
                   ensure_grad(*pm);
                   for (int j = 0; j < n; ++j)
                     pm->grad[row * n + j] += o.grad[j];
                 });
}

Tensor sum(const Tensor& a) {
  const auto& av = a.value();
  double acc = 0.0;
  for (double x : av) acc += x;
  std::vector<double> out{acc};
  check_finite(out, "sum");
  auto* pa = a.node();
  return make_op({1}, std::move(out), {a},
                 [pa](detail::TensorNode& o) {
                   if (!pa->requires_grad) return;
                   ensure_grad(*pa);
                   for (std::size_t i = 0; i < pa->value.size(); ++i)
                     pa->grad[i] += o.grad[0];
                 });
}

std::vector<double> softmax_values(std::span<const double> logits) {
  double zmax = logits[0];
  for (double x : logits) {
    if (std::isnan(x)) throw NumericError("softmax: NaN input");
    zmax = std::max(zmax, x);
  }
  double acc = 0.0;
  for (double x : logits) acc += std::exp(x - zmax);
  const double lse = zmax + std::log(acc);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::clamp(std::exp(logits[i] - lse), kTinyPositive, kBelowOne);
  }
  return out;
}

double sigmoid_value(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  // Saturated exponentials would otherwise round onto the closed bounds.
  return std::clamp(s, kTinyPositive, kBelowOne);
}

int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace dgwm
