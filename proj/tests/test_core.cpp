#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>

#include "dgwm/errors.hpp"
#include "dgwm/gradcheck.hpp"
#include "dgwm/optim.hpp"
#include "dgwm/rng.hpp"
#include "dgwm/tensor.hpp"

using namespace dgwm;

namespace {

// NaN/Inf guards stay on for the whole unit-test binary.
struct FiniteGuard {
  FiniteGuard() { set_finite_checks(true); }
} guard;

Tensor mat(int r, int c, std::vector<double> v, bool rg = false) {
  return Tensor::from_values({r, c}, std::move(v), rg);
}

std::vector<double> matmul_brute(const std::vector<double>& a,
                                 const std::vector<double>& b, int m, int k,
                                 int n) {
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int t = 0; t < k; ++t) out[i * n + j] += a[i * k + t] * b[t * n + j];
  return out;
}

}  // namespace

TEST_CASE("matmul matches hand-worked products") {
  Tensor a = mat(2, 2, {1, 2, 3, 4});
  Tensor b = mat(2, 1, {5, 6});
  Tensor c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 1});
  CHECK(c.value()[0] == 17.0);
  CHECK(c.value()[1] == 39.0);

  // outer-product shape: column times row
  Tensor u = mat(2, 1, {1, -1});
  Tensor v = mat(1, 2, {2, 0});
  Tensor w = matmul(u, v);
  CHECK(w.value() == std::vector<double>{2, 0, -2, 0});
}

TEST_CASE("matmul by identity is a no-op") {
  Tensor eye = mat(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor a = mat(3, 2, {1, 2, 3, 4, 5, 6});
  CHECK(matmul(eye, a).value() == a.value());
}

TEST_CASE("matmul agrees with a triple loop on random shapes") {
  Rng rng(100);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + rng.uniform_int(6);
    const int k = 1 + rng.uniform_int(6);
    const int n = 1 + rng.uniform_int(6);
    std::vector<double> av(static_cast<std::size_t>(m) * k);
    std::vector<double> bv(static_cast<std::size_t>(k) * n);
    for (double& x : av) x = rng.normal();
    for (double& x : bv) x = rng.normal();
    Tensor c = matmul(mat(m, k, av), mat(k, n, bv));
    std::vector<double> expect = matmul_brute(av, bv, m, k, n);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(c.value()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(mat(2, 3, {1, 2, 3, 4, 5, 6}), mat(2, 2, {1, 2, 3, 4})),
                  DimensionError);
}

TEST_CASE("matmul_nt equals matmul against the transpose") {
  Rng rng(101);
  std::vector<double> av(6), bv(6);
  for (double& x : av) x = rng.normal();
  for (double& x : bv) x = rng.normal();
  Tensor viaT = matmul_nt(mat(2, 3, av), mat(2, 3, bv));  // [2,3] x [2,3]^T
  std::vector<double> bt(6);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) bt[j * 2 + i] = bv[i * 3 + j];
  Tensor direct = matmul(mat(2, 3, av), mat(3, 2, bt));
  for (int i = 0; i < 4; ++i) {
    CHECK(viaT.value()[i] == doctest::Approx(direct.value()[i]));
  }
}

TEST_CASE("outer builds the rank-1 matrix of two vectors") {
  Tensor u = Tensor::from_values({2}, {1, -1});
  Tensor v = Tensor::from_values({2}, {2, 0});
  CHECK(outer(u, v).value() == std::vector<double>{2, 0, -2, 0});
}

TEST_CASE("softmax normalizes, is shift invariant, and is symmetric") {
  Tensor s = softmax(Tensor::from_values({2}, {0, 0}));
  CHECK(s.value()[0] == doctest::Approx(0.5));
  CHECK(s.value()[1] == doctest::Approx(0.5));

  Tensor t = softmax(Tensor::from_values({3}, {0, 0, 0}));
  for (double p : t.value()) CHECK(p == doctest::Approx(1.0 / 3.0));

  Tensor peak = softmax(Tensor::from_values({3}, {5, 0, 0}));
  const double expect = std::exp(5.0) / (std::exp(5.0) + 2.0);
  CHECK(peak.value()[0] == doctest::Approx(expect).epsilon(1e-9));
  CHECK(peak.value()[0] == doctest::Approx(0.98690).epsilon(1e-4));

  Rng rng(7);
  std::vector<double> z(5);
  for (double& x : z) x = rng.normal() * 3;
  std::vector<double> zs = z;
  for (double& x : zs) x += 123.456;
  std::vector<double> p1 = softmax_values(z);
  std::vector<double> p2 = softmax_values(zs);
  double sum = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(std::abs(p1[i] - p2[i]) < 1e-9);
    sum += p1[i];
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("sigmoid hits the tabulated points and stays inside (0,1)") {
  CHECK(sigmoid_value(0.0) == 0.5);
  CHECK(sigmoid_value(2.0) == doctest::Approx(0.88080).epsilon(1e-4));
  CHECK(sigmoid_value(3.0) + sigmoid_value(-3.0) == doctest::Approx(1.0));
  for (double x : {-750.0, -40.0, 0.0, 40.0, 750.0}) {
    const double y = sigmoid_value(x);
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
  Tensor s = sigmoid(Tensor::from_values({2}, {1000.0, -1000.0}));
  CHECK(s.value()[0] < 1.0);
  CHECK(s.value()[1] > 0.0);
}

TEST_CASE("cross_entropy matches direct evaluations") {
  Tensor uniform = Tensor::from_values({3}, {1.5, 1.5, 1.5});
  CHECK(cross_entropy(uniform, 2).item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  Tensor confident = Tensor::from_values({3}, {60.0, 0.0, 0.0});
  CHECK(cross_entropy(confident, 0).item() == doctest::Approx(0.0).epsilon(1e-9));

  Tensor two = Tensor::from_values({2}, {1.0, 0.0});
  CHECK(cross_entropy(two, 0).item() ==
        doctest::Approx(-std::log(sigmoid_value(1.0))).epsilon(1e-12));
  CHECK(cross_entropy(two, 0).item() == doctest::Approx(0.31326).epsilon(1e-4));

  CHECK_THROWS_AS(cross_entropy(two, 2), IndexError);
  CHECK_THROWS_AS(cross_entropy(two, -1), IndexError);
}

TEST_CASE("entropy of logits follows the analytic value") {
  CHECK(entropy(Tensor::from_values({3}, {0, 0, 0})).item() ==
        doctest::Approx(std::log(3.0)));
  // softmax([log 4, 0]) = [0.8, 0.2]
  Tensor z = Tensor::from_values({2}, {std::log(4.0), 0.0});
  const double expect = -(0.8 * std::log(0.8) + 0.2 * std::log(0.2));
  CHECK(entropy(z).item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(entropy(z).item() == doctest::Approx(0.50040).epsilon(1e-4));
  CHECK(entropy(Tensor::from_values({2}, {80.0, 0.0})).item() ==
        doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("backward of a plain sum gives all-ones") {
  Tensor w = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
  sum(w).backward();
  CHECK(w.grad() == std::vector<double>(4, 1.0));
}

TEST_CASE("detached tensors receive no gradient") {
  Tensor w = Tensor::from_values({3}, {1, 2, 3}, true);
  Tensor cut = w.detach();
  Tensor loss = sum(mul(cut, Tensor::from_values({3}, {2, 2, 2})));
  CHECK_FALSE(loss.requires_grad());

  // mixed graph: gradient flows through the live branch only
  Tensor live = sum(add(mul(w, w), cut));
  live.backward();
  CHECK(w.grad()[0] == doctest::Approx(2.0));
  CHECK(w.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tensor w = Tensor::from_values({2}, {1, 2}, true);
  CHECK_THROWS_AS(add(w, w).backward(), ContractError);
}

TEST_CASE("every differentiable op passes a finite-difference sweep") {
  // Random small graphs over the op set, 100 trials; relative error <= 1e-4.
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + rng.uniform_int(4);
    const int k = 1 + rng.uniform_int(4);
    std::vector<double> av(static_cast<std::size_t>(m) * k);
    std::vector<double> bv(static_cast<std::size_t>(k));
    std::vector<double> cv(static_cast<std::size_t>(m) * k);
    for (double& x : av) x = rng.normal();
    for (double& x : bv) x = rng.normal();
    for (double& x : cv) x = rng.normal();
    Tensor A = Tensor::from_values({m, k}, av, true);
    Tensor b = Tensor::from_values({k}, bv, true);
    Tensor C = Tensor::from_values({m, k}, cv, true);
    const int target = rng.uniform_int(m);

    auto loss_fn = [&]() {
      Tensor h = relu(add_rowvec(mul(A, C), b));
      Tensor z = matmul_nt(h, C);  // [m,k] x [m,k]^T -> [m,m]
      Tensor row = pick_row(z, 0);
      Tensor probs = sigmoid(row);
      Tensor both = concat(probs, softmax(row));
      Tensor back = reshape(both, {2, m});
      return add(cross_entropy(pick_row(back, 0), target % m),
                 scale(sum(mean_rows(back)), 0.25));
    };
    Tensor loss = loss_fn();
    loss.backward();
    for (Tensor* p : {&A, &b, &C}) {
      std::vector<double> fd =
          finite_diff_grad([&]() { return loss_fn().item(); }, *p);
      CHECK(max_rel_error(p->grad(), fd) < 1e-4);
    }
  }
}

TEST_CASE("finite_diff_grad recovers analytic derivatives") {
  Tensor p = Tensor::from_values({1}, {3.0}, true);
  std::vector<double> g =
      finite_diff_grad([&]() { return p.value()[0] * p.value()[0]; }, p);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));

  Tensor q = Tensor::from_values({4}, {0, 0, 0, 0}, true);
  std::vector<double> gs =
      finite_diff_grad([&]() { return sum(sigmoid(q)).item(); }, q);
  for (double v : gs) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("finite checks flag non-finite inputs when enabled") {
  CHECK(finite_checks_enabled());
  std::vector<double> bad = {1.0, std::nan("")};
  CHECK_THROWS_AS(Tensor::from_values({2}, bad), NumericError);
  std::vector<double> inf = {std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(Tensor::from_values({1}, inf), NumericError);
}

TEST_CASE("rng streams are reproducible and seed-sensitive") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs |= (a.uniform() != c.uniform());
  CHECK(differs);
}

TEST_CASE("gaussian draws have the requested moments") {
  Rng rng(5);
  const std::size_t n = 100000;
  std::vector<double> xs = rng.gaussian(n, 1.0);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("gaussian with variance zero is exactly zero and draws nothing") {
  Rng a(9), b(9);
  std::vector<double> z = a.gaussian(16, 0.0);
  for (double v : z) CHECK(v == 0.0);
  // a consumed no state: both streams continue in lockstep
  CHECK(a.normal() == b.normal());
  CHECK_THROWS_AS(a.gaussian(4, -1.0), ParameterError);
}

TEST_CASE("sample_indices covers both regimes") {
  Rng rng(12);
  std::vector<int> pick = rng.sample_indices(10, 4);
  CHECK(pick.size() == 4);
  std::vector<bool> seen(10, false);
  for (int i : pick) {
    CHECK(i >= 0);
    CHECK(i < 10);
    CHECK_FALSE(seen[i]);  // distinct when k <= n
    seen[i] = true;
  }
  std::vector<int> more = rng.sample_indices(3, 8);  // with replacement
  CHECK(more.size() == 8);
  for (int i : more) {
    CHECK(i >= 0);
    CHECK(i < 3);
  }
}

TEST_CASE("cosine_lr anneals from base to zero") {
  SgdConfig cfg;
  cfg.total_epochs = 20;
  CHECK(cosine_lr(0, cfg, 0.01) == 0.01);
  CHECK(cosine_lr(20, cfg, 0.01) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_lr(10, cfg, 0.01) == doctest::Approx(0.005));
  double prev = cosine_lr(0, cfg, 0.01);
  for (int e = 1; e <= 20; ++e) {
    const double cur = cosine_lr(e, cfg, 0.01);
    CHECK(cur <= prev);
    prev = cur;
  }
  CHECK_THROWS_AS(cosine_lr(-1, cfg, 0.01), ParameterError);
  CHECK_THROWS_AS(cosine_lr(21, cfg, 0.01), ParameterError);
}

TEST_CASE("sgd_step reproduces the momentum recurrence") {
  std::vector<double> p = {1.0};
  std::vector<double> v;
  sgd_step(p, std::vector<double>{2.0}, 0.1, 0.0, v);
  CHECK(p[0] == doctest::Approx(0.8));

  // zero gradient leaves parameters alone (fresh velocity)
  std::vector<double> q = {5.0};
  std::vector<double> v2;
  sgd_step(q, std::vector<double>{0.0}, 0.1, 0.9, v2);
  CHECK(q[0] == 5.0);

  // two steps with momentum 0.9, hand-unrolled:
  //   v1 = g1 = 1        -> p = 1 - 0.1*1    = 0.9
  //   v2 = 0.9*1 + 2 = 2.9 -> p = 0.9 - 0.29 = 0.61
  std::vector<double> r = {1.0};
  std::vector<double> v3;
  sgd_step(r, std::vector<double>{1.0}, 0.1, 0.9, v3);
  CHECK(r[0] == doctest::Approx(0.9));
  sgd_step(r, std::vector<double>{2.0}, 0.1, 0.9, v3);
  CHECK(r[0] == doctest::Approx(0.61));

  std::vector<double> bad = {1.0, 2.0};
  std::vector<double> v4;
  CHECK_THROWS_AS(sgd_step(bad, std::vector<double>{1.0}, 0.1, 0.9, v4),
                  DimensionError);
}

TEST_CASE("optimizer skips parameters that never saw a gradient") {
  SgdConfig cfg;
  cfg.total_epochs = 4;
  SgdOptimizer opt(cfg);
  Tensor used = Tensor::from_values({2}, {1.0, 1.0}, true);
  Tensor idle = Tensor::from_values({2}, {7.0, 7.0}, true);
  opt.add_head_param(used);
  opt.add_head_param(idle);
  opt.set_epoch(0);
  opt.zero_grad();
  sum(mul(used, used)).backward();
  opt.step();
  CHECK(used.value()[0] != 1.0);
  CHECK(idle.value() == std::vector<double>{7.0, 7.0});
}

TEST_CASE("optimizer group rates follow their own schedules") {
  SgdConfig cfg;
  cfg.total_epochs = 10;
  SgdOptimizer opt(cfg);
  opt.set_epoch(0);
  CHECK(opt.lr_backbone() == cfg.lr_backbone);
  CHECK(opt.lr_head() == cfg.lr_head);
  opt.set_epoch(10);
  CHECK(std::abs(opt.lr_backbone()) < 1e-12);
  CHECK(std::abs(opt.lr_head()) < 1e-12);
}

TEST_CASE("config validation rejects bad optimizer settings") {
  SgdConfig cfg;
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg.momentum = 0.9;
  cfg.lr_head = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}
