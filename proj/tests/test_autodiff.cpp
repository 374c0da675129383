#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gav/gradcheck.hpp"
#include "gav/ops.hpp"
#include "gav/rng.hpp"
#include "gav/tape.hpp"

using namespace gav;
using namespace gav::ops;

TEST_CASE("sigmoid at zero is one half") {
  Var y = sigmoid(constant(Tensor::scalar(0.0)));
  CHECK(y.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("exp of zeros is ones") {
  Var y = exp(constant(Tensor({2, 2})));
  for (int64_t i = 0; i < 4; ++i) CHECK(y.value()[i] == 1.0);
}

TEST_CASE("softplus gradient at zero matches finite differences") {
  auto fn = [](Tape&, const Var& v) { return sum_all(softplus(v)); };
  Tensor x = Tensor::scalar(0.0);
  auto res = grad_check(fn, x, 1e-6);
  CHECK(res.max_rel_err < 1e-8);
  Tape tape;
  Var v = tape.leaf(x);
  Var out = sum_all(softplus(v));
  tape.backward(out);
  CHECK(tape.grad(v)[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("binary identities") {
  Tensor x({3}, {1.5, -2.0, 0.25});
  Var a = constant(x);
  Var zero_sum = add(a, constant(Tensor({3})));
  Var one_prod = mul(a, constant(Tensor::full({3}, 1.0)));
  for (int64_t i = 0; i < 3; ++i) {
    CHECK(zero_sum.value()[i] == x[i]);
    CHECK(one_prod.value()[i] == x[i]);
  }
}

TEST_CASE("mul gradient w.r.t. a equals b") {
  Tensor a({4}, {0.3, -1.2, 2.0, 0.7});
  Tensor b({4}, {1.1, 0.4, -0.9, 3.0});
  Tape tape;
  Var va = tape.leaf(a);
  Var out = sum_all(mul(va, constant(b)));
  tape.backward(out);
  Tensor g = tape.grad(va);
  for (int64_t i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(b[i]).epsilon(1e-14));
  auto fn = [&](Tape&, const Var& v) { return sum_all(mul(v, constant(b))); };
  CHECK(grad_check(fn, a, 1e-6).max_rel_err < 1e-9);
}

TEST_CASE("broadcasting add and reduce of gradient") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row({1, 3}, {10, 20, 30});
  Tape tape;
  Var vr = tape.leaf(row);
  Var out = sum_all(add(constant(a), vr));
  tape.backward(out);
  Tensor g = tape.grad(vr);
  CHECK(g.shape() == Shape{1, 3});
  for (int64_t i = 0; i < 3; ++i) CHECK(g[i] == 2.0);
}

TEST_CASE("incompatible shapes rejected") {
  CHECK_THROWS_AS(add(constant(Tensor({2, 3})), constant(Tensor({4}))), Error);
  CHECK_THROWS_AS(div(constant(Tensor::scalar(1.0)), constant(Tensor::scalar(0.0))), Error);
}

TEST_CASE("matmul identity and scalar case") {
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  Rng rng(7);
  Tensor b({3, 5});
  for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.normal();
  Var y = matmul(constant(eye), constant(b));
  CHECK(y.value().bit_equal(b));

  Var s = matmul(constant(Tensor({1, 1}, {2.0})), constant(Tensor({1, 1}, {3.0})));
  CHECK(s.value()[0] == 6.0);
}

TEST_CASE("matmul gradient w.r.t. a equals g times b^T") {
  Rng rng(11);
  Tensor a({2, 3}), b({3, 4});
  for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
  for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.normal();
  auto fn = [&](Tape&, const Var& v) { return sum_all(matmul(v, constant(b))); };
  CHECK(grad_check(fn, a, 1e-6).max_rel_err < 1e-8);
  auto fnb = [&](Tape&, const Var& v) { return sum_all(matmul(constant(a), v)); };
  CHECK(grad_check(fnb, b, 1e-6).max_rel_err < 1e-8);
}

TEST_CASE("batched matmul gradients") {
  Rng rng(13);
  Tensor a({2, 3, 4}), b({2, 4, 2});
  for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
  for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.normal();
  auto fn = [&](Tape&, const Var& v) { return sum_all(matmul(v, constant(b))); };
  CHECK(grad_check(fn, a, 1e-6).max_rel_err < 1e-7);
  auto fnb = [&](Tape&, const Var& v) { return sum_all(matmul(constant(a), v)); };
  CHECK(grad_check(fnb, b, 1e-6).max_rel_err < 1e-7);
}

TEST_CASE("matmul extent mismatch") {
  CHECK_THROWS_AS(matmul(constant(Tensor({2, 3})), constant(Tensor({4, 2}))), Error);
}

TEST_CASE("softmax basics") {
  Var u = softmax(constant(Tensor({2})), 0);
  CHECK(u.value()[0] == doctest::Approx(0.5).epsilon(1e-15));

  Var big = softmax(constant(Tensor({2}, {1000.0, 1000.0})), 0);
  CHECK(big.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::isfinite(big.value()[1]));

  Var t = softmax(constant(Tensor({2}, {0.0, std::log(3.0)})), 0);
  CHECK(t.value()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(t.value()[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and shift invariance is bitwise") {
  Rng rng(3);
  Tensor x({5, 7});
  // dyadic logits so that adding an integer constant stays exact
  for (int64_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<double>(static_cast<int64_t>(rng.uniform_int(8192)) - 4096) / 1024.0;
  Var s = softmax(constant(x), 1);
  for (int64_t r = 0; r < 5; ++r) {
    double sum = 0;
    for (int64_t c = 0; c < 7; ++c) sum += s.value().at2(r, c);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  Tensor xs = x;
  for (int64_t i = 0; i < xs.size(); ++i) xs[i] += 3.0;
  Var s2 = softmax(constant(xs), 1);
  CHECK(s.value().bit_equal(s2.value()));
}

TEST_CASE("layer_norm cases") {
  Var gain = constant(Tensor::full({4}, 1.0));
  Var bias = constant(Tensor({4}));
  // constant row maps to zeros under the eps floor
  Var z = layer_norm(constant(Tensor::full({1, 4}, 5.0)), gain, bias);
  for (int64_t i = 0; i < 4; ++i) CHECK(z.value()[i] == 0.0);
  // already normalized row passes through as eps -> 0
  Var g2 = constant(Tensor::full({2}, 1.0));
  Var b2 = constant(Tensor({2}));
  Var y = layer_norm(constant(Tensor({1, 2}, {1.0, -1.0})), g2, b2, 1e-14);
  CHECK(y.value()[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(y.value()[1] == doctest::Approx(-1.0).epsilon(1e-7));
  // gain 0 leaves only the bias
  Tensor bias4({4}, {1, 2, 3, 4});
  Var w = layer_norm(constant(Tensor({2, 4}, {0.1, 2, -3, 4, 5, 6, 7, 8})),
                     constant(Tensor({4})), constant(bias4));
  for (int64_t r = 0; r < 2; ++r)
    for (int64_t c = 0; c < 4; ++c) CHECK(w.value().at2(r, c) == bias4[c]);
}

TEST_CASE("linear identity, zero input, and jacobian") {
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  Var y = linear(constant(x), constant(eye), constant(Tensor({3})));
  CHECK(y.value().bit_equal(x));

  Tensor bias({3}, {7, 8, 9});
  Var yb = linear(constant(Tensor({2, 3})), constant(eye), constant(bias));
  for (int64_t r = 0; r < 2; ++r)
    for (int64_t c = 0; c < 3; ++c) CHECK(yb.value().at2(r, c) == bias[c]);

  Rng rng(5);
  Tensor w({3, 4}), b({4}), xin({2, 3});
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal();
  for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.normal();
  for (int64_t i = 0; i < xin.size(); ++i) xin[i] = rng.normal();
  // weight each output entry differently so the full jacobian is exercised
  Tensor coeff({2, 4});
  for (int64_t i = 0; i < coeff.size(); ++i) coeff[i] = rng.normal();
  auto fn = [&](Tape&, const Var& v) {
    return sum_all(mul(linear(v, constant(w), constant(b)), constant(coeff)));
  };
  CHECK(grad_check(fn, xin, 1e-6).max_rel_err < 1e-6);
  auto fnw = [&](Tape&, const Var& v) {
    return sum_all(mul(linear(constant(xin), v, constant(b)), constant(coeff)));
  };
  CHECK(grad_check(fnw, w, 1e-6).max_rel_err < 1e-6);
}

TEST_CASE("reduce cases") {
  Var one = reduce(ReduceOp::Max, constant(Tensor({1, 3}, {2, 5, 1})), 0);
  CHECK(one.value()[0] == 2.0);
  CHECK(one.value()[1] == 5.0);

  Var m = reduce(ReduceOp::Mean, constant(Tensor({3}, {1, 2, 3})), 0);
  CHECK(m.value()[0] == 2.0);

  // gradient of max routes to the arg-max element only
  Tensor x({4}, {0.1, 3.0, -2.0, 1.5});
  Tape tape;
  Var v = tape.leaf(x);
  Var out = reduce(ReduceOp::Max, v, 0);
  tape.backward(out);
  Tensor g = tape.grad(v);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 0.0);
  auto fn = [](Tape&, const Var& vv) { return reduce(ReduceOp::Max, vv, 0); };
  CHECK(grad_check(fn, x, 1e-6).max_rel_err < 1e-9);

  CHECK_THROWS_AS(reduce(ReduceOp::Sum, constant(Tensor({0})), 0), Error);
}

TEST_CASE("max tie breaks to lowest index") {
  Tensor x({3}, {2.0, 2.0, 1.0});
  Tape tape;
  Var v = tape.leaf(x);
  tape.backward(reduce(ReduceOp::Max, v, 0));
  Tensor g = tape.grad(v);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("backward of sum of squares") {
  Tensor x({2}, {1.0, 2.0});
  Tape tape;
  Var v = tape.leaf(x);
  tape.backward(sum_all(square(v)));
  Tensor g = tape.grad(v);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 4.0);
}

TEST_CASE("unused variable has exact zero gradient") {
  Tape tape;
  Var used = tape.leaf(Tensor::scalar(2.0));
  Var unused = tape.leaf(Tensor({3}, {1, 2, 3}));
  tape.backward(square(used));
  Tensor g = tape.grad(unused);
  for (int64_t i = 0; i < 3; ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("backward twice is rejected") {
  Tape tape;
  Var v = tape.leaf(Tensor::scalar(1.0));
  Var out = square(v);
  tape.backward(out);
  CHECK_THROWS_AS(tape.backward(out), Error);
}

TEST_CASE("backward requires a scalar on this tape") {
  Tape tape;
  Var v = tape.leaf(Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(tape.backward(v), Error);
  CHECK_THROWS_AS(tape.backward(constant(1.0)), Error);
}

TEST_CASE("determinism: same inputs give bit-identical results") {
  Rng rng(17);
  Tensor x({6, 6});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  auto run = [&]() {
    Tape tape;
    Var v = tape.leaf(x);
    Var out = sum_all(softmax(matmul(v, transpose(v)), 1));
    Tensor val = out.value();
    tape.backward(out);
    return std::make_pair(val, tape.grad(v));
  };
  auto r1 = run();
  auto r2 = run();
  CHECK(r1.first.bit_equal(r2.first));
  CHECK(r1.second.bit_equal(r2.second));
}

TEST_CASE("grad_check on linear map is exact to rounding") {
  Tensor c({5}, {2, -3, 0.5, 1, 4});
  Tensor x({5}, {0.3, 0.1, -2, 1, 0.9});
  auto fn = [&](Tape&, const Var& v) { return sum_all(mul(v, constant(c))); };
  CHECK(grad_check(fn, x, 1e-4).max_rel_err < 1e-10);
}

TEST_CASE("grad_check on softmax cross entropy toy") {
  Tensor logits({4}, {0.2, -1.0, 0.7, 0.1});
  auto fn = [](Tape&, const Var& v) {
    Var p = softmax(v, 0);
    // cross entropy against class 2
    return negate(log(slice(p, 0, 2, 1)));
  };
  CHECK(grad_check(fn, logits, 1e-6).max_rel_err < 1e-6);
}

TEST_CASE("every smooth primitive passes grad_check below 1e-6") {
  Rng rng(23);
  Tensor x({8});
  for (int64_t i = 0; i < 8; ++i) x[i] = 0.3 + rng.uniform();  // positive for log/sqrt
  for (UnaryOp op : {UnaryOp::Exp, UnaryOp::Log, UnaryOp::Sigmoid, UnaryOp::Softplus,
                     UnaryOp::Gelu, UnaryOp::Negate, UnaryOp::Sqrt, UnaryOp::Tanh}) {
    auto fn = [&](Tape&, const Var& v) { return sum_all(square(apply_unary(op, v))); };
    auto res = grad_check(fn, x, 1e-6);
    CAPTURE(static_cast<int>(op));
    CHECK(res.max_rel_err < 1e-6);
  }
  for (BinaryOp op : {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div}) {
    Tensor b({8});
    for (int64_t i = 0; i < 8; ++i) b[i] = 0.5 + rng.uniform();
    auto fa = [&](Tape&, const Var& v) {
      return sum_all(square(apply_binary(op, v, constant(b))));
    };
    auto fb = [&](Tape&, const Var& v) {
      return sum_all(square(apply_binary(op, constant(b), v)));
    };
    CHECK(grad_check(fa, x, 1e-6).max_rel_err < 1e-6);
    CHECK(grad_check(fb, x, 1e-6).max_rel_err < 1e-6);
  }
}

TEST_CASE("log and sqrt reject non-positive input with index") {
  Tensor x({3}, {1.0, -2.0, 3.0});
  try {
    ops::log(constant(x));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
  CHECK_THROWS_AS(ops::sqrt(constant(Tensor({1}, {0.0}))), Error);
}

TEST_CASE("slice, concat, gather roundtrip gradients") {
  Rng rng(29);
  Tensor x({5, 3});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  Tensor coeff({7, 3});
  for (int64_t i = 0; i < coeff.size(); ++i) coeff[i] = rng.normal();
  auto fn = [&](Tape&, const Var& v) {
    Var top = slice(v, 0, 0, 2);
    Var rest = slice(v, 0, 2, 3);
    Var gathered = gather_rows(v, {4, 0});
    Var all = concat(0, {top, rest, gathered});
    return sum_all(mul(all, constant(coeff)));
  };
  CHECK(grad_check(fn, x, 1e-6).max_rel_err < 1e-8);
}

TEST_CASE("conv and pool gradients") {
  Rng rng(31);
  Tensor x({6, 6, 2});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  Tensor k({3, 3, 2, 4});
  for (int64_t i = 0; i < k.size(); ++i) k[i] = rng.normal(0, 0.5);
  auto fn = [&](Tape&, const Var& v) {
    return sum_all(square(avg_pool2(conv2d_const(v, k))));
  };
  CHECK(grad_check(fn, x, 1e-6).max_rel_err < 1e-6);
}

TEST_CASE("normalize_rows and quaternion product gradients") {
  Rng rng(37);
  Tensor q({4, 4}), qc({4, 4});
  for (int64_t i = 0; i < q.size(); ++i) q[i] = rng.normal();
  for (int64_t i = 0; i < qc.size(); ++i) qc[i] = rng.normal();
  Tensor coeff({4, 4});
  for (int64_t i = 0; i < coeff.size(); ++i) coeff[i] = rng.normal();
  auto fn = [&](Tape&, const Var& v) {
    return sum_all(mul(quat_mul_left(qc, normalize_rows(v)), constant(coeff)));
  };
  CHECK(grad_check(fn, q, 1e-6).max_rel_err < 1e-6);
}

TEST_CASE("affine_rows matches finite differences") {
  Rng rng(41);
  Tensor p({3, 3}), mats({3, 3, 4}), coeff({3, 3});
  for (int64_t i = 0; i < p.size(); ++i) p[i] = rng.normal();
  for (int64_t i = 0; i < mats.size(); ++i) mats[i] = rng.normal();
  for (int64_t i = 0; i < coeff.size(); ++i) coeff[i] = rng.normal();
  auto fn = [&](Tape&, const Var& v) {
    return sum_all(mul(affine_rows(v, mats), constant(coeff)));
  };
  CHECK(grad_check(fn, p, 1e-6).max_rel_err < 1e-8);
}
