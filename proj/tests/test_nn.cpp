#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "helpers.hpp"
#include "strange/errors.hpp"
#include "strange/nn/checkpoint.hpp"
#include "strange/nn/graph.hpp"
#include "strange/nn/layers.hpp"
#include "strange/nn/optim.hpp"

using namespace strange;
using nn::Tensor;

TEST_CASE("tensor shapes and views") {
  const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6.0f);
  const Tensor v = Tensor::vector({1, 2});
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 2);
  CHECK(m.reshaped({3, 2}).at(2, 1) == 6.0f);
  CHECK_THROWS_AS(m.reshaped({4, 2}), DimensionError);
  CHECK_THROWS_AS(m.item(), DimensionError);
}

TEST_CASE("linear layer") {
  nn::Linear l(2, 2);
  SUBCASE("identity") {
    l.weight.value = Tensor::matrix({{1, 0}, {0, 1}});
    const Tensor y = nn::linear_forward(l, Tensor::vector({1, 2}));
    CHECK(y[0] == 1.0f);
    CHECK(y[1] == 2.0f);
  }
  SUBCASE("zero weights return the bias") {
    nn::Linear z(2, 1);
    z.bias.value[0] = 3.0f;
    CHECK(nn::linear_forward(z, Tensor::vector({5, 7}))[0] == 3.0f);
  }
  SUBCASE("hand matrix-vector product") {
    l.weight.value = Tensor::matrix({{1, 2}, {3, 4}});
    const Tensor y = nn::linear_forward(l, Tensor::vector({1, 1}));
    CHECK(y[0] == 3.0f);
    CHECK(y[1] == 7.0f);
  }
  SUBCASE("input width mismatch") { CHECK_THROWS_AS(nn::linear_forward(l, Tensor::vector({1, 2, 3})), DimensionError); }
}

TEST_CASE("gru step") {
  SUBCASE("zero parameters keep a zero state") {
    nn::GruCell c(3, 4);
    const Tensor h = nn::gru_step(c, Tensor::vector({0.3f, -2, 5}), Tensor({4}));
    for (float v : h.values()) CHECK(v == 0.0f);
  }
  SUBCASE("bounded output and scalar oracle") {
    nn::Rng rng(11);
    for (int draw = 0; draw < 10; ++draw) {
      nn::GruCell c(3, 4, rng);
      const Tensor x = testing::random_tensor(rng, {3}, -3, 3);
      const Tensor h = testing::random_tensor(rng, {4}, -0.99, 0.99);
      const Tensor out = nn::gru_step(c, x, h);
      const testing::Vec ref = testing::gru_ref(c, testing::to_vec(x.values()), testing::to_vec(h.values()));
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::fabs(out[j]) < 1.0f);
        CHECK(std::fabs(out[j] - ref[j]) < 1e-6);
      }
    }
  }
}

TEST_CASE("activations") {
  const Tensor r = nn::activation(nn::Activation::relu, Tensor::vector({-1, 2}));
  CHECK(r[0] == 0.0f);
  CHECK(r[1] == 2.0f);
  const Tensor a = nn::activation(nn::Activation::abs, Tensor::vector({-3, 3}));
  CHECK(a[0] == 3.0f);
  CHECK(a[1] == 3.0f);
  CHECK(nn::activation(nn::Activation::elu, Tensor::vector({0}))[0] == 0.0f);
  CHECK(nn::activation(nn::Activation::elu, Tensor::vector({-1}))[0] == doctest::Approx(std::expm1(-1.0)));
}

TEST_CASE("mse") {
  CHECK(nn::mse(Tensor::vector({1, 2}), Tensor::vector({1, 2})) == 0.0);
  CHECK(nn::mse(Tensor::vector({1, 2}), Tensor::vector({0, 0})) == 5.0);
  CHECK(nn::mse(Tensor::vector({0.5f}), Tensor::vector({0})) == 0.25);
  CHECK_THROWS_AS(nn::mse(Tensor::vector({1}), Tensor::vector({1, 2})), DimensionError);
}

TEST_CASE("backward") {
  SUBCASE("scalar weight: dL/dW = 2(Wx - y)x") {
    nn::Parameter w(Tensor({1, 1}, 1.5f));
    nn::Parameter b(Tensor({1}));
    nn::Graph g;
    const nn::Var pred = g.linear(g.input(Tensor({1, 1}, 2.0f)), g.param(w), g.param(b));
    g.backward(g.sum(g.square(g.sub(pred, g.input(Tensor({1, 1}, 1.0f))))));
    CHECK(w.grad[0] == doctest::Approx(2.0 * (1.5 * 2.0 - 1.0) * 2.0));
  }
  SUBCASE("unused parameter gets a zero gradient") {
    nn::Parameter used(Tensor({1}, 2.0f));
    nn::Parameter unused(Tensor({3}, 1.0f));
    unused.grad.fill(0.0f);
    nn::Graph g;
    g.param(unused);
    g.backward(g.sum(g.square(g.param(used))));
    for (float v : unused.grad.values()) CHECK(v == 0.0f);
    CHECK(used.grad[0] == 4.0f);
  }
  SUBCASE("non-recording graph refuses backward") {
    nn::Parameter p(Tensor({1}, 1.0f));
    nn::Graph g(false);
    CHECK_THROWS_AS(g.backward(g.sum(g.param(p))), UsageError);
  }
  SUBCASE("composed ops match finite differences") {
    nn::Rng rng(5);
    nn::Mlp m(3, 5, 2, rng);
    nn::GruCell c(2, 3, rng);
    nn::ParameterList params;
    m.collect(params, "m");
    c.collect(params, "c");
    const Tensor x = testing::random_tensor(rng, {4, 3});
    const Tensor h = testing::random_tensor(rng, {4, 3}, -0.5, 0.5);
    const std::vector<int> labels{0, 2, 1, 1};
    const auto res = testing::grad_check(params, [&](nn::Graph& g) {
      const nn::Var hn = c(g, m(g, g.input(x)), g.input(h));
      const nn::Var parts[] = {hn, g.elu(hn)};
      return g.sum(g.softmax_xent(g.concat_cols(parts), labels));
    });
    CHECK(res.max_rel_error < 1e-3);
  }
}

TEST_CASE("kink signature tracks relu and abs input signs") {
  auto signature = [](float a, float b) {
    nn::Graph g(false);
    const nn::Var x = g.input(Tensor::vector({a, b}));
    g.relu(x);
    g.abs(g.scale(x, -1.0f));
    g.tanh(x);
    return g.kink_signature();
  };
  CHECK(signature(0.5f, -1.0f) == signature(2.0f, -0.1f));
  CHECK(signature(0.5f, -1.0f) != signature(-0.5f, -1.0f));
  CHECK(signature(0.5f, -1.0f) != signature(0.5f, 0.0f));
}

TEST_CASE("slice_rows keeps the leading rows and routes gradients") {
  nn::Parameter p(Tensor::matrix({{1, 2}, {3, 4}, {5, 6}}));
  nn::Graph g;
  const nn::Var s = g.slice_rows(g.param(p), 2);
  CHECK(g.value(s) == Tensor::matrix({{1, 2}, {3, 4}}));
  g.backward(g.sum(g.square(s)));
  CHECK(p.grad == Tensor::matrix({{2, 4}, {6, 8}, {0, 0}}));
  CHECK_THROWS_AS(g.slice_rows(g.param(p), 4), DimensionError);
}

TEST_CASE("optimizers") {
  nn::Rng rng(3);
  SUBCASE("adam: zero gradient leaves parameters unchanged") {
    nn::Linear l(3, 2, rng);
    nn::ParameterList params;
    l.collect(params, "l");
    const auto before = nn::parameter_hash(params);
    nn::zero_grads(params);
    nn::Optimizer opt;
    opt.step(params);
    CHECK(nn::parameter_hash(params) == before);
  }
  SUBCASE("adam first step moves each coordinate by lr against the gradient sign") {
    nn::Parameter p(Tensor::vector({0.5f, -0.25f, 1.0f}));
    p.grad = Tensor::vector({0.3f, -2.0f, 1e-3f});
    nn::ParameterList params{{"p", &p}};
    nn::Optimizer opt;
    opt.step(params);
    const float lr = opt.settings().lr;
    CHECK(p.value[0] == doctest::Approx(0.5 - lr).epsilon(1e-5));
    CHECK(p.value[1] == doctest::Approx(-0.25 + lr).epsilon(1e-5));
    CHECK(p.value[2] == doctest::Approx(1.0 - lr).epsilon(1e-4));
  }
  SUBCASE("identical runs give identical parameters after 100 steps") {
    auto run = [](nn::OptimizerKind kind) {
      nn::Rng r(9);
      nn::Mlp m(4, 6, 2, r);
      nn::ParameterList params;
      m.collect(params, "m");
      nn::OptimizerSettings s;
      s.kind = kind;
      nn::Optimizer opt(s);
      const Tensor x = testing::random_tensor(r, {5, 4});
      for (int i = 0; i < 100; ++i) {
        nn::zero_grads(params);
        nn::Graph g;
        g.backward(g.sum(g.square(m(g, g.input(x)))));
        opt.step(params);
      }
      return nn::parameter_hash(params);
    };
    CHECK(run(nn::OptimizerKind::adam) == run(nn::OptimizerKind::adam));
    CHECK(run(nn::OptimizerKind::rmsprop) == run(nn::OptimizerKind::rmsprop));
    CHECK(run(nn::OptimizerKind::adam) != run(nn::OptimizerKind::rmsprop));
  }
}

TEST_CASE("gradient clipping") {
  nn::Parameter p(Tensor({2}));
  p.grad = Tensor::vector({3, 4});
  nn::ParameterList params{{"p", &p}};
  CHECK(nn::clip_grad_norm(params, 1.0) == doctest::Approx(5.0));
  CHECK(nn::grad_norm(params) == doctest::Approx(1.0));
  CHECK(p.grad[0] == doctest::Approx(0.6));
}

TEST_CASE("checkpoint blocks") {
  nn::Rng rng(4);
  nn::Mlp a(3, 4, 2, rng);
  nn::Mlp b(3, 4, 2, rng);
  nn::ParameterList pa, pb;
  a.collect(pa, "m");
  b.collect(pb, "m");
  std::stringstream ss;
  {
    nn::CheckpointWriter w(ss);
    w.params("net", pa);
    w.text("note", "hello\nworld");
  }
  const std::string bytes = ss.str();

  SUBCASE("round trip restores parameters bitwise") {
    std::istringstream in(bytes);
    nn::CheckpointReader r(in);
    r.load_params("net", pb);
    CHECK(nn::parameter_hash(pa) == nn::parameter_hash(pb));
    CHECK(r.expect("text", "note").text == "hello\nworld");
    CHECK_FALSE(r.next().has_value());
  }
  SUBCASE("corrupted header") {
    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream in(bad);
    nn::CheckpointReader r(in);
    CHECK_THROWS_AS(r.load_params("net", pb), IoError);
  }
  SUBCASE("version mismatch") {
    std::string bad = bytes;
    bad.replace(bad.find("SMCK 1"), 6, "SMCK 9");
    std::istringstream in(bad);
    nn::CheckpointReader r(in);
    CHECK_THROWS_AS(r.next(), IoError);
  }
  SUBCASE("truncated payload") {
    std::istringstream in(bytes.substr(0, bytes.size() / 2));
    nn::CheckpointReader r(in);
    CHECK_THROWS_AS(r.load_params("net", pb), IoError);
  }
  SUBCASE("shape table mismatch") {
    nn::Mlp c(3, 5, 2, rng);
    nn::ParameterList pc;
    c.collect(pc, "m");
    std::istringstream in(bytes);
    nn::CheckpointReader r(in);
    CHECK_THROWS_AS(r.load_params("net", pc), IoError);
  }
}

TEST_CASE("rng streams") {
  nn::Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  const nn::Rng restored = nn::Rng::deserialize(a.serialize());
  CHECK(restored == a);
  CHECK(a.fork(1).next_u64() != a.fork(2).next_u64());
  for (int i = 0; i < 1000; ++i) CHECK(a.below(3) < 3u);
}
