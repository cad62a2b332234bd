#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dua/autodiff.hpp"
#include "dua/error.hpp"
#include "dua/gradcheck.hpp"
#include "dua/ops.hpp"
#include "dua/rng.hpp"
#include "fixtures.hpp"
#include "gradient.hpp"
#include "reference.hpp"

namespace {

using namespace dua;
using dua::testing::check_graph;
using dua::testing::random_tensor;
using dua::testing::VarMap;

constexpr double kGradTol = 1e-4;

TEST(Tensor, ShapeAndElementCountAgree) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor::scalar(1).reshaped({2}), DimensionError);
  EXPECT_THROW(Tensor::vector({1, 2}).item(), DimensionError);
}

TEST(Tensor, FiniteCheck) {
  Tensor t = Tensor::vector({1, 2});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  t[1] = INFINITY;
  EXPECT_FALSE(t.all_finite());
}

TEST(Matmul, IdentityAndProjector) {
  ad::Tape tape;
  auto id = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  auto m = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(ops::matmul(id, m).value(), Tensor::matrix({{1, 2}, {3, 4}}));
  auto p = tape.constant(Tensor::matrix({{1, 0}, {0, 0}}));
  auto col = tape.constant(Tensor::matrix({{5}, {7}}));
  EXPECT_EQ(ops::matmul(p, col).value(), Tensor::matrix({{5}, {0}}));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 2});
    ad::Tape tape;
    Tensor c = ops::matmul(tape.constant(a), tape.constant(b)).value();
    ASSERT_EQ(c.shape(), (Shape{3, 2}));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
        EXPECT_NEAR(c.at(i, j), s, 1e-12);
      }
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  ad::Tape tape;
  auto a = tape.constant(Tensor({3, 4}));
  auto b = tape.constant(Tensor({3, 2}));
  try {
    ops::matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("3x4"), std::string::npos) << what;
    EXPECT_NE(what.find("3x2"), std::string::npos) << what;
  }
}

TEST(Activation, Examples) {
  ad::Tape tape;
  EXPECT_EQ(ops::sigmoid(tape.constant(Tensor::scalar(0))).value().item(), 0.5);
  EXPECT_EQ(ops::tanh(tape.constant(Tensor::scalar(0))).value().item(), 0.0);
  EXPECT_EQ(ops::relu(tape.constant(Tensor::vector({-1, 2}))).value(), Tensor::vector({0, 2}));
}

TEST(Activation, DerivativesAtKnownPoints) {
  for (auto [kind, x, want] : {std::tuple{ops::Activation::sigmoid, 0.0, 0.25},
                               std::tuple{ops::Activation::tanh, 0.0, 1.0},
                               std::tuple{ops::Activation::relu, 2.0, 1.0},
                               std::tuple{ops::Activation::relu, -2.0, 0.0}}) {
    ad::Tape tape;
    Tensor p = Tensor::scalar(x);
    auto v = tape.parameter("x", p);
    auto g = tape.backward(ops::sum(ops::apply_activation(kind, v)));
    EXPECT_DOUBLE_EQ(g.at("x").item(), want);
  }
}

TEST(Softmax, Examples) {
  ad::Tape tape;
  EXPECT_EQ(ops::softmax(tape.constant(Tensor::vector({0, 0}))).value(), Tensor::vector({0.5, 0.5}));
  for (double c : {-50.0, 0.0, 3.5, 700.0})
    EXPECT_EQ(ops::softmax(tape.constant(Tensor::vector({c}))).value().item(), 1.0);
  EXPECT_THROW(ops::softmax(tape.constant(Tensor({0}))), DimensionError);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    Tensor x = random_tensor(rng, {n}, 5.0);
    Tensor shifted = x;
    for (Real& v : shifted.data()) v += 100;
    ad::Tape tape;
    Tensor a = ops::softmax(tape.constant(x)).value();
    Tensor b = ops::softmax(tape.constant(shifted)).value();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GT(a[i], 0.0);
      EXPECT_NEAR(a[i], b[i], 1e-9);
      total += a[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Softmax, MaskedPositionsAreExactlyZero) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    std::vector<bool> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() < 0.6;
    mask[rng.below(n)] = true;
    ad::Tape tape;
    Tensor w = ops::masked_softmax(tape.constant(random_tensor(rng, {n}, 3.0)), mask).value();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) EXPECT_EQ(w[i], 0.0);
      total += w[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
  ad::Tape tape;
  EXPECT_THROW(ops::masked_softmax(tape.constant(Tensor::vector({1, 2})), {false, false}), ContractError);
}

TEST(Conv, Examples) {
  Rng rng(5);
  ad::Tape tape;
  auto zero = tape.constant(Tensor({5, 5}));
  auto k = tape.constant(random_tensor(rng, {3, 3}));
  EXPECT_EQ(ops::conv2d_valid(zero, k, tape.constant(Tensor::scalar(0))).value(), Tensor({3, 3}));

  Tensor in = random_tensor(rng, {4, 6});
  auto one = tape.constant(Tensor::matrix({{1}}));
  EXPECT_EQ(ops::conv2d_valid(tape.constant(in), one, tape.constant(Tensor::scalar(0))).value(), in);

  EXPECT_THROW(ops::conv2d_valid(tape.constant(Tensor({2, 5})), k, tape.constant(Tensor::scalar(0))),
               DimensionError);
}

TEST(Conv, MatchesLoopReference) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 3 + rng.below(6), w = 3 + rng.below(6);
    Tensor in = random_tensor(rng, {h, w}), k = random_tensor(rng, {3, 3});
    const double bias = rng.uniform(-1, 1);
    ad::Tape tape;
    Tensor out = ops::conv2d_valid(tape.constant(in), tape.constant(k), tape.constant(Tensor::scalar(bias))).value();
    const auto want = ref::conv_valid(ref::to_mat(in), ref::to_mat(k), bias);
    ASSERT_EQ(out.shape(), (Shape{h - 2, w - 2}));
    for (std::size_t i = 0; i < h - 2; ++i)
      for (std::size_t j = 0; j < w - 2; ++j) EXPECT_NEAR(out.at(i, j), want[i][j], 1e-12);
  }
}

TEST(Maxpool, Examples) {
  ad::Tape tape;
  EXPECT_EQ(ops::maxpool2d(tape.constant(Tensor::filled({6, 6}, 3)), 3).value(), Tensor::filled({2, 2}, 3));
  EXPECT_EQ(ops::maxpool2d(tape.constant(Tensor({48, 48})), 3).value().shape(), (Shape{16, 16}));
  EXPECT_EQ(ops::maxpool2d(tape.constant(Tensor({1, 1})), 3).value().shape(), (Shape{1, 1}));
}

TEST(Maxpool, MatchesLoopReferenceOnRaggedWindows) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 1 + rng.below(9), w = 1 + rng.below(9);
    Tensor in = random_tensor(rng, {h, w});
    ad::Tape tape;
    Tensor out = ops::maxpool2d(tape.constant(in), 3).value();
    const auto want = ref::maxpool(ref::to_mat(in), 3);
    ASSERT_EQ(out.shape(), (Shape{(h + 2) / 3, (w + 2) / 3}));
    for (std::size_t i = 0; i < out.dim(0); ++i)
      for (std::size_t j = 0; j < out.dim(1); ++j) EXPECT_EQ(out.at(i, j), want[i][j]);
  }
  Tensor seven = random_tensor(rng, {7, 7});
  ad::Tape tape;
  EXPECT_EQ(ops::maxpool2d(tape.constant(seven), 3).value().shape(), (Shape{3, 3}));
}

TEST(Maxpool, TieRoutesGradientToFirstMaximum) {
  Tensor x = Tensor::matrix({{1, 4, 4}, {4, 0, 2}, {4, 3, 4}});
  ad::Tape tape;
  auto v = tape.parameter("x", x);
  auto g = tape.backward(ops::sum(ops::maxpool2d(v, 3)));
  Tensor want({3, 3});
  want.at(0, 1) = 1;
  EXPECT_EQ(g.at("x"), want);
}

TEST(Backward, Examples) {
  {
    ad::Tape tape;
    Tensor x = Tensor::vector({3, -1, 2});
    auto g = tape.backward(ops::sum(tape.parameter("x", x)));
    EXPECT_EQ(g.at("x"), Tensor::filled({3}, 1));
  }
  {
    ad::Tape tape;
    Tensor x = Tensor::vector({1, 2});
    auto v = tape.parameter("x", x);
    auto g = tape.backward(ops::sum(ops::mul(v, v)));
    EXPECT_EQ(g.at("x"), Tensor::vector({2, 4}));
  }
}

TEST(Backward, UnusedParameterGetsZeros) {
  ad::Tape tape;
  Tensor x = Tensor::vector({1, 2}), y = Tensor::matrix({{1, 2}, {3, 4}});
  auto vx = tape.parameter("x", x);
  tape.parameter("y", y);
  auto g = tape.backward(ops::sum(vx));
  EXPECT_EQ(g.at("y"), Tensor({2, 2}));
}

TEST(Backward, NonScalarLossIsContractError) {
  ad::Tape tape;
  Tensor x = Tensor::vector({1, 2});
  EXPECT_THROW(tape.backward(tape.parameter("x", x)), ContractError);
}

TEST(Backward, DuplicateParameterNameRejected) {
  ad::Tape tape;
  Tensor x = Tensor::vector({1});
  tape.parameter("x", x);
  EXPECT_THROW(tape.parameter("x", x), ContractError);
}

TEST(Record, InputsPrecedeEveryNode) {
  Rng rng(8);
  ad::Tape tape;
  Tensor a = random_tensor(rng, {3, 3}), b = random_tensor(rng, {3});
  auto va = tape.parameter("a", a), vb = tape.parameter("b", b);
  auto h = ops::tanh(ops::add_rowvec(va, vb));
  ops::sum(ops::matmul(h, ops::softmax(vb)));
  for (std::size_t i = 0; i < tape.size(); ++i)
    for (std::size_t in : tape.inputs(i)) EXPECT_LT(in, i);
}

TEST(Record, FiniteGuardNamesProducingOp) {
  ad::Tape tape;
  tape.set_check_finite(true);
  auto x = tape.constant(Tensor::vector({1e308, 1e308}));
  try {
    ops::scale(x, 10);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.op(), "scale");
  }
  tape.set_check_finite(false);
  EXPECT_NO_THROW(ops::scale(x, 10));
}

TEST(Record, ReplayIsBitwiseDeterministic) {
  auto run = [] {
    Rng rng(9);
    Tensor a = random_tensor(rng, {4, 5}), k = random_tensor(rng, {3, 3});
    ad::Tape tape;
    auto va = tape.parameter("a", a), vk = tape.parameter("k", k);
    auto c = ops::relu(ops::conv2d_valid(va, vk, tape.constant(Tensor::scalar(0.1))));
    auto loss = ops::sum(ops::tanh(ops::maxpool2d(c, 2)));
    auto g = tape.backward(loss);
    return std::tuple{loss.value(), g.at("a"), g.at("k")};
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, Examples) {
  ParamMap p{{"t", Tensor::scalar(3)}};
  auto sq = dua::testing::check_graph(p, [](ad::Tape&, const VarMap& v) { return ops::sum(ops::mul(v.at("t"), v.at("t"))); });
  EXPECT_LT(sq.max_rel_error, 1e-8);

  ParamMap z{{"t", Tensor::scalar(0)}};
  ad::Tape tape;
  auto g = tape.backward(ops::sum(ops::sigmoid(tape.parameter("t", z.at("t")))));
  EXPECT_NEAR(g.at("t").item(), 0.25, 1e-12);
  auto sg = dua::testing::check_graph(z, [](ad::Tape&, const VarMap& v) { return ops::sum(ops::sigmoid(v.at("t"))); });
  EXPECT_LT(sg.max_rel_error, 1e-6);
}

TEST(GradCheck, ReportsWorstCoordinate) {
  ParamMap p{{"t", Tensor::vector({1, 2})}};
  ad::GradientMap wrong{{"t", Tensor::vector({1, 0})}};
  auto r = finite_diff_check([](const ParamMap& q) { return q.at("t")[0] * q.at("t")[0] + q.at("t")[1]; }, p,
                             wrong, 1e-6);
  EXPECT_EQ(r.worst_param, "t");
  EXPECT_EQ(r.worst_index, 1u);
  EXPECT_NEAR(r.numeric, 1.0, 1e-6);
  EXPECT_NEAR(r.max_rel_error, 1.0, 1e-6);
  EXPECT_NEAR(r.per_param.at("t"), 1.0, 1e-6);
}

TEST(GradCheck, NonDeterministicObjectiveRejected) {
  ParamMap p{{"t", Tensor::scalar(1)}};
  ad::GradientMap g{{"t", Tensor::scalar(0)}};
  int calls = 0;
  EXPECT_THROW(finite_diff_check([&](const ParamMap&) { return static_cast<Real>(++calls); }, p, g, 1e-6),
               ContractError);
  EXPECT_THROW(finite_diff_check([](const ParamMap&) { return Real(0); }, p, g, 0), ContractError);
}

// Gradient of every primitive against central differences on random inputs
// in [-1, 1]. Each loss contracts the output with a fixed random weight so
// that every output element contributes a distinct coefficient.
class PrimitiveGradient : public ::testing::TestWithParam<int> {};

ad::Var weighted(ad::Tape& tape, ad::Var out, std::uint64_t seed) {
  Rng rng(seed);
  return ops::sum(ops::mul(out, tape.constant(random_tensor(rng, out.shape()))));
}

struct Case {
  const char* name;
  std::map<std::string, Shape> shapes;
  dua::testing::GraphBuilder build;
};

std::vector<Case> primitive_cases() {
  using V = const VarMap&;
  return {
      {"matmul_mm", {{"a", {3, 4}}, {"b", {4, 2}}}, [](ad::Tape& t, V v) { return weighted(t, ops::matmul(v.at("a"), v.at("b")), 1); }},
      {"matmul_vm", {{"a", {4}}, {"b", {4, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::matmul(v.at("a"), v.at("b")), 2); }},
      {"matmul_mv", {{"a", {3, 4}}, {"b", {4}}}, [](ad::Tape& t, V v) { return weighted(t, ops::matmul(v.at("a"), v.at("b")), 3); }},
      {"transpose", {{"a", {2, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::transpose(v.at("a")), 4); }},
      {"add", {{"a", {2, 3}}, {"b", {2, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::add(v.at("a"), v.at("b")), 5); }},
      {"sub", {{"a", {3}}, {"b", {3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::sub(v.at("a"), v.at("b")), 6); }},
      {"mul", {{"a", {2, 3}}, {"b", {2, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::mul(v.at("a"), v.at("b")), 7); }},
      {"scale", {{"a", {4}}}, [](ad::Tape& t, V v) { return weighted(t, ops::scale(v.at("a"), -1.7), 8); }},
      {"one_minus", {{"a", {4}}}, [](ad::Tape& t, V v) { return weighted(t, ops::one_minus(v.at("a")), 9); }},
      {"add_rowvec", {{"m", {3, 2}}, {"v", {2}}}, [](ad::Tape& t, V v) { return weighted(t, ops::add_rowvec(v.at("m"), v.at("v")), 10); }},
      {"mul_rowvec", {{"m", {3, 2}}, {"v", {2}}}, [](ad::Tape& t, V v) { return weighted(t, ops::mul_rowvec(v.at("m"), v.at("v")), 11); }},
      {"concat_rowvec", {{"m", {3, 2}}, {"v", {3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::concat_rowvec(v.at("m"), v.at("v")), 12); }},
      {"sigmoid", {{"a", {5}}}, [](ad::Tape& t, V v) { return weighted(t, ops::sigmoid(v.at("a")), 13); }},
      {"tanh", {{"a", {2, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::tanh(v.at("a")), 14); }},
      {"relu", {{"a", {2, 4}}}, [](ad::Tape& t, V v) { return weighted(t, ops::relu(v.at("a")), 15); }},
      {"softmax", {{"a", {5}}}, [](ad::Tape& t, V v) { return weighted(t, ops::softmax(v.at("a")), 16); }},
      {"masked_softmax", {{"a", {5}}}, [](ad::Tape& t, V v) { return weighted(t, ops::masked_softmax(v.at("a"), {true, false, true, true, false}), 17); }},
      {"conv2d_valid", {{"x", {5, 6}}, {"k", {3, 3}}, {"b", Shape{}}}, [](ad::Tape& t, V v) { return weighted(t, ops::conv2d_valid(v.at("x"), v.at("k"), v.at("b")), 18); }},
      {"maxpool2d", {{"x", {5, 7}}}, [](ad::Tape& t, V v) { return weighted(t, ops::maxpool2d(v.at("x"), 3), 19); }},
      {"concat", {{"a", {2, 2}}, {"b", {3}}}, [](ad::Tape& t, V v) { std::vector<ad::Var> parts{v.at("a"), v.at("b")}; return weighted(t, ops::concat(parts), 20); }},
      {"flatten", {{"a", {2, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::flatten(v.at("a")), 21); }},
      {"row", {{"a", {3, 2}}}, [](ad::Tape& t, V v) { return weighted(t, ops::row(v.at("a"), 1), 22); }},
      {"stack_rows", {{"a", {3}}, {"b", {3}}}, [](ad::Tape& t, V v) { std::vector<ad::Var> rows{v.at("b"), v.at("a"), v.at("b")}; return weighted(t, ops::stack_rows(rows), 23); }},
      {"slice_rows", {{"a", {4, 2}}}, [](ad::Tape& t, V v) { return weighted(t, ops::slice_rows(v.at("a"), 1, 2), 24); }},
      {"pad_rows", {{"a", {2, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::pad_rows(v.at("a"), 4), 25); }},
      {"pad2d", {{"a", {2, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::pad2d(v.at("a"), 3, 5), 26); }},
      {"select3", {{"a", {2, 2, 3}}}, [](ad::Tape& t, V v) { return weighted(t, ops::select(v.at("a"), 1), 27); }},
      {"select1", {{"a", {4}}}, [](ad::Tape& t, V v) { return weighted(t, ops::select(v.at("a"), 2), 28); }},
      {"gather_rows", {{"e", {5, 3}}}, [](ad::Tape& t, V v) { std::vector<std::int32_t> ids{1, 4, 1, 0}; return weighted(t, ops::gather_rows(v.at("e"), ids), 29); }},
      {"cross_entropy", {{"z", {2}}}, [](ad::Tape&, V v) { return ops::cross_entropy(v.at("z"), 1); }},
      {"sum", {{"a", {2, 2}}}, [](ad::Tape&, V v) { return ops::sum(ops::mul(v.at("a"), v.at("a"))); }},
  };
}

TEST_P(PrimitiveGradient, MatchesFiniteDifferences) {
  const Case c = primitive_cases().at(static_cast<std::size_t>(GetParam()));
  Rng rng(100 + static_cast<std::uint64_t>(GetParam()));
  for (int trial = 0; trial < 5; ++trial) {
    ParamMap params;
    for (const auto& [name, shape] : c.shapes) params.emplace(name, random_tensor(rng, shape));
    const auto r = check_graph(params, c.build);
    EXPECT_LT(r.max_rel_error, kGradTol) << c.name << " worst " << r.worst_param << "[" << r.worst_index
                                         << "] analytic " << r.analytic << " numeric " << r.numeric;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient,
                         ::testing::Range(0, static_cast<int>(primitive_cases().size())),
                         [](const ::testing::TestParamInfo<int>& info) {
                           return std::string(primitive_cases().at(static_cast<std::size_t>(info.param)).name);
                         });

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.below(1000);
    EXPECT_EQ(x, b.below(1000));
    differs |= x != c.below(1000);
  }
  EXPECT_TRUE(differs);
  Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

}  // namespace
