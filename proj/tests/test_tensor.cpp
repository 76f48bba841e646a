#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "wctdef/ops.hpp"
#include "wctdef/rng.hpp"
#include "wctdef/tensor.hpp"

using namespace wctdef;
using gradcheck::max_grad_err;
using gradcheck::random_tensor;

TEST_CASE("matmul identity and hand cases") {
  auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from_data({2, 2}, {3, 4, 5, 6});
  auto out = matmul(eye, m);
  CHECK(out.data() == std::vector<double>{3, 4, 5, 6});

  auto a = Tensor::from_data({1, 2}, {1, 2});
  auto b = Tensor::from_data({2, 1}, {3, 4});
  CHECK(matmul(a, b).item() == 11.0);

  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), DimensionError);
}

TEST_CASE("matmul gradient vs central differences") {
  Rng rng(derive_seed(7, "test.matmul"));
  auto a = random_tensor({4, 5}, rng, -1, 1, true);
  auto b = random_tensor({5, 3}, rng, -1, 1, true);
  auto w = random_tensor({4, 3}, rng);  // scalarizer weights

  auto forward = [&] { return sum(mul(matmul(a, b), w)).item(); };
  {
    Tape tape;
    tape.backward(sum(mul(matmul(a, b), w)));
  }
  CHECK(max_grad_err(a, forward) < 1e-4);
  CHECK(max_grad_err(b, forward) < 1e-4);
}

TEST_CASE("conv2d 1x1 kernel scales the input") {
  auto in = Tensor::filled({1, 3, 3}, 1.0);
  auto k = Tensor::from_data({1, 1, 1, 1}, {2.0});
  auto bias = Tensor::zeros({1});
  auto out = conv2d(in, k, bias, 0);
  REQUIRE(out.shape() == Shape{1, 3, 3});
  for (size_t i = 0; i < 9; ++i) CHECK(out.at(i) == 2.0);
}

TEST_CASE("conv2d impulse response (cross-correlation)") {
  // delta at the center; out[c+dy][c+dx] = K[1-dy][1-dx]
  auto in = Tensor::zeros({1, 5, 5});
  in.at(2 * 5 + 2) = 1.0;
  auto k = Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto out = conv2d(in, k, Tensor::zeros({1}), 1);
  REQUIRE(out.shape() == Shape{1, 5, 5});
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const double got = out.at((2 + dy) * 5 + (2 + dx));
      const double want = k.at((1 - dy) * 3 + (1 - dx));
      CHECK(got == want);
    }
  // symmetric kernel: response is the kernel itself, centered
  auto ks = Tensor::from_data({1, 1, 3, 3}, {1, 2, 1, 2, 5, 2, 1, 2, 1});
  auto outs = conv2d(in, ks, Tensor::zeros({1}), 1);
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      CHECK(outs.at((2 + dy) * 5 + (2 + dx)) ==
            ks.at((1 + dy) * 3 + (1 + dx)));
}

TEST_CASE("conv2d output shape and channel mismatch") {
  auto in = Tensor::zeros({2, 5, 5});
  auto k = Tensor::zeros({3, 2, 3, 3});
  auto out = conv2d(in, k, Tensor::zeros({3}), 1);
  CHECK(out.shape() == Shape{3, 5, 5});
  auto bad = Tensor::zeros({3, 4, 3, 3});
  CHECK_THROWS_AS(conv2d(in, bad, Tensor::zeros({3}), 1), DimensionError);
}

TEST_CASE("conv2d gradients vs central differences") {
  Rng rng(derive_seed(7, "test.conv"));
  auto in = random_tensor({2, 5, 5}, rng, -1, 1, true);
  auto k = random_tensor({3, 2, 3, 3}, rng, -1, 1, true);
  auto bias = random_tensor({3}, rng, -1, 1, true);
  auto w = random_tensor({3, 5, 5}, rng);

  auto forward = [&] { return sum(mul(conv2d(in, k, bias, 1), w)).item(); };
  {
    Tape tape;
    tape.backward(sum(mul(conv2d(in, k, bias, 1), w)));
  }
  CHECK(max_grad_err(in, forward) < 1e-4);
  CHECK(max_grad_err(k, forward) < 1e-4);
  CHECK(max_grad_err(bias, forward) < 1e-4);
}

TEST_CASE("relu forward and gradient") {
  auto x = Tensor::from_data({3}, {-1, 0, 2});
  auto out = relu(x);
  CHECK(out.data() == std::vector<double>{0, 0, 2});

  Rng rng(derive_seed(7, "test.relu"));
  // keep samples away from the kink
  std::vector<double> v(16);
  for (double& e : v) {
    do {
      e = rng.uniform(-1, 1);
    } while (std::abs(e) < 1e-3);
  }
  auto y = Tensor::from_data({16}, v, true);
  auto w = random_tensor({16}, rng);
  auto forward = [&] { return sum(mul(relu(y), w)).item(); };
  {
    Tape tape;
    tape.backward(sum(mul(relu(y), w)));
  }
  CHECK(max_grad_err(y, forward) < 1e-4);
}

TEST_CASE("tanh gradient") {
  Rng rng(derive_seed(7, "test.tanh"));
  auto x = random_tensor({12}, rng, -2, 2, true);
  auto w = random_tensor({12}, rng);
  auto forward = [&] { return sum(mul(tanh(x), w)).item(); };
  {
    Tape tape;
    tape.backward(sum(mul(tanh(x), w)));
  }
  CHECK(max_grad_err(x, forward) < 1e-4);
}

TEST_CASE("linear gradient") {
  Rng rng(derive_seed(7, "test.linear"));
  auto w = random_tensor({4, 6}, rng, -1, 1, true);
  auto x = random_tensor({6}, rng, -1, 1, true);
  auto b = random_tensor({4}, rng, -1, 1, true);
  auto s = random_tensor({4}, rng);
  auto forward = [&] { return sum(mul(linear(w, x, b), s)).item(); };
  {
    Tape tape;
    tape.backward(sum(mul(linear(w, x, b), s)));
  }
  CHECK(max_grad_err(w, forward) < 1e-4);
  CHECK(max_grad_err(x, forward) < 1e-4);
  CHECK(max_grad_err(b, forward) < 1e-4);
}

TEST_CASE("maxpool2 forward, odd dims, gradient") {
  auto x = Tensor::from_data({1, 2, 4}, {1, 5, 2, 0, 3, 4, 1, 7});
  auto out = maxpool2(x);
  REQUIRE(out.shape() == Shape{1, 1, 2});
  CHECK(out.data() == std::vector<double>{5, 7});

  // odd spatial dims: virtual -inf padding
  auto odd = Tensor::from_data({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto oout = maxpool2(odd);
  REQUIRE(oout.shape() == Shape{1, 2, 2});
  CHECK(oout.data() == std::vector<double>{5, 6, 8, 9});

  // gradient vs finite differences, samples spaced away from ties
  Rng rng(derive_seed(7, "test.maxpool"));
  std::vector<double> v;
  for (;;) {
    v.resize(16);
    for (double& e : v) e = rng.uniform(-1, 1);
    bool ok = true;
    for (size_t i = 0; i < 16 && ok; ++i)
      for (size_t j = i + 1; j < 16; ++j)
        if (std::abs(v[i] - v[j]) < 2e-3) {
          ok = false;
          break;
        }
    if (ok) break;
  }
  auto y = Tensor::from_data({1, 4, 4}, v, true);
  auto w = random_tensor({1, 2, 2}, rng);
  auto forward = [&] { return sum(mul(maxpool2(y), w)).item(); };
  {
    Tape tape;
    tape.backward(sum(mul(maxpool2(y), w)));
  }
  CHECK(max_grad_err(y, forward) < 1e-4);
}

TEST_CASE("maxpool2 tie gradient goes to first position in window order") {
  auto x = Tensor::from_data({1, 2, 2}, {3, 3, 3, 3}, true);
  {
    Tape tape;
    tape.backward(sum(maxpool2(x)));
  }
  CHECK(x.grad() == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("softmax_xent uniform logits and gradient") {
  auto logits = Tensor::filled({10}, 0.42);
  for (size_t label = 0; label < 10; label += 3)
    CHECK(softmax_xent(logits, label).item() ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));
  CHECK_THROWS_AS(softmax_xent(logits, 10), IndexError);

  Rng rng(derive_seed(7, "test.xent"));
  auto z = random_tensor({10}, rng, -2, 2, true);
  auto forward = [&] { return softmax_xent(z, 3).item(); };
  {
    Tape tape;
    tape.backward(softmax_xent(z, 3));
  }
  CHECK(max_grad_err(z, forward) < 1e-4);
}

TEST_CASE("select and max_except") {
  auto x = Tensor::from_data({4}, {1, 9, 2, 9});
  CHECK(select(x, 2).item() == 2.0);
  CHECK(max_except(x, 1).item() == 9.0);  // picks index 3
  CHECK(max_except(x, 0).item() == 9.0);  // tie -> index 1
  CHECK_THROWS_AS(select(x, 4), IndexError);

  auto y = Tensor::from_data({4}, {1, 9, 2, 8}, true);
  {
    Tape tape;
    tape.backward(max_except(y, 1));
  }
  CHECK(y.grad() == std::vector<double>{0, 0, 0, 1});
}

TEST_CASE("backward of sum gives ones; dot gives 2x") {
  auto x = Tensor::from_data({4}, {1, 2, 3, 4}, true);
  {
    Tape tape;
    tape.backward(sum(x));
  }
  CHECK(x.grad() == std::vector<double>{1, 1, 1, 1});

  auto y = Tensor::from_data({3}, {1.5, -2.0, 0.5}, true);
  {
    Tape tape;
    tape.backward(sum(mul(y, y)));
  }
  CHECK(y.grad() == std::vector<double>{3.0, -4.0, 1.0});
}

TEST_CASE("backward contract errors") {
  auto x = Tensor::from_data({3}, {1, 2, 3}, true);
  Tape tape;
  auto out = mul(x, x);
  CHECK_THROWS_AS(tape.backward(out), ContractError);        // non-scalar
  CHECK_THROWS_AS(backward(Tensor::scalar(1.0)), ContractError);  // off-tape
}

TEST_CASE("backward with no active tape") {
  CHECK_THROWS_AS(backward(Tensor::scalar(1.0, true)), ContractError);
}

TEST_CASE("gradient additivity across independent graphs") {
  Rng rng(derive_seed(7, "test.additivity"));
  auto x = random_tensor({6}, rng, -1, 1, true);
  auto y = random_tensor({6}, rng, -1, 1, true);

  std::vector<double> gx_separate, gy_separate;
  {
    Tape tape;
    tape.backward(sum(mul(x, x)));
    gx_separate = x.grad();
  }
  x.zero_grad();
  {
    Tape tape;
    tape.backward(sum(mul(y, y)));
    gy_separate = y.grad();
  }
  y.zero_grad();
  {
    Tape tape;
    tape.backward(add(sum(mul(x, x)), sum(mul(y, y))));
  }
  CHECK(x.grad() == gx_separate);
  CHECK(y.grad() == gy_separate);
}

TEST_CASE("grads accumulate until reset; off-path tensors stay zero") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  auto bystander = Tensor::from_data({2}, {5, 5}, true);
  {
    Tape tape;
    tape.backward(sum(x));
  }
  {
    Tape tape;
    tape.backward(sum(x));
  }
  CHECK(x.grad() == std::vector<double>{2, 2});
  if (bystander.has_grad())
    CHECK(bystander.grad() == std::vector<double>{0, 0});
}

TEST_CASE("forward is deterministic bit-for-bit") {
  Rng rng(derive_seed(7, "test.determinism"));
  auto in = random_tensor({2, 6, 6}, rng);
  auto k = random_tensor({4, 2, 3, 3}, rng);
  auto b = random_tensor({4}, rng);
  auto r1 = conv2d(in, k, b, 1);
  auto r2 = conv2d(in, k, b, 1);
  CHECK(r1.data() == r2.data());
}

TEST_CASE("reshape round trip passes gradient through") {
  auto x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  {
    Tape tape;
    auto flat = reshape(x, {6});
    tape.backward(select(flat, 4));
  }
  CHECK(x.grad() == std::vector<double>{0, 0, 0, 0, 1, 0});
  CHECK_THROWS_AS(reshape(x, {7}), DimensionError);
}
