#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mexa/encoder_bank.hpp"
#include "mexa/errors.hpp"
#include "mexa/gradcheck.hpp"
#include "mexa/model.hpp"
#include "test_util.hpp"

namespace mexa::model {
namespace {

using mexa::testing::random_array;

EncoderShape shape(std::size_t input_dim, NormPlacement norm = NormPlacement::kPre, bool equalized = true) {
  EncoderShape s;
  s.input_dim = input_dim;
  s.norm = norm;
  s.equalized = equalized;
  return s;
}

// Rows of x[B×L×d] for batch b.
std::vector<double> row(const Array& x, std::size_t b, std::size_t l) {
  const std::size_t len = x.dim(1), d = x.dim(2);
  const auto start = x.vec().begin() + static_cast<std::ptrdiff_t>((b * len + l) * d);
  return {start, start + static_cast<std::ptrdiff_t>(d)};
}

TEST(PositionalEncoding, Values) {
  const Array pe = sinusoidal_pe(6, 8);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(pe.at(0, i), i % 2 == 0 ? 0.0 : 1.0);
  EXPECT_EQ(pe.at(1, 0), std::sin(1.0));
  EXPECT_NEAR(pe.at(1, 0), 0.8415, 5e-5);
  EXPECT_EQ(pe.at(3, 5), std::cos(3.0 / std::pow(10000.0, 4.0 / 8.0)));
  for (double v : sinusoidal_pe(50, 16).data()) EXPECT_LE(std::abs(v), 1.0);
  EXPECT_THROW(sinusoidal_pe(3, 7), ConfigError);
}

class EncoderLayouts : public ::testing::TestWithParam<NormPlacement> {};

TEST_P(EncoderLayouts, ShapeAndPaddingRowsZero) {
  Rng rng(1);
  const EncoderStack stack = EncoderStack::create("enc", shape(6, GetParam()), rng);
  Mask m({2, 5}, std::vector<std::uint8_t>{1, 1, 0, 0, 0, 1, 1, 1, 1, 1});
  const Array y = encode_mode(stack, Tensor::constant(random_array({2, 5, 6}, 2)), m).value();
  EXPECT_EQ(y.shape(), (Shape{2, 5, 32}));
  for (std::size_t l = 2; l < 5; ++l) {
    for (double v : row(y, 0, l)) EXPECT_EQ(v, 0.0);
  }
}

TEST_P(EncoderLayouts, PermutationEquivarianceExact) {
  Rng rng(3);
  const EncoderStack stack = EncoderStack::create("enc", shape(4, GetParam()), rng);
  const Array x = random_array({2, 5, 4}, 4);
  Mask m({2, 5}, std::vector<std::uint8_t>{1, 1, 1, 1, 0, 1, 1, 1, 1, 1});
  const Array y = encode_mode(stack, Tensor::constant(x), m).value();
  // Every permutation of the valid rows of each trial.
  for (std::size_t b = 0; b < 2; ++b) {
    const std::size_t valid = b == 0 ? 4 : 5;
    std::vector<std::size_t> perm(valid);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    do {
      Array xs = x;
      for (std::size_t l = 0; l < valid; ++l) {
        for (std::size_t k = 0; k < 4; ++k) xs[(b * 5 + l) * 4 + k] = x[(b * 5 + perm[l]) * 4 + k];
      }
      const Array ys = encode_mode(stack, Tensor::constant(xs), m).value();
      for (std::size_t l = 0; l < valid; ++l) ASSERT_EQ(row(ys, b, l), row(y, b, perm[l]));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_P(EncoderLayouts, PaddingExtensionInvarianceExact) {
  Rng rng(5);
  const EncoderStack stack = EncoderStack::create("enc", shape(4, GetParam()), rng);
  const Array x = random_array({1, 3, 4}, 6);
  Mask m({1, 3}, std::vector<std::uint8_t>{1, 1, 0});
  Array wide({1, 7, 4}, 0.0);
  for (std::size_t i = 0; i < 12; ++i) wide[i] = x[i];
  for (std::size_t i = 12; i < 28; ++i) wide[i] = 100.0 + static_cast<double>(i);  // junk under padding
  Mask mw({1, 7}, std::vector<std::uint8_t>{1, 1, 0, 0, 0, 0, 0});
  for (bool pe : {false, true}) {
    const Array y = encode(stack, Tensor::constant(x), m, pe).value();
    const Array yw = encode(stack, Tensor::constant(wide), mw, pe).value();
    EXPECT_EQ(row(yw, 0, 0), row(y, 0, 0));
    EXPECT_EQ(row(yw, 0, 1), row(y, 0, 1));
  }
}

TEST_P(EncoderLayouts, SingleTokenEqualsEncodingAlone) {
  Rng rng(7);
  const EncoderStack stack = EncoderStack::create("enc", shape(4, GetParam()), rng);
  const Array x = random_array({1, 5, 4}, 8);
  Mask m({1, 5}, std::vector<std::uint8_t>{1, 0, 0, 0, 0});
  Array alone({1, 1, 4});
  for (std::size_t k = 0; k < 4; ++k) alone[k] = x[k];
  const Array y = encode_mode(stack, Tensor::constant(x), m).value();
  const Array ya = encode_mode(stack, Tensor::constant(alone), Mask({1, 1}, true)).value();
  EXPECT_EQ(row(y, 0, 0), row(ya, 0, 0));
}

TEST_P(EncoderLayouts, AllMaskedInputGivesZeroRows) {
  Rng rng(9);
  const EncoderStack stack = EncoderStack::create("enc", shape(4, GetParam()), rng);
  const Array y = encode_mode(stack, Tensor::constant(random_array({1, 3, 4}, 10)), Mask({1, 3}, false)).value();
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST_P(EncoderLayouts, GradientCheck) {
  EncoderShape s = shape(3, GetParam());
  s.d_model = 4;
  s.ffn = 5;
  s.layers = 2;
  Rng rng(11);
  const EncoderStack stack = EncoderStack::create("enc", s, rng);
  ParamList params;
  stack.collect(params);
  const Tensor x = Tensor::constant(random_array({2, 3, 3}, 12));
  const Tensor w = Tensor::constant(random_array({2, 3, 4}, 13));
  Mask m({2, 3}, std::vector<std::uint8_t>{1, 1, 0, 1, 1, 1});
  const auto r = ad::check_gradients([&] { return ad::sum(ad::mul(encode(stack, x, m, true), w)); }, params);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Layouts, EncoderLayouts, ::testing::Values(NormPlacement::kPre, NormPlacement::kPost));

TEST(EncoderBank, EqualizedParametrizationStartsFromSameFunction) {
  for (NormPlacement norm : {NormPlacement::kPre, NormPlacement::kPost}) {
    Rng a(21), b(21);
    const EncoderStack eq = EncoderStack::create("enc", shape(6, norm, true), a);
    const EncoderStack plain = EncoderStack::create("enc", shape(6, norm, false), b);
    const Tensor x = Tensor::constant(random_array({2, 4, 6}, 22));
    Mask m({2, 4}, true);
    const Array ye = encode(eq, x, m, true).value();
    const Array yp = encode(plain, x, m, true).value();
    for (std::size_t i = 0; i < ye.size(); ++i) EXPECT_NEAR(ye[i], yp[i], 1e-12);
    // Stored weights differ by √fan_in.
    EXPECT_NEAR(eq.w_in.value()[0], plain.w_in.value()[0] * std::sqrt(6.0), 1e-12);
  }
}

TEST(EncoderBank, ParameterCountDeterministic) {
  Rng a(1), b(99);
  ParamList pa, pb, post;
  EncoderStack::create("enc", shape(6), a).collect(pa);
  EncoderStack::create("enc", shape(6), b).collect(pb);
  Rng c(1);
  EncoderStack::create("enc", shape(6, NormPlacement::kPost), c).collect(post);
  auto count = [](const ParamList& ps) {
    std::size_t n = 0;
    for (const auto& t : ps) n += t.size();
    return n;
  };
  // in: 6·32+32; per layer: 2 heads·3·(32·16+16) + 32·32+32 + 4·32 + 32·32+32 + 32·32+32.
  const std::size_t layer = 2 * 3 * (32 * 16 + 16) + (32 * 32 + 32) + 4 * 32 + (32 * 32 + 32) + (32 * 32 + 32);
  EXPECT_EQ(count(post), 6 * 32 + 32 + 2 * layer);
  EXPECT_EQ(count(pa), count(post) + 2 * 32);  // final LN under pre-norm
  EXPECT_EQ(count(pa), count(pb));
}

TEST(EncoderBank, CriteriaSiameseAndShapes) {
  Rng rng(31);
  const EncoderStack stack = EncoderStack::create("crit", shape(7), rng);
  Array inc = random_array({1, 8, 7}, 32);
  Array exc({1, 5, 7});
  for (std::size_t i = 0; i < exc.size(); ++i) exc[i] = inc[i];
  Mask mi({1, 8}, std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0, 0, 0});
  Mask me({1, 5}, true);
  for (bool pe : {false, true}) {
    const CriteriaEncoding enc = encode_criteria(stack, Tensor::constant(inc), Tensor::constant(exc), mi, me, pe);
    EXPECT_EQ(enc.combined.shape(), (Shape{1, 13, 32}));
    EXPECT_EQ(enc.combined_mask.bits,
              (std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0, 0, 0, 1, 1, 1, 1, 1}));
    for (std::size_t l = 0; l < 5; ++l) EXPECT_EQ(row(enc.inclusion.value(), 0, l), row(enc.exclusion.value(), 0, l));
    for (std::size_t l = 0; l < 13; ++l) {
      const auto expected = l < 8 ? row(enc.inclusion.value(), 0, l) : row(enc.exclusion.value(), 0, l - 8);
      EXPECT_EQ(row(enc.combined.value(), 0, l), expected);
    }
  }
}

TEST(EncoderBank, PositionalEmbeddingBreaksEquivariance) {
  Rng rng(41);
  const EncoderStack stack = EncoderStack::create("crit", shape(4), rng);
  const Array x = random_array({1, 3, 4}, 42);
  Array xs = x;
  for (std::size_t k = 0; k < 4; ++k) std::swap(xs[k], xs[4 + k]);
  Mask m({1, 3}, true);
  const Array y = encode(stack, Tensor::constant(x), m, true).value();
  const Array ys = encode(stack, Tensor::constant(xs), m, true).value();
  EXPECT_NE(row(ys, 0, 0), row(y, 0, 1));
  const Array n = encode(stack, Tensor::constant(x), m, false).value();
  const Array ns = encode(stack, Tensor::constant(xs), m, false).value();
  EXPECT_EQ(row(ns, 0, 0), row(n, 0, 1));
}

TEST(EncoderBank, SiameseGradientStepMovesSharedTensorsOnce) {
  // One tensor set serves both lists: the gradient is the sum of both paths.
  EncoderShape s = shape(3);
  s.d_model = 4;
  s.ffn = 4;
  s.layers = 1;
  Rng rng(51);
  const EncoderStack stack = EncoderStack::create("crit", s, rng);
  ParamList params;
  stack.collect(params);
  const Tensor inc = Tensor::constant(random_array({1, 2, 3}, 52));
  const Tensor exc = Tensor::constant(random_array({1, 2, 3}, 53));
  Mask m({1, 2}, true);
  auto grads = [&](bool use_inc, bool use_exc) {
    for (auto& p : params) p.zero_grad();
    const CriteriaEncoding e = encode_criteria(stack, inc, exc, m, m, true);
    Tensor loss;
    if (use_inc) loss = ad::sum(ad::mul(e.inclusion, e.inclusion));
    if (use_exc) {
      const Tensor t = ad::sum(ad::mul(e.exclusion, e.exclusion));
      loss = loss.defined() ? ad::add(loss, t) : t;
    }
    loss.backward();
    std::vector<double> out;
    for (auto& p : params) {
      const Array g = p.grad();
      out.insert(out.end(), g.vec().begin(), g.vec().end());
    }
    return out;
  };
  const auto gi = grads(true, false), ge = grads(false, true), both = grads(true, true);
  for (std::size_t i = 0; i < both.size(); ++i) EXPECT_NEAR(both[i], gi[i] + ge[i], 1e-12);
}

TEST(EncoderBank, ErrorsOnBadShapes) {
  Rng rng(61);
  EncoderShape s = shape(4);
  s.heads = 3;
  EXPECT_THROW(EncoderStack::create("enc", s, rng), ConfigError);
  const EncoderStack stack = EncoderStack::create("enc", shape(4), rng);
  EXPECT_THROW(encode_mode(stack, Tensor::constant(Array({1, 2, 5})), Mask({1, 2}, true)), DimensionError);
  EXPECT_THROW(encode_mode(stack, Tensor::constant(Array({1, 2, 4})), Mask({1, 3}, true)), DimensionError);
}

}  // namespace
}  // namespace mexa::model
