#pragma once

#include <random>
#include <vector>

#include "mexa/array.hpp"
#include "mexa/config.hpp"
#include "mexa/dataset.hpp"
#include "mexa/rng.hpp"

namespace mexa::testing {

inline Array random_array(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Array a(std::move(shape));
  for (auto& x : a.data()) x = n(rng);
  return a;
}

/// Small model that keeps unit tests fast.
inline RunConfig tiny_config() {
  RunConfig c;
  c.d_model = 8;
  c.heads = 2;
  c.layers = 1;
  c.ffn = 8;
  c.caps = {3, 3, 4, 2};
  return c;
}

inline data::Dataset tiny_dataset(std::size_t n, std::uint64_t seed, double separability = 1.0) {
  data::SynthOptions o;
  o.n = n;
  o.seed = seed;
  o.separability = separability;
  o.d_mol = 6;
  o.d_dis = 5;
  o.d_txt = 7;
  return data::synthesize(o);
}

}  // namespace mexa::testing
