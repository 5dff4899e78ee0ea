#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "regcp/random.hpp"
#include "regcp/synth.hpp"
#include "regcp/warp.hpp"

using namespace regcp;
using namespace testutil;

TEST_CASE("rng is reproducible and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  double sum = 0.0, sq = 0.0;
  Rng n(7);
  for (int i = 0; i < 20000; ++i) {
    const double z = n.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 20000) < 0.03);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);
}

TEST_CASE("noise level follows the protocol formula") {
  CHECK(synth_noise_sigma(3, 40.0) == doctest::Approx(std::sqrt(3.0) * 1e-2).epsilon(1e-12));
  CHECK(synth_noise_sigma(3, 40.0) == doctest::Approx(0.01732).epsilon(1e-4));
  CHECK(synth_noise_sigma(2, std::numeric_limits<double>::infinity()) == 0.0);
}

TEST_CASE("generated data") {
  SynthConfig c;
  c.I = 6;
  c.J = 80;
  c.K = 5;
  c.R = 3;
  c.seed = 9;
  SUBCASE("noise-free tensor equals the ground-truth reconstruction") {
    c.snr_db = std::numeric_limits<double>::infinity();
    auto d = generate(c);
    auto exact = tensor_of(d.truth.model);
    double diff = 0.0;
    for (std::size_t n = 0; n < exact.size(); ++n) diff = std::max(diff, std::abs(exact.data()[n] - d.tensor.data()[n]));
    CHECK(diff <= 1e-12);
    CHECK(std::isinf(measured_snr(d.tensor, d.truth)));
  }
  SUBCASE("identity warps leave every slice equal to the template") {
    c.beta_intercept_range = {0.0, 0.0};
    c.beta_slope_range = {0.0, 0.0};
    auto d = generate(c);
    for (const auto& b : d.truth.model.B) CHECK((b - d.truth.Bstar).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("warped bumps") {
    auto d = generate(c);
    auto g = SampleGrid::uniform(c.J);
    for (std::size_t k = 0; k < c.K; ++k)
      for (std::size_t r = 0; r < c.R; ++r) {
        const double beta = d.truth.beta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
        const double mu = d.truth.modes[static_cast<Eigen::Index>(r)], s = d.truth.widths[static_cast<Eigen::Index>(r)];
        for (std::size_t j = 0; j < c.J; j += 7) {
          const double x = warp_eval_linear(beta, g[j]);
          CHECK(d.truth.model.B[k](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) ==
                doctest::Approx(std::exp(-0.5 * (x - mu) * (x - mu) / (s * s))).epsilon(1e-12));
        }
      }
    CHECK(d.truth.model.A.minCoeff() >= 0.0);
    CHECK(d.truth.model.C.minCoeff() >= 0.0);
  }
  SUBCASE("same seed, same tensor") {
    CHECK(generate(c).tensor.data() == generate(c).tensor.data());
    auto other = c;
    other.seed = 10;
    CHECK(generate(other).tensor.data() != generate(c).tensor.data());
  }
  SUBCASE("invalid dimensions") {
    c.I = 0;
    CHECK_THROWS_AS(generate(c), ValidationError);
  }
}

TEST_CASE("measured SNR") {
  SynthConfig c;
  c.snr_db = 20.0;
  c.seed = 4;
  auto d = generate(c);
  // direct energy ratio against the noise level actually used
  const auto exact = tensor_of(d.truth.model);
  const double implied =
      10.0 * std::log10(exact.frobenius_norm_sq() / (static_cast<double>(exact.size()) * d.truth.noise_sigma * d.truth.noise_sigma));
  CHECK(std::abs(measured_snr(d.tensor, d.truth) - implied) <= 1.0);

  auto louder = c;
  louder.snr_db = c.snr_db - 20.0 * std::log10(2.0);
  auto d2 = generate(louder);
  CHECK(measured_snr(d.tensor, d.truth) - measured_snr(d2.tensor, d2.truth) == doctest::Approx(6.02).epsilon(0.3 / 6.02));
}
