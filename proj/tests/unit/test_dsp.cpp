#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "advdiv/dsp.hpp"
#include "advdiv/modem.hpp"

using namespace advdiv;
using Catch::Approx;

namespace {

SymbolVectors random_truth(int n_dim, int m_levels, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  const Constellation c(n_dim, m_levels);
  std::vector<std::size_t> symbols(count);
  for (auto& s : symbols) s = draw_symbol(rng, c.size());
  return amplitudes_of(c, symbols);
}

SymbolVectors mix(const Eigen::MatrixXd& r, const Eigen::VectorXd& c, const SymbolVectors& a) {
  return apply_equalizer(Equalizer{r, c, 0.0}, a);
}

}  // namespace

TEST_CASE("AGC undoes a uniform attenuation") {
  const auto a = random_truth(2, 4, 32, 1);
  SymbolVectors w = a;
  for (double& v : w.flat()) v *= 0.5;
  const auto r = agc(w, a, 32);
  REQUIRE(r.gain == 2.0);
  REQUIRE(r.vectors == a);

  const auto same = agc(a, a, 32);
  REQUIRE(same.gain == 1.0);
  REQUIRE(same.vectors == a);
}

TEST_CASE("AGC gain under small noise") {
  const auto a = random_truth(2, 4, 32, 2);
  Rng rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int rep = 0; rep < 200; ++rep) {
    SymbolVectors w = a;
    for (double& v : w.flat()) v = 0.5 * v + noise(rng);
    REQUIRE(std::abs(agc(w, a, 32).gain - 2.0) / 2.0 < 0.02);
  }
}

TEST_CASE("AGC is idempotent") {
  const auto a = random_truth(3, 4, 20, 4);
  Rng rng(5);
  std::normal_distribution<double> noise(0.0, 0.3);
  SymbolVectors w = a;
  for (double& v : w.flat()) v = 0.2 * v + noise(rng);
  const auto once = agc(w, a, 20);
  const auto twice = agc(once.vectors, a, 20);
  REQUIRE(std::abs(once.gain * twice.gain - once.gain) < 1e-9);
}

TEST_CASE("AGC only uses the pilot span") {
  auto a = random_truth(2, 4, 10, 6);
  SymbolVectors w = a;
  for (double& v : w.flat()) v *= 0.25;
  w[9][0] = 1000.0;
  REQUIRE(agc(w, a, 9).gain == 4.0);
}

TEST_CASE("AGC degenerate inputs") {
  const auto a = random_truth(2, 4, 8, 7);
  SymbolVectors zero(8, 2);
  REQUIRE_THROWS_AS(agc(zero, a, 8), NumericalError);
  // orthogonal to the pilots: zero correlation
  SymbolVectors t(2, 2), w(2, 2);
  t[0][0] = 1.0;
  t[1][0] = 1.0;
  w[0][1] = 1.0;
  w[1][1] = 1.0;
  REQUIRE_THROWS_AS(agc(w, t, 2), NumericalError);
  REQUIRE_THROWS_AS(agc(a, a, 9), BoundsError);
}

TEST_CASE("MMSE on an identity channel") {
  const auto a = random_truth(2, 4, 32, 8);
  const auto eq = train_mmse(a, a, 0.0);
  REQUIRE((eq.matrix - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(eq.bias.cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE(eq.training_mse < 1e-10);
  REQUIRE(eq.training_mse >= 0.0);
}

TEST_CASE("MMSE recovers the inverse of a random 4x4 mixing") {
  Rng rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd r(4, 4);
    for (Eigen::Index i = 0; i < 16; ++i) r.data()[i] = g(rng);
    r += 2.0 * Eigen::MatrixXd::Identity(4, 4);
    const auto a = random_truth(4, 2, 64, 100 + static_cast<std::uint64_t>(rep));
    const auto w = mix(r, Eigen::VectorXd::Zero(4), a);
    const auto eq = train_mmse(w, a, 0.0);
    const Eigen::MatrixXd expected = r.inverse();
    REQUIRE((eq.matrix - expected).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE((eq.matrix * r - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE(eq.training_mse < 1e-16);
  }
}

TEST_CASE("MMSE with identical pilots and no ridge is singular") {
  SymbolVectors a(16, 2);
  for (std::size_t k = 0; k < 16; ++k) {
    a[k][0] = 2.0;
    a[k][1] = 1.0;
  }
  REQUIRE_THROWS_AS(train_mmse(a, a, 0.0), NumericalError);
  try {
    train_mmse(a, a, 0.0);
  } catch (const NumericalError& e) {
    REQUIRE(std::string(e.what()).find("ridge") != std::string::npos);
  }
}

TEST_CASE("MMSE training needs N + 1 pilots") {
  const auto a = random_truth(3, 4, 3, 10);
  REQUIRE_THROWS_AS(train_mmse(a, a, 0.0), ConfigError);
}

TEST_CASE("MMSE solution is a stationary point of the regularized objective") {
  const auto a = random_truth(3, 4, 40, 11);
  Rng rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(3, 3) * 0.8;
  r(0, 1) = 0.3;
  r(2, 0) = -0.2;
  SymbolVectors w = mix(r, Eigen::VectorXd::Constant(3, 0.4), a);
  for (double& v : w.flat()) v += 0.2 * g(rng);

  const double ridge = 0.05;
  const auto eq = train_mmse(w, a, ridge);
  const double f0 = mmse_objective(eq, w, a, ridge);
  for (int rep = 0; rep < 200; ++rep) {
    Equalizer p = eq;
    Eigen::MatrixXd da(3, 3);
    for (Eigen::Index i = 0; i < 9; ++i) da.data()[i] = g(rng);
    da *= 1e-3 / da.norm();
    p.matrix += da;
    Eigen::VectorXd db(3);
    for (Eigen::Index i = 0; i < 3; ++i) db[i] = g(rng);
    p.bias += db * (1e-3 / db.norm()) * (rep % 2);
    REQUIRE(mmse_objective(p, w, a, ridge) >= f0 - 1e-9);
  }
}

TEST_CASE("trained equalizer maps noiseless observations onto the grid") {
  const Constellation c(3, 4);
  std::vector<std::size_t> all(c.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto truth = amplitudes_of(c, all);
  Eigen::MatrixXd r(3, 3);
  r << 0.7, 0.1, 0.0, 0.05, 0.6, 0.1, 0.0, 0.2, 0.9;
  Eigen::VectorXd offset(3);
  offset << 0.3, 0.1, 0.2;
  const auto w = mix(r, offset, truth);
  // train on four affinely independent points only
  const std::vector<std::size_t> pilots{0, 1, 4, 16};
  const auto pilot_w = mix(r, offset, amplitudes_of(c, pilots));
  const auto eq = train_mmse(pilot_w, amplitudes_of(c, pilots), 0.0);
  const auto out = apply_equalizer(eq, w);
  for (std::size_t i = 0; i < out.flat().size(); ++i) REQUIRE(std::abs(out.flat()[i] - truth.flat()[i]) < 1e-6);
}

TEST_CASE("apply_equalizer examples") {
  const auto a = random_truth(2, 4, 10, 13);
  REQUIRE(apply_equalizer(Equalizer::identity(2), a) == a);
  Equalizer constant{Eigen::MatrixXd::Zero(2, 2), Eigen::Vector2d(1.5, -2.0), 0.0};
  const auto out = apply_equalizer(constant, a);
  for (std::size_t k = 0; k < out.size(); ++k) {
    REQUIRE(out[k][0] == 1.5);
    REQUIRE(out[k][1] == -2.0);
  }
  REQUIRE_THROWS_AS(apply_equalizer(Equalizer::identity(3), a), ConfigError);
}

TEST_CASE("composition equals sequential application") {
  const auto a = random_truth(2, 4, 10, 14);
  Equalizer inner{Eigen::Matrix2d{{1.0, 0.5}, {0.0, 2.0}}, Eigen::Vector2d(0.1, 0.2), 0.0};
  Equalizer outer{Eigen::Matrix2d{{0.3, 0.0}, {-1.0, 1.0}}, Eigen::Vector2d(-0.5, 0.0), 0.0};
  const auto seq = apply_equalizer(outer, apply_equalizer(inner, a));
  const auto once = apply_equalizer(compose(outer, inner), a);
  for (std::size_t i = 0; i < seq.flat().size(); ++i) REQUIRE(once.flat()[i] == Approx(seq.flat()[i]).margin(1e-12));
}

TEST_CASE("default ridge and no-bias training") {
  const auto a = random_truth(2, 4, 32, 15);
  SymbolVectors w = a;
  for (double& v : w.flat()) v = 3.0 * v;
  const auto eq = train_mmse(w, a);
  REQUIRE((eq.matrix - Eigen::Matrix2d::Identity() / 3.0).cwiseAbs().maxCoeff() < 1e-5);
  const auto nb = train_mmse(w, a, 0.0, false);
  REQUIRE(nb.bias.isZero());
  REQUIRE((nb.matrix - Eigen::Matrix2d::Identity() / 3.0).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE_THROWS_AS(train_mmse(w, a, -1.0), ConfigError);
}
