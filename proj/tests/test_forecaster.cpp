#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cafht/forecaster.hpp"
#include "cafht/rng.hpp"

using namespace cafht;

namespace {

// Rolls the AR(3) recursion with zero pre-history from a given initial shock;
// such data satisfies the model exactly, including the zero-padded early
// windows the fit sees.
TrajectorySet exact_ar3_set(int n, int T, double a1, double a2, double a3, Rng& rng) {
  TrajectorySet set;
  for (int i = 0; i < n; ++i) {
    Trajectory y(1, T);
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;
    for (int t = 0; t <= T; ++t) {
      double v = a1 * l1 + a2 * l2 + a3 * l3;
      if (t == 0) v = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      y.at(t, 0) = v;
      l3 = l2;
      l2 = l1;
      l1 = v;
    }
    set.items.push_back(std::move(y));
  }
  return set;
}

TrajectorySet noisy_set(int n, int T, int d, Rng& rng) {
  TrajectorySet set;
  for (int i = 0; i < n; ++i) {
    Trajectory y(d, T);
    for (int t = 0; t <= T; ++t)
      for (int j = 0; j < d; ++j)
        y.at(t, j) = 0.5 * (t > 0 ? y.at(t - 1, j) : 0.0) + rng.normal();
    set.items.push_back(std::move(y));
  }
  return set;
}

}  // namespace

TEST_CASE("normalizer maps the training range onto [-1, 1]", "[forecaster]") {
  TrajectorySet train;
  Trajectory y(2, 4);
  for (int t = 0; t <= 4; ++t) {
    y.at(t, 0) = 2.5 * t;  // spans [0, 10]
    y.at(t, 1) = 3.0;      // constant dimension
  }
  train.items.push_back(y);
  const Normalizer norm = Normalizer::fit(train);
  CHECK(norm.shift(0) == 5.0);
  CHECK(norm.scale(0) == 5.0);
  CHECK(norm.map_value(0, 10.0) == 1.0);
  CHECK(norm.map_value(0, 0.0) == -1.0);
  CHECK(norm.shift(1) == 3.0);
  CHECK(norm.scale(1) == 1.0);
  CHECK(norm.map_value(1, 3.0) == 0.0);

  SECTION("values outside the training range are not clipped") {
    CHECK(norm.map_value(0, 15.0) == 2.0);
    CHECK(norm.map_value(0, -5.0) == -2.0);
    Rng rng(5);
    double prev = norm.map_value(0, -20.0);
    for (double v = -19.0; v <= 20.0; v += 0.5) {
      const double m = norm.map_value(0, v);
      CHECK(m > prev);  // monotone affine
      prev = m;
    }
  }
  SECTION("round trip is the identity") {
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
      const double v = rng.uniform(-50.0, 50.0);
      CHECK_THAT(norm.unmap_value(0, norm.map_value(0, v)), Catch::Matchers::WithinAbs(v, 1e-12));
    }
  }
  SECTION("every training value maps inside the unit range") {
    const TrajectorySet mapped = norm.map(train);
    for (const Trajectory& m : mapped.items)
      for (int t = 0; t <= m.horizon(); ++t)
        for (int j = 0; j < m.dim(); ++j) CHECK(std::abs(m.at(t, j)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("least squares recovers an exact AR(3) law", "[forecaster]") {
  Rng rng(21);
  const TrajectorySet train = exact_ar3_set(12, 25, 0.9, 0.1, -0.2, rng);
  const ArForecaster f = ArForecaster::fit(train, 3, 0.0);
  CHECK_THAT(f.coef(0, 0), Catch::Matchers::WithinAbs(0.9, 1e-6));
  CHECK_THAT(f.coef(0, 1), Catch::Matchers::WithinAbs(0.1, 1e-6));
  CHECK_THAT(f.coef(0, 2), Catch::Matchers::WithinAbs(-0.2, 1e-6));
  CHECK_THAT(f.intercept(0), Catch::Matchers::WithinAbs(0.0, 1e-6));

  SECTION("multi-step prediction matches the rolled recursion") {
    const Trajectory& y = train.items[0];
    const int t0 = 10;
    const std::vector<double> pred = f.predict(y, t0, 3);
    for (int h = 0; h < 3; ++h)
      CHECK_THAT(pred[h], Catch::Matchers::WithinAbs(y.at(t0 + h, 0), 1e-6));
  }
}

TEST_CASE("constant series fits as intercept only", "[forecaster]") {
  TrajectorySet train;
  Trajectory y(1, 10);
  for (int t = 0; t <= 10; ++t) y.at(t, 0) = 4.2;
  train.items.push_back(y);
  const ArForecaster f = ArForecaster::fit(train);  // default ridge
  const std::vector<double> p = f.predict(y, 5, 2);
  CHECK_THAT(p[0], Catch::Matchers::WithinAbs(4.2, 1e-9));
  CHECK_THAT(p[1], Catch::Matchers::WithinAbs(4.2, 1e-9));

  SECTION("the same fit without ridge reports a singular system") {
    CHECK_THROWS_WITH(ArForecaster::fit(train, 3, 0.0),
                      Catch::Matchers::ContainsSubstring("ridge"));
  }
}

TEST_CASE("heavy ridge shrinks to the intercept", "[forecaster]") {
  Rng rng(22);
  const TrajectorySet train = noisy_set(20, 30, 1, rng);
  const ArForecaster f = ArForecaster::fit(train, 3, 1e12);
  for (int m = 0; m < 3; ++m) CHECK(std::abs(f.coef(0, m)) < 1e-6);
  // With slopes gone the intercept is the mean of all regression targets.
  double sum = 0.0;
  long count = 0;
  for (const Trajectory& y : train.items)
    for (int t = 1; t <= y.horizon(); ++t) {
      sum += y.at(t, 0);
      ++count;
    }
  CHECK_THAT(f.intercept(0), Catch::Matchers::WithinAbs(sum / count, 1e-6));
  const std::vector<double> p = f.predict(train.items[0], 7, 1);
  CHECK_THAT(p[0], Catch::Matchers::WithinAbs(f.intercept(0), 1e-6));
}

TEST_CASE("unpenalized residuals are orthogonal to the regressors", "[forecaster]") {
  Rng rng(23);
  const TrajectorySet train = noisy_set(15, 20, 2, rng);
  const ArForecaster f = ArForecaster::fit(train, 3, 0.0);
  for (int j = 0; j < 2; ++j) {
    double dot[4] = {0, 0, 0, 0};
    long rows = 0;
    for (const Trajectory& y : train.items)
      for (int t = 1; t <= y.horizon(); ++t) {
        double x[4] = {t - 1 >= 0 ? y.at(t - 1, j) : 0.0, t - 2 >= 0 ? y.at(t - 2, j) : 0.0,
                       t - 3 >= 0 ? y.at(t - 3, j) : 0.0, 1.0};
        double pred = f.intercept(j);
        for (int m = 0; m < 3; ++m) pred += f.coef(j, m) * x[m];
        const double r = y.at(t, j) - pred;
        for (int m = 0; m < 4; ++m) dot[m] += x[m] * r;
        ++rows;
      }
    for (int m = 0; m < 4; ++m) CHECK(std::abs(dot[m]) / rows < 1e-8);
  }
}

TEST_CASE("prediction is deterministic and validates its inputs", "[forecaster]") {
  Rng rng(24);
  const TrajectorySet train = noisy_set(10, 15, 1, rng);
  const ArForecaster f = ArForecaster::fit(train);
  const std::vector<double> a = f.predict(train.items[0], 8, 4);
  const std::vector<double> b = f.predict(train.items[0], 8, 4);
  CHECK(a == b);

  ArForecaster unfitted;
  CHECK_THROWS_AS(unfitted.predict(train.items[0], 3, 1), std::logic_error);
  CHECK_THROWS_AS(f.predict(train.items[0], 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(f.predict(train.items[0], 3, 0), std::invalid_argument);
}

TEST_CASE("zero-coefficient model predicts its intercept at every horizon", "[forecaster]") {
  ArForecaster f;
  f.restore(3, 0.0, {0.0, 0.0, 0.0}, {1.7});
  Trajectory y(1, 6);
  for (int t = 0; t <= 6; ++t) y.at(t, 0) = t;
  const std::vector<double> p = f.predict(y, 4, 5);
  for (double v : p) CHECK(v == 1.7);
}

TEST_CASE("external forecast table honors the contract", "[forecaster]") {
  ExternalForecasts table;
  const std::vector<double> v1{0.5, -0.5};
  const std::vector<double> v2{0.7, -0.7};
  table.add(9, 0, 1, v1);
  table.add(9, 0, 2, v2);
  const ExternalForecaster f(table, 9);
  CHECK(f.dim() == 2);
  Trajectory y(2, 4);
  const std::vector<double> p = f.predict(y, 1, 2);  // prefix of length 1 -> predictions made at t = 0
  CHECK(p == std::vector<double>{0.5, -0.5, 0.7, -0.7});
  CHECK_THROWS_WITH(f.predict(y, 2, 1), Catch::Matchers::ContainsSubstring("missing prediction"));
  const ExternalForecaster g(table, 8);
  CHECK_THROWS_WITH(g.predict(y, 1, 1), Catch::Matchers::ContainsSubstring("unknown trajectory"));
}
