#include <doctest.h>

#include "flowmc/rng.hpp"

using flowmc::RngStream;

TEST_CASE("same seed reproduces the sequence") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("different streams from one master seed decorrelate") {
  RngStream a(7, 0), b(7, 1);
  int equal = 0;
  for (int i = 0; i < 1000; ++i)
    if (a.next() == b.next()) ++equal;
  CHECK(equal == 0);
}

TEST_CASE("uniform stays in [0, 1) with plausible mean") {
  RngStream rng(3);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // mean 1/2, sd of the mean = 1/sqrt(12 n)
  CHECK(std::abs(sum / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal moments match N(0,1)") {
  RngStream rng(11);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::abs(s1 / n) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(s2 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 3.0 * std::sqrt(96.0 / n));  // var(x^4) = 105 - 9
}

TEST_CASE("normal_vector consumes a fixed amount of stream") {
  RngStream a(5), b(5);
  a.normal_vector(10);
  Eigen::VectorXd first = b.normal_vector(10);
  // same state afterwards
  CHECK(a.next() == b.next());
  CHECK(first.size() == 10);
}
