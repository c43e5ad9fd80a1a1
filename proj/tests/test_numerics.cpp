#include <doctest.h>

#include "mcrb/errors.hpp"
#include "mcrb/harness.hpp"
#include "mcrb/numdiff.hpp"
#include "mcrb/optimize.hpp"
#include "mcrb/parallel.hpp"
#include "mcrb/quadrature.hpp"
#include "mcrb/random.hpp"

#include <atomic>
#include <cmath>
#include <set>

using namespace mcrb;

TEST_CASE("derived seeds are a pure function of (master, tag, index)") {
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  CHECK(derive_seed(7, 3) != derive_seed(7, 4));
  CHECK(derive_seed(7, 1, 3) != derive_seed(7, 2, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(42, 9, i));
  CHECK(seen.size() == 10000);

  Engine a(derive_seed(1, 2)), b(derive_seed(1, 2));
  const Matrix x = standard_normal_matrix(a, 3, 50);
  const Matrix y = standard_normal_matrix(b, 3, 50);
  CHECK((x.array() == y.array()).all());
}

TEST_CASE("standard normal draws have unit variance") {
  Engine e(derive_seed(5, 0));
  const Matrix z = standard_normal_matrix(e, 1, 200000);
  CHECK(std::abs(z.mean()) < 0.01);
  CHECK(std::abs(z.squaredNorm() / 200000 - 1) < 0.01);
}

TEST_CASE("gauss-hermite rule integrates normal moments exactly") {
  for (int n : {2, 3, 5, 10, 20}) {
    const auto rule = quadrature::gauss_hermite(n);
    CHECK(rule.weights.sum() == doctest::Approx(1).epsilon(1e-14));
    auto moment = [&](int k) {
      Scalar s = 0;
      for (Index i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], k);
      return s;
    };
    // E Z^{2k} = (2k − 1)!!
    const Scalar double_factorial[] = {1, 1, 3, 15, 105, 945};
    for (int k = 0; 2 * k <= 2 * n - 1 && k < 6; ++k) {
      CHECK(moment(2 * k) == doctest::Approx(double_factorial[k]).epsilon(1e-12));
      CHECK(std::abs(moment(2 * k + 1)) < 1e-12 * double_factorial[std::min(k + 1, 5)]);
    }
  }
}

TEST_CASE("gauss-kronrod matches closed-form integrals") {
  auto f = [](Scalar x) {
    Vector v(2);
    v << std::exp(-x * x), std::sin(x) * std::sin(x);
    return v;
  };
  const auto r = quadrature::integrate_interval(f, 2, -20, 20);
  CHECK(r.value[0] == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-13));
  CHECK(r.value[1] == doctest::Approx(20 - std::sin(40) / 2).epsilon(1e-12));
}

TEST_CASE("gaussian cubature reproduces mean and covariance") {
  Vector mean(2);
  mean << 1, -2;
  Matrix cov(2, 2);
  cov << 2, 0.5, 0.5, 1;
  auto g = [](const ObservationRef& x) {
    Vector v(4);
    v << x[0], x[1], x[0] * x[1], x[0] * x[0] * x[0] * x[0];
    return v;
  };
  const auto r = quadrature::gaussian_cubature(g, 4, mean, cov, 4);
  CHECK(r.value[0] == doctest::Approx(1).epsilon(1e-13));
  CHECK(r.value[1] == doctest::Approx(-2).epsilon(1e-13));
  CHECK(r.value[2] == doctest::Approx(0.5 + 1 * -2).epsilon(1e-12));
  // E X⁴ = μ⁴ + 6μ²σ² + 3σ⁴ with μ = 1, σ² = 2
  CHECK(r.value[3] == doctest::Approx(1 + 12 + 12).epsilon(1e-12));
  CHECK(quadrature::default_hermite_nodes(1) == 20);
  CHECK(quadrature::default_hermite_nodes(8) == 4);
}

TEST_CASE("reparameterization round-trips and has the right derivatives") {
  Domain d{Vector(3), Vector(3)};
  d.lower << 0, -1, -kInf;
  d.upper << kInf, 2, kInf;
  const optim::Reparam map(d);
  Vector theta(3);
  theta << 3.5, 0.25, -7;
  const Vector phi = map.to_free(theta);
  CHECK((map.to_box(phi) - theta).norm() < 1e-14);
  const Vector jac = map.jacobian(phi);
  const Vector h = Vector::Constant(3, 1e-6);
  const Vector numeric = (map.to_box(phi + h) - map.to_box(phi - h)).cwiseQuotient(2 * h);
  CHECK((jac - numeric).norm() < 1e-8);
  const Vector second = map.second_derivative(phi);
  const Vector numeric2 = (map.jacobian(phi + h) - map.jacobian(phi - h)).cwiseQuotient(2 * h);
  CHECK((second - numeric2).norm() < 1e-7);
}

TEST_CASE("bfgs solves the Rosenbrock problem") {
  auto f = [](const Vector& x) { return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2); };
  auto g = [](const Vector& x) {
    Vector out(2);
    out << -400 * x[0] * (x[1] - x[0] * x[0]) - 2 * (1 - x[0]), 200 * (x[1] - x[0] * x[0]);
    return out;
  };
  Vector x0(2);
  x0 << -1.2, 1;
  optim::Options opt;
  opt.gradient_tolerance = 1e-9;
  opt.max_iterations = 2000;
  const auto r = optim::bfgs_minimize(f, g, x0, opt);
  CHECK(r.converged);
  CHECK(std::abs(r.x[0] - 1) < 1e-6);
  CHECK(std::abs(r.x[1] - 1) < 1e-6);
}

TEST_CASE("golden section and bracketing find a 1-D minimum") {
  auto f = [](Scalar x) { return (x - 2.5) * (x - 2.5) + 1; };
  const auto b = optim::bracket_minimum(f, 0, 0.1);
  REQUIRE(b.has_value());
  CHECK(b->lo < 2.5);
  CHECK(b->hi > 2.5);
  const auto r = optim::golden_section(f, b->lo, b->hi, 1e-12);
  CHECK(r.x == doctest::Approx(2.5).epsilon(1e-7));  // a quadratic minimum is only located to about √ε
  // A monotone function has no bracket.
  CHECK_FALSE(optim::bracket_minimum([](Scalar x) { return -x; }, 0, 0.1, 20).has_value());
}

TEST_CASE("minimize_in_box finds interior optima and flags boundary runs") {
  optim::BoxObjective obj;
  obj.value = [](const Vector& t) { return t[0] - 3 * std::log(t[0]); };  // minimum at 3
  obj.gradient = [](const Vector& t) { return Vector::Constant(1, 1 - 3 / t[0]); };
  const auto r = optim::minimize_in_box(obj, Domain::positive(1), Vector::Constant(1, 0.1));
  CHECK(r.converged);
  CHECK_FALSE(r.boundary);
  CHECK(r.theta[0] == doctest::Approx(3).epsilon(1e-10));

  optim::BoxObjective edge;
  edge.value = [](const Vector& t) { return t[0]; };  // infimum at the excluded edge 0
  edge.gradient = [](const Vector&) { return Vector::Constant(1, 1.0); };
  CHECK(optim::minimize_in_box(edge, Domain::positive(1), Vector::Constant(1, 1.0)).boundary);

  optim::BoxObjective quad2;
  quad2.value = [](const Vector& t) { return std::pow(t[0] - 1, 2) + std::pow(t[1] - 2, 2) + t[0] * t[1]; };
  quad2.gradient = [](const Vector& t) {
    Vector g(2);
    g << 2 * (t[0] - 1) + t[1], 2 * (t[1] - 2) + t[0];
    return g;
  };
  const auto r2 = optim::minimize_in_box(quad2, Domain::unbounded(2), Vector::Zero(2));
  CHECK(r2.converged);
  CHECK(r2.theta[0] == doctest::Approx(0).scale(1));
  CHECK(r2.theta[1] == doctest::Approx(2));
}

TEST_CASE("finite differences recover polynomial derivatives") {
  auto f = [](const Vector& x) { return x[0] * x[0] * x[1] + 3 * x[1] * x[1] + std::exp(x[0]); };
  Vector x(2);
  x << 0.7, -1.3;
  const Vector g = numdiff::gradient(f, x);
  CHECK(g[0] == doctest::Approx(2 * 0.7 * -1.3 + std::exp(0.7)).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(0.49 + 6 * -1.3).epsilon(1e-8));
  const Matrix h = numdiff::hessian(f, x);
  CHECK(h(0, 0) == doctest::Approx(2 * -1.3 + std::exp(0.7)).epsilon(1e-6));
  CHECK(h(0, 1) == doctest::Approx(1.4).epsilon(1e-6));
  CHECK(h(1, 1) == doctest::Approx(6).epsilon(1e-6));
  const Matrix hj = numdiff::jacobian_of_gradient([&](const Vector& y) { return numdiff::gradient(f, y); }, x);
  CHECK((hj - h).norm() < 1e-4);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  for (unsigned w : {1u, 2u, 5u}) {
    std::vector<int> hits(103, 0);
    parallel_for(hits.size(), w, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw NumericError("boom");
                  }),
                  NumericError);
}

TEST_CASE("sandwich_product and inverse_condition") {
  Matrix a(2, 2), b(2, 2);
  a << -2, 0.5, 0.5, -1;
  b << 1, 0.2, 0.2, 3;
  const Matrix c = sandwich_product(a, b);
  const Matrix ai = a.inverse();
  CHECK((c - ai * b * ai).norm() < 1e-14);
  CHECK((c - c.transpose()).norm() == 0);
  CHECK(inverse_condition(Matrix(Matrix::Identity(3, 3))) == doctest::Approx(1));
  Matrix singular(2, 2);
  singular << 1, 2, 2, 4;
  CHECK(inverse_condition(singular) < 1e-15);
}

TEST_CASE("log-log slope and Kolmogorov distance helpers") {
  CHECK(loglog_slope({1, 10, 100}, {3, 0.3, 0.03}) == doctest::Approx(-1));
  CHECK_THROWS_AS(loglog_slope({1}, {1}), DomainError);
  CHECK_THROWS_AS(loglog_slope({1, 2}, {1, -1}), DomainError);
  // Uniform grid midpoints against the uniform CDF: distance 1/(2n).
  std::vector<Scalar> u;
  for (int i = 0; i < 100; ++i) u.push_back((i + 0.5) / 100);
  CHECK(kolmogorov_distance(u, [](Scalar x) { return x; }) == doctest::Approx(0.005));
}
