#include <doctest.h>

#include <cmath>

#include "dpc/nonlinear.hpp"
#include "dpc/observability.hpp"
#include "test_support.hpp"

using namespace dpc;
using testsup::random_matrix;

namespace {

NonlinearSystem scalar_quadratic() {
  NonlinearSystem sys;
  sys.n = 1;
  sys.m = 1;
  sys.q = 1;
  sys.f = [](const Vector& x, const Vector&) { return x; };
  sys.h = [](const Vector& x, const Vector&) {
    Vector y(1);
    y(0) = x(0) * x(0);
    return y;
  };
  return sys;
}

}  // namespace

TEST_CASE("stack_nonlinear_output: matches the linear stacked maps") {
  Rng rng(81);
  for (int trial = 0; trial < 5; ++trial) {
    StateSpace lin = testsup::random_system(rng, 3, 2, 2);
    const NonlinearSystem sys = from_linear(lin);
    const Vector x0 = random_matrix(rng, 3, 1);
    std::vector<Vector> u;
    for (int k = 0; k < 4; ++k) u.push_back(random_matrix(rng, 2, 1));
    const Vector H = stack_nonlinear_output(sys, x0, u);
    const StackedMaps maps = stack_markov_map(lin, 3, 3);
    Vector U(8);
    for (int k = 0; k < 4; ++k) U.segment(2 * k, 2) = u[k];
    const Vector expected = maps.O * x0 + maps.N_full * U;
    CHECK((H - expected).cwiseAbs().maxCoeff() <
          1e-12 * (1.0 + expected.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("stack_nonlinear_output: logistic-map hand recursion") {
  const NonlinearSystem sys = logistic_map(3.5);
  const Vector x0 = Vector::Constant(1, 0.2);
  std::vector<Vector> u(3, Vector::Zero(1));
  const Vector H = stack_nonlinear_output(sys, x0, u);
  CHECK(H(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(H(1) == doctest::Approx(0.56).epsilon(1e-12));
  CHECK(H(2) == doctest::Approx(0.8624).epsilon(1e-12));
}

TEST_CASE("stack_nonlinear_output: single step returns h(x0, u0)") {
  const NonlinearSystem sys = logistic_map(3.0);
  std::vector<Vector> u = {Vector::Constant(1, 0.4)};
  const Vector H = stack_nonlinear_output(sys, Vector::Constant(1, 0.3), u);
  REQUIRE(H.size() == 1);
  CHECK(H(0) == doctest::Approx(0.3));
}

TEST_CASE("stack_nonlinear_output: failure carries the step index") {
  NonlinearSystem sys = logistic_map(3.0);
  sys.f = [](const Vector&, const Vector&) {
    Vector bad(1);
    bad(0) = std::numeric_limits<double>::quiet_NaN();
    return bad;
  };
  std::vector<Vector> u(3, Vector::Zero(1));
  try {
    stack_nonlinear_output(sys, Vector::Constant(1, 0.3), u);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("calibrate_nonlinear_gaussian: linear case within 1% of the exact floor") {
  Rng rng(82);
  StateSpace lin(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0),
                 Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0));
  const NonlinearSystem sys = from_linear(lin);
  PrivacyBudget budget{1.0, 0.0446, 1.0, 2};
  const Vector x0 = Vector::Constant(1, 0.3);
  std::vector<Vector> u(3, Vector::Constant(1, 0.1));
  const auto cal = calibrate_nonlinear_gaussian(sys, x0, u, budget);
  const double exact = min_iid_sigma(lin, budget, 2);
  CHECK(cal.sigma_floor == doctest::Approx(exact).epsilon(0.01));
  CHECK(cal.sampled_lower_bound);
  CHECK(cal.sigma_floor <= exact * (1 + 1e-9));  // sampled sup is a lower bound
}

TEST_CASE("calibrate_nonlinear_gaussian: scalar quadratic closed form") {
  const NonlinearSystem sys = scalar_quadratic();
  PrivacyBudget budget{0.7, 0.05, 0.8, 2};
  const Vector x0 = Vector::Constant(1, 1.3);
  std::vector<Vector> u = {Vector::Zero(1)};
  const auto cal = calibrate_nonlinear_gaussian(sys, x0, u, budget);
  const double sup = 2.0 * std::abs(x0(0)) * budget.c + budget.c * budget.c;
  const double expected = sup * r_value(budget.epsilon, budget.delta);
  CHECK(cal.sigma_floor == doctest::Approx(expected).epsilon(0.005));
}

TEST_CASE("calibrate_nonlinear_gaussian: floor depends on the operating point") {
  const NonlinearSystem sys = scalar_quadratic();
  PrivacyBudget budget{0.7, 0.05, 0.5, 2};
  std::vector<Vector> u = {Vector::Zero(1)};
  const auto a = calibrate_nonlinear_gaussian(sys, Vector::Constant(1, 0.5), u, budget);
  const auto b = calibrate_nonlinear_gaussian(sys, Vector::Constant(1, 2.0), u, budget);
  CHECK(b.sigma_floor > a.sigma_floor * 1.5);
}

TEST_CASE("calibrate_nonlinear_gaussian: monotone in the adjacency radius") {
  const NonlinearSystem sys = scalar_quadratic();
  std::vector<Vector> u = {Vector::Zero(1)};
  double prev = 0.0;
  for (double c : {0.25, 0.5, 1.0, 2.0}) {
    PrivacyBudget budget{0.7, 0.05, c, 2};
    const auto cal =
        calibrate_nonlinear_gaussian(sys, Vector::Constant(1, 1.0), u, budget);
    CHECK(cal.sup_deviation >= prev - 1e-12);
    prev = cal.sup_deviation;
  }
}

TEST_CASE("nonlinear_laplace_scale: linear case equals the induced 1-norm") {
  StateSpace lin(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0),
                 Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.0));
  const NonlinearSystem sys = from_linear(lin);
  PrivacyBudget budget{1.0, 0.0, 1.0, 1};
  const Vector x0 = Vector::Zero(1);
  std::vector<Vector> u(3, Vector::Zero(1));
  DomainBox box{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0),
                Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  const double b = nonlinear_laplace_scale(sys, x0, u, budget, box, 64);
  CHECK(b == doctest::Approx(laplace_scale(lin, budget, 2)).epsilon(1e-9));
}

TEST_CASE("nonlinear_laplace_scale: quadratic output on a box, epsilon scaling") {
  const NonlinearSystem sys = scalar_quadratic();
  PrivacyBudget budget{1.0, 0.0, 1.0, 1};
  std::vector<Vector> u = {Vector::Zero(1)};
  DomainBox box{Vector::Constant(1, -2.0), Vector::Constant(1, 2.0),
                Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
  const double b = nonlinear_laplace_scale(sys, Vector::Zero(1), u, budget, box, 128);
  CHECK(b == doctest::Approx(4.0).epsilon(1e-6));
  PrivacyBudget doubled = budget;
  doubled.epsilon = 2.0;
  const double b2 = nonlinear_laplace_scale(sys, Vector::Zero(1), u, doubled, box, 128);
  CHECK(b2 == doctest::Approx(0.5 * b).epsilon(1e-9));
}

TEST_CASE("check_incremental_ios: stable scalar certificate holds on a grid") {
  NonlinearSystem sys;
  sys.n = sys.m = sys.q = 1;
  sys.f = [](const Vector& x, const Vector& u) { return Vector(0.5 * x + u); };
  sys.h = [](const Vector& x, const Vector&) { return x; };
  IosCertificate cert;
  cert.V = [](const Vector& x, const Vector& xp) { return std::abs(x(0) - xp(0)); };
  cert.lambda = 0.5;
  cert.c1 = 1.0;
  cert.sigma1 = {[](double) { return 0.0; }, "zero"};
  cert.sigma2 = {[](double r) { return r; }, "identity"};
  cert.alpha2 = {[](double r) { return r; }, "identity"};
  IosSampleSpec spec;
  spec.x_lo = Vector::Constant(1, -2.0);
  spec.x_hi = Vector::Constant(1, 2.0);
  spec.u_lo = Vector::Constant(1, -1.0);
  spec.u_hi = Vector::Constant(1, 1.0);
  spec.samples = 10000;
  spec.tensor_grid = true;
  const auto rep = check_incremental_ios(sys, cert, spec);
  CHECK(rep.holds_on_samples);
  CHECK(rep.worst_margin_output >= -1e-12);
  CHECK(rep.worst_margin_bound >= -1e-12);
  CHECK(rep.worst_margin_contraction >= -1e-12);
}

TEST_CASE("check_incremental_ios: unstable map is caught with a witness") {
  NonlinearSystem sys;
  sys.n = sys.m = sys.q = 1;
  sys.f = [](const Vector& x, const Vector&) { return Vector(2.0 * x); };
  sys.h = [](const Vector& x, const Vector&) { return x; };
  IosCertificate cert;
  cert.V = [](const Vector& x, const Vector& xp) { return std::abs(x(0) - xp(0)); };
  cert.lambda = 0.9;
  cert.c1 = 1.0;
  cert.sigma1 = {[](double) { return 0.0; }, "zero"};
  cert.sigma2 = {[](double r) { return r; }, "identity"};
  cert.alpha2 = {[](double r) { return r; }, "identity"};
  IosSampleSpec spec;
  spec.x_lo = Vector::Constant(1, -2.0);
  spec.x_hi = Vector::Constant(1, 2.0);
  spec.u_lo = Vector::Constant(1, -1.0);
  spec.u_hi = Vector::Constant(1, 1.0);
  spec.samples = 4096;
  const auto rep = check_incremental_ios(sys, cert, spec);
  CHECK_FALSE(rep.holds_on_samples);
  REQUIRE(rep.witness.has_value());
  CHECK(rep.witness->condition == 3);
  // re-evaluate the violated inequality at the witness
  const auto& w = *rep.witness;
  const double lhs = cert.V(sys.f(w.x, w.u), sys.f(w.x_prime, w.u_prime));
  const double rhs = cert.lambda * cert.V(w.x, w.x_prime) +
                     cert.sigma2.value(std::abs(w.u(0) - w.u_prime(0)));
  CHECK(lhs > rhs);
}

TEST_CASE("check_incremental_ios: margins and verdict are scale consistent") {
  NonlinearSystem sys;
  sys.n = sys.m = sys.q = 1;
  sys.f = [](const Vector& x, const Vector& u) { return Vector(0.5 * x + u); };
  sys.h = [](const Vector& x, const Vector&) { return x; };
  auto make_cert = [](double s) {
    IosCertificate cert;
    cert.V = [s](const Vector& x, const Vector& xp) { return s * std::abs(x(0) - xp(0)); };
    cert.lambda = 0.5;
    cert.c1 = s;
    cert.sigma1 = {[](double) { return 0.0; }, "zero"};
    cert.sigma2 = {[s](double r) { return s * r; }, "scaled identity"};
    cert.alpha2 = {[s](double r) { return s * r; }, "scaled identity"};
    return cert;
  };
  IosSampleSpec spec;
  spec.x_lo = Vector::Constant(1, -2.0);
  spec.x_hi = Vector::Constant(1, 2.0);
  spec.u_lo = Vector::Constant(1, -1.0);
  spec.u_hi = Vector::Constant(1, 1.0);
  spec.samples = 2000;
  const auto a = check_incremental_ios(sys, make_cert(1.0), spec);
  const auto b = check_incremental_ios(sys, make_cert(3.0), spec);
  CHECK(a.holds_on_samples == b.holds_on_samples);
  CHECK(b.worst_margin_contraction ==
        doctest::Approx(3.0 * a.worst_margin_contraction).epsilon(1e-9));
}

TEST_CASE("check_incremental_ios: identical pairs hold trivially") {
  NonlinearSystem sys;
  sys.n = sys.m = sys.q = 1;
  sys.f = [](const Vector& x, const Vector& u) { return Vector(0.5 * x + u); };
  sys.h = [](const Vector& x, const Vector&) { return x; };
  IosCertificate cert;
  cert.V = [](const Vector& x, const Vector& xp) { return std::abs(x(0) - xp(0)); };
  cert.lambda = 0.5;
  cert.c1 = 1.0;
  cert.sigma1 = {[](double) { return 0.0; }, "zero"};
  cert.sigma2 = {[](double r) { return r; }, "identity"};
  cert.alpha2 = {[](double r) { return r; }, "identity"};
  for (double xv : {-1.0, 0.0, 0.7}) {
    const Vector x = Vector::Constant(1, xv), u = Vector::Constant(1, 0.2);
    CHECK(cert.c1 * 0.0 <= cert.V(x, x) + cert.sigma1.value(0.0));
    CHECK(cert.V(x, x) <= cert.alpha2.value(0.0) + 1e-15);
    CHECK(cert.V(sys.f(x, u), sys.f(x, u)) <=
          cert.lambda * cert.V(x, x) + cert.sigma2.value(0.0) + 1e-15);
  }
}

TEST_CASE("calibrate_ios_gaussian: formula structure and published value") {
  PrivacyBudget budget{0.3, 0.0446, 1.0, 2};
  const KFunction id{[](double r) { return r; }, "identity"};
  const KFunction zero{[](double) { return 0.0; }, "zero"};
  // gamma = 0: floor independent of t
  CHECK(calibrate_ios_gaussian(id, zero, budget, 2) ==
        doctest::Approx(calibrate_ios_gaussian(id, zero, budget, 9)).epsilon(1e-12));
  // affine growth of the square root in t
  const double r0 = std::sqrt(calibrate_ios_gaussian(id, id, budget, 3));
  const double r1 = std::sqrt(calibrate_ios_gaussian(id, id, budget, 4));
  const double r2 = std::sqrt(calibrate_ios_gaussian(id, id, budget, 5));
  CHECK(r1 - r0 == doctest::Approx(r2 - r1).epsilon(1e-10));
  CHECK(r1 - r0 == doctest::Approx(r_value(0.3, 0.0446)).epsilon(1e-10));
  // alpha = gamma = identity, c = 1, t = 4: sqrt(floor) = 6 R ~ 35.7
  const double root = std::sqrt(calibrate_ios_gaussian(id, id, budget, 4));
  CHECK(root == doctest::Approx(6.0 * testsup::r_oracle(0.3, 0.0446)).epsilon(1e-9));
  CHECK(root == doctest::Approx(35.7).epsilon(2e-2));
}

TEST_CASE("calibrate_ios_gaussian: non-monotone gain rejected") {
  PrivacyBudget budget{0.3, 0.0446, 1.0, 2};
  const KFunction bad{[](double r) { return std::sin(5 * r); }, "wiggly"};
  const KFunction id{[](double r) { return r; }, "identity"};
  CHECK_THROWS_AS(calibrate_ios_gaussian(bad, id, budget, 2), Error);
}

TEST_CASE("Sobol sequence: deterministic and balanced per dimension") {
  detail::SobolSequence a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    const Vector pa = a.next(), pb = b.next();
    CHECK((pa - pb).cwiseAbs().maxCoeff() == 0.0);
  }
  // prefix balance: of the first 2^k points, exactly half lie below 1/2
  detail::SobolSequence seq(4);
  const int N = 256;
  Eigen::MatrixXi low = Eigen::MatrixXi::Zero(1, 4);
  for (int i = 0; i < N; ++i) {
    const Vector p = seq.next();
    for (int dim = 0; dim < 4; ++dim)
      if (p(dim) < 0.5) low(0, dim)++;
  }
  for (int dim = 0; dim < 4; ++dim) CHECK(low(0, dim) == N / 2);
}
