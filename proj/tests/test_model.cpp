#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "rdom/model.hpp"
#include "rdom/spectra.hpp"

using namespace rdom;
using cd = std::complex<double>;
using oracle::pi;

namespace {

/// Captures std::clog for the lifetime of the object.
struct ClogCapture {
  std::ostringstream buffer;
  std::streambuf* old;
  ClogCapture() : old(std::clog.rdbuf(buffer.rdbuf())) {}
  ~ClogCapture() { std::clog.rdbuf(old); }
};

}  // namespace

TEST_CASE("critical coupling sets kappa = 2 (J + kappa_i)") {
  const auto p = EffectiveParams<double>::critical(10, 10, pi / 2);
  CHECK(p.kappa() == 22);
  CHECK(p.critically_coupled());
  CHECK(p.retuned(3, 0).kappa() == 8);

  const auto q = EffectiveParams<double>::with_total_loss(10, 4, 0, 30);
  CHECK(q.kappa() == 30);
  CHECK_FALSE(q.critically_coupled());
  CHECK(q.retuned(6, 0).kappa() == 32);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(EffectiveParams<double>::critical(-1, 1, 0), ValidationError);
  CHECK_THROWS_AS(EffectiveParams<double>::critical(1, -1, 0), ValidationError);
  CHECK_THROWS_AS(EffectiveParams<double>::critical(1, 1, 0, 0), ValidationError);
  CHECK_THROWS_AS(EffectiveParams<double>::with_total_loss(10, 10, 0, 5), ValidationError);
  FullParams<double> f;
  f.gamma = 0;
  CHECK_THROWS_AS(f.validate(), ValidationError);
  CHECK_THROWS_AS(build_full_matrix(f, 1.0), ValidationError);
  RingParams<double> r;
  r.kappa = 0;
  CHECK_THROWS_AS(build_ring_matrix(r), ValidationError);
  CHECK_THROWS_AS(lift(EffectiveParams<double>::critical(1, 1, 0), 0.0), ValidationError);
}

TEST_CASE("coefficient matrix invariants") {
  CoefficientMatrix<double> cm;
  cm.m = Matrixcd::Zero(4, 4);
  CHECK_THROWS_AS(cm.validate(), ValidationError);
  cm.m = Matrixcd::Zero(2, 3);
  CHECK_THROWS_AS(cm.validate(), ValidationError);
  cm.m = Matrixcd::Zero(2, 2);
  cm.m(1, 1) = cd(0, 0.5);
  CHECK_THROWS_AS(cm.validate(), ValidationError);
  cm.m(1, 1) = cd(0, -0.5);
  cm.ports = {{2, 1.0}};
  CHECK_THROWS_AS(cm.validate(), ValidationError);
  cm.ports = {{1, -1.0}};
  CHECK_THROWS_AS(cm.validate(), ValidationError);
  cm.ports = {{1, 1.0}};
  CHECK_NOTHROW(cm.validate());
}

TEST_CASE("effective matrix entries") {
  SUBCASE("J = 0") {
    const auto cm = build_effective_matrix(EffectiveParams<double>::critical(10, 0, 0));
    CHECK(cm.m(0, 0) == cd(0, -2));
    CHECK(cm.m(1, 1) == cd(0, -2));
    CHECK(cm.m(0, 1) == cd(10, 0));
    CHECK(cm.m(1, 0) == cd(10, 0));
    CHECK(cm.ports.size() == 2);
    CHECK(cm.ports[0].rate == 2);
  }
  SUBCASE("odd phase matching: one-way coupling") {
    const auto cm = build_effective_matrix(EffectiveParams<double>::critical(10, 10, pi / 2));
    CHECK(cm.m(0, 1) == cd(20, 0));
    CHECK(cm.m(1, 0) == cd(0, 0));
    CHECK(cm.m(0, 0) == cd(0, -22));
  }
  SUBCASE("even phase matching: reversed") {
    const auto cm = build_effective_matrix(EffectiveParams<double>::critical(10, 10, 3 * pi / 2));
    CHECK(cm.m(0, 1) == cd(0, 0));
    CHECK(cm.m(1, 0) == cd(20, 0));
  }
  SUBCASE("external port convention") {
    const auto p = EffectiveParams<double>::critical(10, 4, 1.0);
    const auto cm = build_effective_matrix(p, PortConvention::external);
    CHECK(cm.ports[0].rate == p.kappa_e);
    CHECK(cm.ports[1].rate == p.kappa_e);
  }
}

TEST_CASE("effective matrix agrees with the written-out definition") {
  oracle::Gen gen(11);
  for (int sample = 0; sample < 1000; ++sample) {
    const double G = gen.uniform(0, 20), J = gen.uniform(0, 20), th = gen.uniform(-10, 10);
    const double ki = gen.uniform(0.1, 3), w = gen.uniform(-5, 5);
    const auto p = EffectiveParams<double>::critical(G, J, th, ki, w);
    const auto cm = build_effective_matrix(p);
    const auto ref = oracle::two_mode(w, p.kappa(), G, J, th);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(std::abs(cm.m(i, j) - ref[i][j]) <= 1e-12 * (1 + G + J));
    // diagonal loss is exactly the declared loss
    CHECK(cm.m(0, 0).imag() == -p.kappa());
  }
}

TEST_CASE("effective matrix is normal iff the couplings have equal magnitude") {
  oracle::Gen gen(12);
  for (int sample = 0; sample < 200; ++sample) {
    const double G = gen.uniform(0.5, 20), J = gen.uniform(0.5, 20), th = gen.uniform(0, 2 * pi);
    const auto cm = build_effective_matrix(EffectiveParams<double>::critical(G, J, th));
    const double asym = std::abs(std::abs(cm.m(0, 1)) - std::abs(cm.m(1, 0)));
    const double residual = normality_residual(cm.m);
    if (asym > 1e-6) {
      CHECK(residual > 1e-9);
    } else {
      CHECK(residual < 1e-6);
    }
  }
  // theta = k pi gives equal magnitudes for any J
  CHECK(normality_residual(build_effective_matrix(EffectiveParams<double>::critical(10, 3, pi)).m) <
        1e-12);
}

TEST_CASE("exceptional point matrix is defective") {
  for (double th : {pi / 2, 3 * pi / 2, 5 * pi / 2}) {
    const auto cm = build_effective_matrix(EffectiveParams<double>::critical(10, 10, th));
    CHECK(geometric_multiplicity(cm.m, cd(0, -22)) == 1);
  }
  const auto off = build_effective_matrix(EffectiveParams<double>::critical(10, 5, pi / 2));
  const auto s = eig_numeric(off);
  CHECK(geometric_multiplicity(off.m, s.eigenvalues[0]) == 1);
  CHECK(std::abs(s.eigenvalues[0] - s.eigenvalues[1]) > 1);
}

TEST_CASE("full matrix layout") {
  FullParams<double> f;
  f.delta_a = 1;
  f.delta_b = 2;
  f.omega_m = 3;
  f.kappa_1 = 4;
  f.kappa_2 = 5;
  f.gamma = 6;
  f.G = 7;
  f.G_a = {1, 2};
  f.G_b = {3, -4};
  const auto cm = build_full_matrix(f, 9.0);
  CHECK(cm.m(0, 0) == cd(1, -4));
  CHECK(cm.m(1, 1) == cd(2, -5));
  CHECK(cm.m(2, 2) == cd(3, -6));
  CHECK(cm.m(0, 1) == cd(7, 0));
  CHECK(cm.m(1, 0) == cd(7, 0));
  CHECK(cm.m(0, 2) == cd(1, 2));
  CHECK(cm.m(2, 0) == cd(1, -2));
  CHECK(cm.m(1, 2) == cd(3, -4));
  CHECK(cm.m(2, 1) == cd(3, 4));
  REQUIRE(cm.ports.size() == 2);
  CHECK(cm.ports[0].mode == 0);
  CHECK(cm.ports[1].mode == 1);
  CHECK(cm.ports[1].rate == 9);
}

TEST_CASE("full matrix without optomechanical coupling decouples the mechanics") {
  const auto e = EffectiveParams<double>::critical(10, 0, 0);
  FullParams<double> f;
  f.kappa_1 = f.kappa_2 = e.kappa();
  f.gamma = 50;
  f.G = 10;
  const auto cm = build_full_matrix(f, e.kappa());
  const auto two = build_effective_matrix(e);
  CHECK((cm.m.topLeftCorner(2, 2) - two.m).norm() == 0);
  CHECK(cm.m(2, 0) == cd(0));
  CHECK(cm.m(2, 1) == cd(0));
}

TEST_CASE("ring matrix is circulant") {
  oracle::Gen gen(13);
  for (int sample = 0; sample < 500; ++sample) {
    RingParams<double> p{gen.uniform(-5, 5), gen.uniform(0.1, 50), gen.uniform(0, 20),
                         gen.uniform(0, 20), gen.uniform(-10, 10)};
    const auto cm = build_ring_matrix(p);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(cm.m(i, j) == cm.m((i + 1) % 3, (j + 1) % 3));
    CHECK(cm.m(0, 0).imag() == -p.kappa);
    CHECK(cm.ports.size() == 3);
  }
  const auto sym = build_ring_matrix(RingParams<double>{0, 2, 10, 0, 1.3});
  CHECK(sym.m(0, 1) == cd(10));
  CHECK(sym.m(0, 2) == cd(10));
  const auto one_way = build_ring_matrix(RingParams<double>{0, 2, 10, 10, pi / 2});
  CHECK(one_way.m(0, 1) == cd(20));
  CHECK(one_way.m(0, 2) == cd(0));
  const auto reversed = build_ring_matrix(RingParams<double>{0, 2, 10, 10, 3 * pi / 2});
  CHECK(reversed.m(0, 1) == cd(0));
  CHECK(reversed.m(0, 2) == cd(20));
}

TEST_CASE("reduce_full_to_effective") {
  ClogCapture capture;
  SUBCASE("J from |G_a|^2 / gamma") {
    FullParams<double> f;
    f.G_a = {10, 0};
    f.G_b = {-10, 0};
    f.gamma = 500;
    f.kappa_1 = f.kappa_2 = 2;
    CHECK(reduce_full_to_effective(f).J == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("phase convention: G_a = 3, G_b = -3i") {
    FullParams<double> f;
    f.G_a = {3, 0};
    f.G_b = {0, -3};
    f.gamma = 90;
    f.kappa_1 = f.kappa_2 = 2;
    const auto e = reduce_full_to_effective(f);
    CHECK(e.J == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(e.theta == doctest::Approx(pi / 2).epsilon(1e-15));
    CHECK(f.parametric_phase() == doctest::Approx(-pi / 2).epsilon(1e-15));
  }
  SUBCASE("warns outside reversed dissipation") {
    FullParams<double> f;
    f.G_a = {3, 0};
    f.G_b = {3, 0};
    f.gamma = 1;
    CHECK_FALSE(f.reversed_dissipation());
    reduce_full_to_effective(f);
    CHECK(capture.buffer.str().find("reversed-dissipation") != std::string::npos);
  }
}

TEST_CASE("lift then reduce is the identity") {
  ClogCapture capture;
  oracle::Gen gen(14);
  for (int sample = 0; sample < 1000; ++sample) {
    const double G = gen.uniform(0, 20), J = gen.uniform(0, 20), th = gen.uniform(0, 2 * pi);
    const double ki = gen.uniform(0.1, 3), gamma = std::pow(10.0, gen.uniform(-1, 4));
    const auto e = EffectiveParams<double>::critical(G, J, th, ki);
    const auto f = lift(e, gamma);
    CHECK(std::abs(f.G_a) == doctest::Approx(std::sqrt(J * gamma)).epsilon(1e-14));
    CHECK(std::abs(f.G_b) == doctest::Approx(std::sqrt(J * gamma)).epsilon(1e-14));
    const auto back = reduce_full_to_effective(f, ki);
    CHECK(back.G == e.G);
    CHECK(back.J == doctest::Approx(J).epsilon(1e-12));
    CHECK(back.kappa() == doctest::Approx(e.kappa()).epsilon(1e-12));
    if (J > 1e-9) {
      const double dth = std::remainder(back.theta - th, 2 * pi);
      CHECK(std::abs(dth) <= 1e-12 * (1 + th));
    }
  }
}

TEST_CASE("reversed-dissipation regime flag") {
  const auto e = EffectiveParams<double>::critical(10, 10, pi / 2);
  // |G_a| = sqrt(J gamma), so gamma > 10 |G_a| needs gamma > 100 J
  CHECK_FALSE(lift(e, 50 * 10.0).reversed_dissipation());
  CHECK_FALSE(lift(e, 100 * 10.0).reversed_dissipation());
  CHECK(lift(e, 101 * 10.0).reversed_dissipation());
  CHECK_FALSE(lift(e, 1.0).reversed_dissipation());
}
