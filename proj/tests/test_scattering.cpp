#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "rdom/scattering.hpp"

using namespace rdom;
using cd = std::complex<double>;
using oracle::pi;

namespace {

struct ClogSilencer {
  std::ostringstream sink;
  std::streambuf* old;
  ClogSilencer() : old(std::clog.rdbuf(sink.rdbuf())) {}
  ~ClogSilencer() { std::clog.rdbuf(old); }
};

EffectiveParams<double> random_effective(oracle::Gen& gen) {
  const double G = gen.uniform(0, 20), J = gen.uniform(0, 20), th = gen.uniform(-10, 10);
  const double ki = gen.uniform(0.1, 3);
  if (gen.uniform(0, 1) < 0.5) return EffectiveParams<double>::critical(G, J, th, ki, gen.uniform(-5, 5));
  return EffectiveParams<double>::with_total_loss(G, J, th, ki + J + gen.uniform(0, 30), ki,
                                                  gen.uniform(-5, 5));
}

}  // namespace

TEST_CASE("closed-form transmission examples") {
  const auto bare = EffectiveParams<double>::critical(0, 0, 0);
  CHECK(s21_closed(bare, 0.0) == cd(0));
  CHECK(std::abs(s21_closed(bare, 1e9) - cd(1)) < 1e-8);
  CHECK(std::abs(s21_closed(bare, -1e9) - cd(1)) < 1e-8);

  const auto odd = EffectiveParams<double>::critical(10, 10, pi / 2);
  CHECK(s21_closed(odd, 0.0) == cd(0));
  CHECK(std::abs(s14_closed(odd, 0.0)) == doctest::Approx(10.0 / 11).epsilon(1e-15));

  const auto even = EffectiveParams<double>::critical(10, 10, 3 * pi / 2);
  CHECK(std::abs(s41_closed(even, 0.0)) == doctest::Approx(10.0 / 11).epsilon(1e-15));

  const auto grid = ProbeGrid<double>::linspace(-110, 110, 2001);
  for (double d : grid.delta_values) {
    CHECK(s41_closed(odd, d) == cd(0));
    CHECK(s14_closed(even, d) == cd(0));
  }
}

TEST_CASE("without dissipative coupling transfer is reciprocal") {
  oracle::Gen gen(31);
  for (int sample = 0; sample < 500; ++sample) {
    const auto p = EffectiveParams<double>::critical(gen.uniform(0, 20), 0, gen.uniform(-10, 10));
    const double d = gen.uniform(-50, 50);
    CHECK(s41_closed(p, d) == s14_closed(p, d));
  }
}

TEST_CASE("reciprocity at theta = k pi") {
  oracle::Gen gen(32);
  for (int sample = 0; sample < 500; ++sample) {
    const double G = gen.uniform(0, 20), J = gen.uniform(0, 20);
    const auto p = EffectiveParams<double>::critical(G, J, gen.integer(-3, 3) * pi);
    const double d = gen.uniform(-100, 100);
    CHECK(std::abs(std::abs(s41_closed(p, d)) - std::abs(s14_closed(p, d))) <= 1e-12);
  }
}

TEST_CASE("single-mode S matrix") {
  CoefficientMatrix<double> cm;
  cm.m.resize(1, 1);
  cm.m(0, 0) = cd(3, -2);
  cm.ports = {{0, 2.0}};
  CHECK(std::abs(s_general(cm, 3.0).s(0, 0)) < 1e-15);
  CHECK(std::abs(s_general(cm, 1e9).s(0, 0) - cd(1)) < 1e-8);
}

TEST_CASE("s_general errors") {
  CoefficientMatrix<double> cm;
  cm.m = Matrixcd::Zero(2, 2);
  cm.ports = {{0, 1.0}, {1, 1.0}};
  CHECK_THROWS_AS(s_general(cm, 0.0), NumericalError);
  cm.ports.clear();
  CHECK_THROWS_AS(s_general(cm, 0.0), ValidationError);
}

TEST_CASE("s_general against Cramer's rule") {
  oracle::Gen gen(33);
  SUBCASE("two modes") {
    for (int sample = 0; sample < 1000; ++sample) {
      const auto p = random_effective(gen);
      const double w = gen.uniform(-60, 60);
      const auto ref = oracle::smatrix2(oracle::two_mode(p.omega, p.kappa(), p.G, p.J, p.theta),
                                        {p.kappa(), p.kappa()}, w);
      const auto s = s_general(build_effective_matrix(p), w);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(std::abs(s.s(i, j) - ref[i][j]) <= 1e-10);
    }
  }
  SUBCASE("ring") {
    for (int sample = 0; sample < 1000; ++sample) {
      RingParams<double> p{gen.uniform(-5, 5), gen.uniform(0.1, 50), gen.uniform(0, 20),
                           gen.uniform(0, 20), gen.uniform(-10, 10)};
      const auto cm = build_ring_matrix(p);
      if (passivity_margin(cm) < 0) continue;  // gain: poles may sit on the real axis
      const double w = gen.uniform(-60, 60);
      const auto ref = oracle::smatrix3(oracle::ring(p.omega, p.kappa, p.G, p.J, p.theta),
                                        {p.kappa, p.kappa, p.kappa}, w);
      const auto sm = s_general(cm, w);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(sm.s(i, j) - ref[i][j]) <= 1e-10);
    }
  }
  SUBCASE("full model, mechanics without a port") {
    for (int sample = 0; sample < 1000; ++sample) {
      const auto e = EffectiveParams<double>::critical(gen.uniform(0, 20), gen.uniform(0, 20),
                                                       gen.uniform(0, 2 * pi));
      const auto f = lift(e, std::pow(10.0, gen.uniform(0, 3)));
      const double w = gen.uniform(-60, 60);
      const oracle::M3 m{{{cd(f.delta_a, -f.kappa_1), f.G, f.G_a},
                          {f.G, cd(f.delta_b, -f.kappa_2), f.G_b},
                          {std::conj(f.G_a), std::conj(f.G_b), cd(f.omega_m, -f.gamma)}}};
      const auto ref = oracle::smatrix3(m, {e.kappa(), e.kappa(), 0.0}, w);
      const auto sm = s_general(build_full_matrix(f, e.kappa()), w);
      REQUIRE(sm.s.rows() == 2);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(std::abs(sm.s(i, j) - ref[i][j]) <= 1e-10);
    }
  }
}

TEST_CASE("closed forms agree with the general S matrix") {
  oracle::Gen gen(34);
  double worst = 0;
  for (int sample = 0; sample < 1000; ++sample) {
    const auto p = random_effective(gen);
    const double delta = gen.uniform(-60, 60);
    const auto fp = four_port(s_general(build_effective_matrix(p), probe_frequency(p.omega, delta)));
    worst = std::max({worst, std::abs(fp.s21 - s21_closed(p, delta)),
                      std::abs(fp.s41 - s41_closed(p, delta)), std::abs(fp.s14 - s14_closed(p, delta))});
    // the two cavities are identical, so the second through port mirrors the first
    CHECK(std::abs(fp.s43 - fp.s21) <= 1e-10);
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("passivity") {
  oracle::Gen gen(35);
  for (int sample = 0; sample < 1000; ++sample) {
    const auto p = random_effective(gen);
    const auto cm = build_effective_matrix(p);
    if (passivity_margin(cm) < 0) continue;
    CHECK(s_general(cm, gen.uniform(-60, 60)).max_singular_value() <= 1 + 1e-9);
  }
  for (int sample = 0; sample < 1000; ++sample) {
    const auto e = EffectiveParams<double>::critical(gen.uniform(0, 20), gen.uniform(0, 20),
                                                     gen.uniform(0, 2 * pi));
    const auto f = lift(e, std::pow(10.0, gen.uniform(0, 3)));
    // ports at the cavity's own outcoupling rate keep the full model passive
    const auto cm = build_full_matrix(f, f.kappa_1);
    CHECK(passivity_margin(cm) >= -1e-12);
    CHECK(s_general(cm, gen.uniform(-60, 60)).max_singular_value() <= 1 + 1e-9);
  }
}

TEST_CASE("ring closed form") {
  SUBCASE("cyclic equalities hold exactly") {
    oracle::Gen gen(36);
    for (int sample = 0; sample < 500; ++sample) {
      RingParams<double> p{0, gen.uniform(1, 200), gen.uniform(0, 20), gen.uniform(0, 20),
                           gen.uniform(-10, 10)};
      const auto r = ring_s_closed(p, gen.uniform(-100, 100)).s;
      CHECK(std::abs(r.at(2, 1)) == std::abs(r.at(3, 2)));
      CHECK(std::abs(r.at(2, 1)) == std::abs(r.at(1, 3)));
      CHECK(std::abs(r.at(1, 2)) == std::abs(r.at(2, 3)));
      CHECK(std::abs(r.at(1, 2)) == std::abs(r.at(3, 1)));
    }
  }
  SUBCASE("agrees with s_general off the diagonal") {
    oracle::Gen gen(37);
    for (int sample = 0; sample < 1000; ++sample) {
      RingParams<double> p{gen.uniform(-5, 5), gen.uniform(1, 200), gen.uniform(0, 20),
                           gen.uniform(0, 20), gen.uniform(-10, 10)};
      const auto cm = build_ring_matrix(p);
      if (passivity_margin(cm) < 0) continue;
      const double delta = gen.uniform(-100, 100);
      const auto closed = ring_s_closed(p, delta);
      const auto general = s_general(cm, probe_frequency(p.omega, delta));
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (i == j) {
            // printed: kappa (X^2 - J1 J2 + 1) / Lambda; exact: 1 + kappa (X^2 - J1 J2) / Lambda
            const cd printed_offset = p.kappa / closed.aux.lambda_det - 1.0;
            CHECK(std::abs(closed.s.s(i, i) - printed_offset - general.s(i, i)) <= 1e-10);
          } else {
            CHECK(std::abs(closed.s.s(i, j) - general.s(i, j)) <= 1e-10);
          }
        }
      }
      // Lambda is i det(M - omega_p I)
      const Matrixcd shifted = cm.m - probe_frequency(p.omega, delta) * Matrixcd::Identity(3, 3);
      CHECK(std::abs(closed.aux.lambda_det - cd(0, 1) * shifted.determinant()) <=
            1e-10 * std::abs(closed.aux.lambda_det));
    }
  }
  SUBCASE("intermediates") {
    const auto r = ring_s_closed(RingParams<double>{0, 1000, 10, 10, pi / 2}, 0.0);
    CHECK(r.aux.x == cd(-1000, 0));
    CHECK(r.aux.j1 == cd(0, -20));
    CHECK(r.aux.j2 == cd(0, 0));
    CHECK(r.s.ports.size() == 3);
  }
  SUBCASE("circulator contrast") {
    const auto r = ring_s_closed(RingParams<double>{0, 1000, 10, 10, pi / 2}, 0.0).s;
    // frozen from an independent numpy inversion of the ring matrix
    CHECK(std::abs(r.at(2, 1)) == doctest::Approx(0.0003999999999872).epsilon(1e-12));
    CHECK(std::abs(r.at(1, 2)) == doctest::Approx(0.01999999999936).epsilon(1e-12));
    const auto flipped = ring_s_closed(RingParams<double>{0, 1000, 10, 10, 3 * pi / 2}, 0.0).s;
    CHECK(std::abs(flipped.at(2, 1)) == doctest::Approx(std::abs(r.at(1, 2))).epsilon(1e-12));
    CHECK(std::abs(flipped.at(1, 2)) == doctest::Approx(std::abs(r.at(2, 1))).epsilon(1e-12));
  }
  SUBCASE("reciprocal at theta = k pi") {
    for (int k = 0; k < 4; ++k) {
      for (double delta : linspace(-200.0, 200.0, 81)) {
        const auto r = ring_s_closed(RingParams<double>{0, 1000, 10, 10, k * pi}, delta).s;
        CHECK(std::abs(std::abs(r.at(1, 2)) - std::abs(r.at(2, 1))) <= 1e-12);
      }
    }
  }
  SUBCASE("pole") {
    const double G = 10;
    RingParams<double> p{0, std::sqrt(3.0) * G, G, G, pi / 2};
    CHECK_THROWS_AS(ring_s_closed(p, G), NumericalError);
    CHECK_NOTHROW(ring_s_closed(p, 0.0));
  }
}

TEST_CASE("chirality") {
  const auto odd = EffectiveParams<double>::critical(10, 10, pi / 2);
  const auto even = EffectiveParams<double>::critical(10, 10, 3 * pi / 2);
  CHECK(*chirality(odd, 0.0).alpha == -1);
  CHECK(*chirality(even, 0.0).alpha == 1);
  CHECK(*chirality(EffectiveParams<double>::critical(10, 10, 0), 0.0).alpha == 0);
  CHECK(std::abs(*chirality(EffectiveParams<double>::critical(10, 10, pi), 0.0).alpha) < 1e-15);
  CHECK_FALSE(chirality(EffectiveParams<double>::critical(0, 0, 0), 0.0).alpha.has_value());

  oracle::Gen gen(38);
  for (int sample = 0; sample < 1000; ++sample) {
    const double G = gen.uniform(0.1, 20), th = gen.uniform(-10, 10), d = gen.uniform(-50, 50);
    const auto a = chirality(EffectiveParams<double>::critical(G, G, th), d);
    const auto b = chirality(EffectiveParams<double>::critical(G, G, th + pi), d);
    REQUIRE(a.alpha.has_value());
    CHECK(*a.alpha >= -1);
    CHECK(*a.alpha <= 1);
    if (b.alpha) CHECK(std::abs(*a.alpha + *b.alpha) <= 1e-12);
  }
}

TEST_CASE("fwhm") {
  SUBCASE("amplitude Lorentzian") {
    const double gamma = 3;
    TransmissionCurve<double> c{ProbeGrid<double>::linspace(-60, 60, 4001), {}, "L"};
    for (double d : c.grid.delta_values) c.values.emplace_back(oracle::lorentzian_amplitude(gamma, d));
    CHECK(fwhm(c) == doctest::Approx(2 * std::sqrt(3.0) * gamma).epsilon(1e-3));
  }
  SUBCASE("power Lorentzian of half-width kappa") {
    const double kappa = 22;
    TransmissionCurve<double> c{ProbeGrid<double>::linspace(-5 * kappa, 5 * kappa, 2001), {}, "L"};
    for (double d : c.grid.delta_values) c.values.emplace_back(oracle::lorentzian_power(kappa, d));
    CHECK(fwhm(c) == doctest::Approx(2 * kappa).epsilon(0.01));
  }
  SUBCASE("undefined cases") {
    TransmissionCurve<double> zero{ProbeGrid<double>::linspace(-1, 1, 11), std::vector<cd>(11), "z"};
    CHECK_THROWS_AS(fwhm(zero), NumericalError);
    TransmissionCurve<double> flat{ProbeGrid<double>::linspace(-1, 1, 11), std::vector<cd>(11, cd(1)), "f"};
    CHECK_THROWS_AS(fwhm(flat), NumericalError);
    TransmissionCurve<double> short_curve{ProbeGrid<double>::linspace(-1, 1, 11), std::vector<cd>(3), "s"};
    CHECK_THROWS_AS(fwhm(short_curve), ValidationError);
  }
  SUBCASE("area") {
    TransmissionCurve<double> c{ProbeGrid<double>::linspace(0, 2, 5), std::vector<cd>(5, cd(0.5)), "c"};
    CHECK(nonreciprocal_area(c) == doctest::Approx(1.0));
  }
}

TEST_CASE("probe grid") {
  CHECK_THROWS_AS(ProbeGrid<double>::linspace(1, -1, 5), ValidationError);
  CHECK_THROWS_AS(ProbeGrid<double>{}.validate(), ValidationError);
  const auto g = ProbeGrid<double>::linspace(-110, 110, 2001);
  CHECK(g.size() == 2001);
  CHECK(g.delta_values.front() == -110);
  CHECK(g.delta_values.back() == 110);
}

TEST_CASE("nonreciprocity curves") {
  ClogSilencer quiet;
  const auto e = EffectiveParams<double>::critical(10, 10, pi / 2);
  const auto grid = ProbeGrid<double>::linspace(-5 * e.kappa(), 5 * e.kappa(), 2001);
  const auto eff = nonreciprocity_curve(e, grid);
  CHECK(eff.values[1000].real() == doctest::Approx(10.0 / 11).epsilon(1e-14));
  for (std::size_t i = 0; i < 1000; ++i)
    CHECK(std::abs(eff.values[i] - eff.values[2000 - i]) <= 1e-14);
  // far wing: kappa (J + G) / |kappa + 5 i kappa|^2
  CHECK(eff.values.front().real() == doctest::Approx(20.0 / (22 * 26)).epsilon(1e-12));

  SUBCASE("full model converges to the effective curve") {
    const auto full = nonreciprocity_curve(lift(e, 1e5 * e.G), grid, full_port_rate(e));
    double worst = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      worst = std::max(worst, std::abs(full.values[i] - eff.values[i]));
    CHECK(worst < 0.01);
  }
  SUBCASE("small mechanical damping gives a narrow spike") {
    const auto full = nonreciprocity_curve(lift(e, 0.1 * e.G), grid, full_port_rate(e));
    CHECK(fwhm(full) < 3 * 0.1 * e.G);
  }
  SUBCASE("warns away from the first EP") {
    nonreciprocity_curve(EffectiveParams<double>::critical(10, 10, 0.3), grid);
    CHECK(quiet.sink.str().find("theta = pi/2") != std::string::npos);
  }
}
