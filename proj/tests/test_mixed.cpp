#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "martrep/mixed.hpp"
#include "martrep/representation.hpp"

using namespace martrep;
using doctest::Approx;

namespace {
constexpr double kNever = std::numeric_limits<double>::infinity();
}

TEST_CASE("presets exist and validate") {
  for (const auto& def : preset_definitions()) CHECK_NOTHROW(make_mixed_model(def));
  CHECK_THROWS_AS(make_preset("no-such"), ValidationError);
  MixedModel m = make_preset("kusuoka-mmm");
  CHECK(m.horizon == 4);
  CHECK(m.eta_values.size() == 3);
  CHECK(m.tau_atom_marginal(0) == Approx(0.1 + 0.075 + 0.125));
}

TEST_CASE("triplet evaluators against the closed forms") {
  MixedModel m = make_preset("kusuoka-mmm");
  TripletEvaluator eval(m);

  const double p_eta1 = 0.2;
  const double b = 0.3 / 0.8;          // P(eta=2 | eta != 1)
  const double a2 = 0.1 + 0.075 + 0.125;  // P(tau = 2)

  SUBCASE("M: jump part matches the display") {
    auto m_closed = [&](double t, double eta) {
      double ind = eta <= t ? 1.0 : 0.0;
      double second = (eta == 1 ? 0.0 : b);  // P(eta=2 | sigma{eta=1}) as a r.v.
      return ind - p_eta1 * (t >= 1 ? 1 : 0) - second * (t >= 2 ? 1 : 0) -
             (eta == 3 && t >= 3 ? 1.0 : 0.0);
    };
    for (double eta : {1.0, 2.0, 3.0})
      for (double t : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0})
        CHECK(eval.m(t, 0.0, eta) == Approx(m_closed(t, eta)).epsilon(1e-12));
    // and the Brownian part enters additively
    CHECK(eval.m(2.0, 0.7, 1.0) == Approx(0.7 + m_closed(2.0, 1.0)));
  }

  SUBCASE("H-prime matches the display") {
    auto hp_closed = [&](double t, double eta, double tau) {
      double cond = eta == 1 ? 0.5 : 0.25;  // P(tau=2 | sigma{eta=1})
      return (tau <= t ? 1.0 : 0.0) - cond * (t >= 2 ? 1 : 0) -
             (tau == 4 && t >= 4 ? 1.0 : 0.0);
    };
    for (double eta : {1.0, 2.0, 3.0})
      for (double tau : {2.0, 4.0})
        for (double t : {0.0, 1.0, 1.5, 2.0, 3.0, 4.0})
          CHECK(eval.h_prime(t, eta, tau) == Approx(hp_closed(t, eta, tau)).epsilon(1e-12));
  }

  SUBCASE("[M,H] carries its only atom at the shared time t=2") {
    CHECK(eval.shared_atoms() == std::vector<double>{2.0});
    auto mh_closed = [&](double t, double eta, double tau) {
      if (t < 2) return 0.0;
      double pe2s1 = eta == 1 ? 0.0 : b;
      double i_te = (tau == 2 && eta == 2) ? 1.0 : 0.0;
      return i_te - a2 * (eta == 2 ? 1.0 : 0.0) - (tau == 2 ? 1.0 : 0.0) * pe2s1 + a2 * pe2s1;
    };
    for (double eta : {1.0, 2.0, 3.0})
      for (double tau : {2.0, 4.0})
        for (double t : {0.0, 1.9, 2.0, 3.7, 4.0})
          CHECK(eval.mh(t, eta, tau) == Approx(mh_closed(t, eta, tau)).epsilon(1e-12));
  }

  SUBCASE("independence does not kill the shared atom") {
    // product law on the same support: [M,H] still jumps at t=2
    MixedModel ind = m;
    ind.tau_given_eta = {{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}};
    TripletEvaluator ev(ind);
    CHECK(ev.shared_atoms() == std::vector<double>{2.0});
    CHECK(ev.mh(2.0, 2.0, 2.0) != 0.0);
  }

  SUBCASE("degenerate tau = 4 is fully compensated at the end") {
    MixedModel deg = m;
    deg.tau_values = {4};
    deg.tau_given_eta = {{1.0}, {1.0}, {1.0}};
    TripletEvaluator ev(deg);
    for (double t : {0.0, 1.0, 3.0, 3.999, 4.0})
      for (double eta : {1.0, 2.0, 3.0}) CHECK(ev.h_prime(t, eta, 4.0) == Approx(0.0));
  }
}

TEST_CASE("H-compensator with a density component integrates the hazard exactly") {
  MixedModel m = make_preset("density");
  TripletEvaluator eval(m);
  // uniform law on (0,4]: A(t) = -log(1 - t/4) before tau, constant after
  for (double tau : {0.5, 1.7, 3.2}) {
    for (double t : {0.25, 1.0, 2.0, 3.9}) {
      double upto = std::min(t, tau);
      double expected = -std::log(1.0 - upto / 4.0);
      CHECK(eval.a_tau_h(t, tau) == Approx(expected).epsilon(1e-12));
    }
  }
  // tau independent of eta: the G-compensator coincides with the H one
  for (double tau : {0.5, 2.5})
    for (double eta : {1.0, 3.0})
      for (double t : {0.7, 1.3, 3.5})
        CHECK(eval.a_tau_g(t, eta, tau) == Approx(eval.a_tau_h(t, tau)).epsilon(1e-12));
  // and the G-compensator has no atoms: the time stays totally inaccessible
  CHECK(eval.g_compensator_atoms().empty());
  CHECK(eval.shared_atoms().empty());
}

TEST_CASE("law decomposition splits atoms from density") {
  RandomTimeLaw law;
  law.horizon = 5;
  law.atom_times = {2, 4};
  law.atom_masses = {0.5, 0.3};
  law.density_weight = 0.2;
  auto d = classify_time(law);
  CHECK(d.accessible_mass == Approx(0.8));
  CHECK(d.inaccessible_mass == Approx(0.2));
  CHECK(d.accessible.atom_times == std::vector<double>{2, 4});
  CHECK(d.inaccessible.atom_times.empty());

  RandomTimeLaw atomic = law;
  atomic.density_weight = 0;
  auto d2 = classify_time(atomic);
  CHECK(d2.inaccessible_mass == 0.0);
}

TEST_CASE("mixed Yoeurp decomposition") {
  SUBCASE("W plus an atomic occurrence martingale") {
    MixedMartingaleSpec spec;
    spec.jump_law.horizon = 4;
    spec.jump_law.atom_times = {1, 2, 3};
    spec.jump_law.atom_masses = {0.2, 0.3, 0.5};
    auto parts = mixed_yoeurp_parts(spec);
    CHECK(parts.parts_orthogonal);
    CHECK(parts.continuous(1.0, 0.42) == Approx(0.42));
    for (double theta : {1.0, 2.0, 3.0})
      for (double t : {0.5, 1.0, 2.5, 4.0}) CHECK(parts.inaccessible(t, theta) == 0.0);
    // the accessible part is the full compensated occurrence here
    CHECK(parts.accessible(4.0, 2.0) == Approx(1.0 - (0.2 + 0.3 / 0.8)));
  }

  SUBCASE("pure density law: everything sits in the inaccessible part") {
    MixedMartingaleSpec spec;
    spec.brownian_coefficient = 0;
    spec.jump_law.horizon = 4;
    spec.jump_law.density_weight = 1.0;
    auto parts = mixed_yoeurp_parts(spec);
    for (double theta : {0.5, 2.0})
      for (double t : {1.0, 3.0}) {
        CHECK(parts.continuous(t, 1.23) == 0.0);
        CHECK(parts.accessible(t, theta) == 0.0);
        double upto = std::min(t, theta);
        double expected = (theta <= t ? 1.0 : 0.0) + std::log(1.0 - upto / 4.0);
        CHECK(parts.inaccessible(t, theta) == Approx(expected).epsilon(1e-12));
      }
  }

  SUBCASE("mixed law: parts sum to the full compensated occurrence") {
    MixedMartingaleSpec spec;
    spec.jump_law.horizon = 4;
    spec.jump_law.atom_times = {2};
    spec.jump_law.atom_masses = {0.5};
    spec.jump_law.density_weight = 0.5;
    auto parts = mixed_yoeurp_parts(spec);
    MixedModel carrier;
    carrier.horizon = 4;
    carrier.eta_values = {1};
    carrier.eta_probs = {1.0};
    carrier.tau_values = {2};
    carrier.tau_given_eta = {{0.5}};
    carrier.tau_density_weight = 0.5;
    TripletEvaluator eval(carrier);
    for (double theta : {0.7, 2.0, 3.1})
      for (double t : {0.5, 1.0, 2.0, 3.0, 4.0}) {
        double full = eval.h(t, theta);
        CHECK(parts.accessible(t, theta) + parts.inaccessible(t, theta) ==
              Approx(full).epsilon(1e-12));
      }
  }
}

TEST_CASE("mixed classifier verdicts") {
  CHECK(classify_mixed(make_preset("kusuoka-mmm")).verdict == 3);
  CHECK(classify_mixed(make_preset("kusuoka-violating")).verdict == 3);
  CHECK(classify_mixed(make_preset("m2")).verdict == 3);

  auto density = classify_mixed(make_preset("density"));
  CHECK(density.verdict == 2);
  CHECK(density.accessibles_singular);
  CHECK(density.lebesgue_density_overlap);

  auto apd = classify_mixed(make_preset("atoms-plus-density"));
  CHECK(apd.verdict == 2);
  CHECK(apd.accessibles_singular);

  SUBCASE("disjoint atoms with no density component is verdict 1") {
    MixedModel m;
    m.horizon = 4;
    m.eta_values = {1, 3};
    m.eta_probs = {0.4, 0.6};
    m.tau_values = {2, 4};
    m.tau_given_eta = {{0.5, 0.5}, {0.5, 0.5}};
    auto r = classify_mixed(m);
    CHECK(r.verdict == 1);
    CHECK(r.totals_singular);
  }

  SUBCASE("purely atomic verdicts agree with the finite classifier") {
    for (const char* name : {"kusuoka-mmm", "kusuoka-violating", "m2"}) {
      MixedModel m = make_preset(name);
      auto jm = induce_finite_model(m);
      auto d = decoupling_exists(jm);
      REQUIRE(d.exists);
      auto p_star = martingale_preserving_measure(jm, *d.q).p_star;
      auto fin = classify_multiplicity(jm, jm.p(), p_star);
      CHECK(fin.verdict == classify_mixed(m).verdict);
    }
  }
}

TEST_CASE("covariation only sees the accessible parts (mixed check)") {
  // Adding a density component to tau's law does not create new [M,H] atoms,
  // and pathwise [M,H] equals the covariation against the accessible part.
  MixedModel with_density = make_preset("atoms-plus-density");
  TripletEvaluator eval(with_density);
  CHECK(eval.shared_atoms().empty());  // eta {1,3} vs tau {2,4}
  for (double eta : {1.0, 3.0})
    for (double tau : {0.7, 2.0, 4.0})
      for (double t : {1.0, 2.0, 3.0, 4.0}) CHECK(eval.mh(t, eta, tau) == 0.0);

  // A model with a genuinely shared atom keeps exactly that atom when the
  // density weight is added.
  MixedModel shared;
  shared.horizon = 4;
  shared.eta_values = {2, 3};
  shared.eta_probs = {0.5, 0.5};
  shared.tau_values = {2};
  shared.tau_given_eta = {{0.8}, {0.8}};
  shared.tau_density_weight = 0.2;
  TripletEvaluator ev2(shared);
  CHECK(ev2.shared_atoms() == std::vector<double>{2.0});
  MixedMartingaleSpec spec;
  spec.jump_law = shared.tau_marginal_law();
  auto parts = mixed_yoeurp_parts(spec);
  for (double eta : {2.0, 3.0})
    for (double tau : {0.5, 2.0, 3.5}) {
      double dm = (eta == 2 ? 1.0 : 0.0) - (eta >= 2 ? ev2.eta_hazard(0) : 0.0);
      double dh_dp = parts.accessible(2.0, tau) - parts.accessible(1.999999, tau);
      CHECK(ev2.mh(4.0, eta, tau) == Approx(dm * dh_dp).epsilon(1e-9));
    }
}

TEST_CASE("induced finite model matches the hand-built M2") {
  auto jm = induce_finite_model(make_preset("m2"));
  auto reference = martrep::testing::m2_model<double>();
  REQUIRE(jm.space.n_atoms() == 4);
  CHECK(jm.space.grid() == reference.space.grid());
  for (AtomIx a = 0; a < 4; ++a)
    CHECK(jm.p().w[a] == Approx(reference.p().w[a]).epsilon(1e-15));
  CHECK(jm.g().at(1).cell_count() == 4);
  CHECK_THROWS_AS(induce_finite_model(make_preset("density")), UnsupportedError);
}
