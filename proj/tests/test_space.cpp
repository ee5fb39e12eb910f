#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "martrep/space.hpp"

using namespace martrep;
using martrep::testing::fuzz_joint_model;
using martrep::testing::m2_model;

TEST_CASE("partition construction and canonical form") {
  Partition p = Partition::from_cells(4, {{2, 3}, {0, 1}});
  CHECK(p.cell_count() == 2);
  CHECK(p.cell_of(0) == p.cell_of(1));
  CHECK(p.cell_of(2) == p.cell_of(3));
  CHECK(p.cell_of(0) != p.cell_of(2));
  // canonical numbering by first atom
  CHECK(p.cell(0).front() == 0);

  CHECK_THROWS_AS(Partition::from_cells(3, {{0, 1}, {1, 2}}), ValidationError);
  CHECK_THROWS_AS(Partition::from_cells(3, {{0, 1}}), ValidationError);
  CHECK_THROWS_AS(Partition::from_cells(3, {{0, 1, 2}, {}}), ValidationError);
}

TEST_CASE("partition join and refinement") {
  Partition by_eta = Partition::from_keys(std::vector<int>{1, 1, 2, 2});
  Partition by_tau = Partition::from_keys(std::vector<int>{1, 2, 1, 2});
  Partition joined = by_eta.join(by_tau);
  CHECK(joined.cell_count() == 4);
  CHECK(joined.refines(by_eta));
  CHECK(joined.refines(by_tau));
  CHECK(!by_eta.refines(joined));
  CHECK(by_eta.join(by_eta) == by_eta);                      // idempotent
  CHECK(Partition::trivial(4).join(by_tau) == by_tau);       // neutral element
}

TEST_CASE("cond_exp identity, M2 values, degenerate cells") {
  auto jm = m2_model<Rational>();
  const auto& p = jm.p();

  SUBCASE("constant rv is reproduced on any partition") {
    std::vector<Rational> rv(4, Rational(7, 3));
    auto out = cond_exp(rv, jm.g().at(1), p);
    for (const auto& v : out) CHECK(v == Rational(7, 3));
  }

  SUBCASE("indicator of tau=1 under the trivial partition") {
    std::vector<Rational> rv = {1, 0, 1, 0};
    auto out = cond_exp(rv, Partition::trivial(4), p);
    for (const auto& v : out) CHECK(v == Rational(2, 5));
  }

  SUBCASE("indicator of tau=1 conditioned on eta at t=1") {
    std::vector<Rational> rv = {1, 0, 1, 0};
    auto out = cond_exp(rv, jm.f().at(1), p);
    CHECK(out[0] == Rational(1, 3));  // on {eta=1}
    CHECK(out[1] == Rational(1, 3));
    CHECK(out[2] == Rational(3, 7));  // on {eta=2}
    CHECK(out[3] == Rational(3, 7));
  }

  SUBCASE("degenerate cell raises and names the cell") {
    Measure<Rational> degenerate;
    degenerate.w = {Rational(1, 2), Rational(1, 2), Rational(0), Rational(0)};
    std::vector<Rational> rv = {1, 0, 1, 0};
    CHECK_THROWS_AS(cond_exp(rv, jm.f().at(1), degenerate), DegenerateCellError);
    CHECK_NOTHROW(cond_exp(rv, jm.f().at(1), degenerate, ZeroCellPolicy::kZeroFill));
  }
}

TEST_CASE("tower property holds exactly on fuzzed models") {
  std::mt19937_64 rng(20240811);
  for (int trial = 0; trial < 30; ++trial) {
    auto fm = fuzz_joint_model(rng);
    const auto& space = fm.jm.space;
    const auto& p = fm.jm.p();
    std::vector<Rational> rv;
    for (std::size_t a = 0; a < space.n_atoms(); ++a)
      rv.push_back(Rational(static_cast<long long>(rng() % 19) - 9, 7));
    std::size_t last = space.n_times() - 1;
    const Partition& fine = fm.jm.g().at(last);
    const Partition& coarse = fm.jm.g().at(0);
    auto through_fine = cond_exp(cond_exp(rv, fine, p, ZeroCellPolicy::kZeroFill), coarse, p,
                                 ZeroCellPolicy::kZeroFill);
    auto direct = cond_exp(rv, coarse, p, ZeroCellPolicy::kZeroFill);
    for (std::size_t a = 0; a < rv.size(); ++a)
      if (p.positive(static_cast<AtomIx>(a))) CHECK(through_fine[a] == direct[a]);
  }
}

TEST_CASE("join_filtrations on M2 and refinement monotonicity") {
  auto jm = m2_model<double>();
  CHECK(jm.g().at(1).cell_count() == 4);
  CHECK(jm.g().at(0).cell_count() == 1);
  for (std::size_t k = 0; k < jm.space.n_times(); ++k) {
    CHECK(jm.g().at(k).cell_count() >= jm.f().at(k).cell_count());
    CHECK(jm.g().at(k).cell_count() >= jm.h().at(k).cell_count());
  }
  // joining a filtration with itself changes nothing
  Filtration same = join_filtrations(jm.f(), jm.f());
  for (std::size_t k = 0; k < jm.space.n_times(); ++k) CHECK(same.at(k) == jm.f().at(k));
  // F trivial at all times: join equals H
  Filtration trivial;
  for (std::size_t k = 0; k < jm.space.n_times(); ++k)
    trivial.levels.push_back(Partition::trivial(4));
  Filtration g2 = join_filtrations(trivial, jm.h());
  for (std::size_t k = 0; k < jm.space.n_times(); ++k) CHECK(g2.at(k) == jm.h().at(k));
}

TEST_CASE("natural filtration of an occurrence process") {
  SUBCASE("deterministic time gives the trivial filtration") {
    RandomTime t{{1, 1, 1}};
    Filtration f = natural_filtration(3, t);
    for (std::size_t k = 0; k < 3; ++k) CHECK(f.at(k).is_trivial());
  }
  SUBCASE("M2 tau") {
    RandomTime tau{{1, 2, 1, 2}};
    Filtration h = natural_filtration(3, tau);
    CHECK(h.at(0).is_trivial());
    CHECK(h.at(1).cell_count() == 2);  // {tau=1}, {tau>1}
    CHECK(h.at(2).cell_count() == 2);  // {tau=1}, {tau=2}
    CHECK(h.at(1) == h.at(2));         // same grouping here
  }
  SUBCASE("never-occurring time gives the trivial filtration") {
    RandomTime t{{RandomTime::kNever, RandomTime::kNever}};
    Filtration f = natural_filtration(2, t);
    CHECK(f.at(0).is_trivial());
    CHECK(f.at(1).is_trivial());
  }
}

TEST_CASE("stopping-time validation rejects level sets that split cells") {
  RandomTime tau{{1, 2, 1, 2}};
  Filtration h = natural_filtration(3, tau);
  CHECK(is_stopping_time(tau, h));
  // eta is not an H-stopping time in M2: {eta<=1} splits the {tau=1} cell
  RandomTime eta{{1, 1, 2, 2}};
  CHECK(!is_stopping_time(eta, h));
}

TEST_CASE("measure validation") {
  FiniteSpace<double> space({"a", "b"}, {0, 1});
  CHECK_THROWS_AS(space.add_measure("bad", Measure<double>{{0.5, 0.49}}), ValidationError);
  CHECK_THROWS_AS(space.add_measure("neg", Measure<double>{{-0.1, 1.1}}), ValidationError);
  CHECK_NOTHROW(space.add_measure("ok", Measure<double>{{0.25, 0.75}}));
  Measure<double> a{{0.5, 0.5}}, b{{1.0, 0.0}};
  CHECK(!a.equivalent(b));
  CHECK(a.equivalent(Measure<double>{{0.9, 0.1}}));
}

TEST_CASE("grid must strictly increase") {
  CHECK_THROWS_AS(FiniteSpace<double>({"a"}, {0, 1, 1}), ValidationError);
  CHECK_THROWS_AS(FiniteSpace<double>({"a"}, {1, 0}), ValidationError);
}

TEST_CASE("adapted and predictable table checks") {
  auto jm = m2_model<double>();
  ProcessTable<double> occ = occurrence_process<double>(3, jm.tau());
  CHECK(is_adapted(occ, jm.h()));
  CHECK(is_adapted(occ, jm.g()));
  CHECK(!is_adapted(occ, jm.f()));
  CHECK(!is_predictable(occ, jm.h()));
  ProcessTable<double> det(4, 3, 1.5);
  CHECK(is_predictable(det, jm.h()));
  for (AtomIx a = 0; a < 4; ++a)
    for (std::size_t k = 0; k < 3; ++k) CHECK((occ.at(a, k) == 0.0 || occ.at(a, k) == 1.0));
}
