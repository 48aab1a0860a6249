#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rgw/contamination.hpp"
#include "rgw/errors.hpp"
#include "rgw/gw_objective.hpp"
#include "rgw/json_util.hpp"

using namespace rgw;
using testing_helpers::on_line;

TEST_CASE("kind names round-trip") {
  for (AttackKind k : {AttackKind::two_point, AttackKind::far_outlier, AttackKind::mirror_blend,
                       AttackKind::sample_replacement}) {
    CHECK(parse_attack_kind(to_string(k)) == k);
  }
  for (FamilyKind k : {FamilyKind::bounded_moment_k, FamilyKind::sub_gaussian, FamilyKind::sliced_moment_k}) {
    CHECK(parse_family_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_attack_kind("nope"), InputError);
}

TEST_CASE("two-point pair has the closed-form gap and moment") {
  for (double eps : {0.01, 0.05, 0.2}) {
    const TwoPointPair p = two_point_pair(1.0, 8.0, eps);
    CHECK(p.a == doctest::Approx(std::pow(eps, -1.0 / 8.0)));
    CHECK(p.gap == doctest::Approx(std::sqrt(2.0 * (1.0 - eps)) * std::pow(eps, 0.25)));
    CHECK(gw_to_point(p.mu1) == doctest::Approx(p.gap));
    CHECK(tv_distance(p.mu1, p.point) == doctest::Approx(eps));
    // The k-th moment of mu1 is exactly sigma^k.
    CHECK(eps * std::pow(p.a, 8.0) == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(two_point_pair(1.0, 8.0, 0.0), InputError);
}

TEST_CASE("mirror blend keeps each side within eps and shrinks the TV") {
  const DiscreteMeasure mu = on_line({{0.0, 0.5}, {1.0, 0.5}});
  const DiscreteMeasure nu = on_line({{0.0, 0.2}, {5.0, 0.8}});
  for (double eps : {0.1, 0.3, 0.5}) {
    const BlendedPair b = mirror_blend(mu, nu, eps);
    const double tv = tv_distance(mu, nu);
    CHECK(tv_distance(b.mu, mu) == doctest::Approx(eps * tv));
    CHECK(tv_distance(b.nu, nu) == doctest::Approx(eps * tv));
    CHECK(tv_distance(b.mu, b.nu) == doctest::Approx(std::abs(1.0 - 2.0 * eps) * tv));
  }
}

TEST_CASE("far outlier moves exactly eps mass to radius R") {
  const DiscreteMeasure mu = on_line({{0.0, 0.5}, {1.0, 0.5}});
  const DiscreteMeasure out = far_outlier(mu, 0.1, 1000.0, 1);
  CHECK(tv_distance(out, mu) == doctest::Approx(0.1));
  CHECK(std::abs(out.point(out.size() - 1)(0)) == doctest::Approx(1000.0));
  CHECK(far_outlier(mu, 0.0, 1000.0, 1).identical_to(mu));
  const Eigen::RowVectorXd u = random_direction(4, 9);
  CHECK(u.norm() == doctest::Approx(1.0));
  CHECK(random_direction(4, 9) == u);
}

TEST_CASE("corruption count and sample corruption") {
  CHECK(corruption_count(0.05, 100) == 5);
  CHECK(corruption_count(0.1, 30) == 3);
  CHECK(corruption_count(0.011, 100) == 2);
  CHECK(corruption_count(0.0, 100) == 0);

  Rng rng(41);
  Matrix samples(50, 2);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < samples.size(); ++i) samples.data()[i] = normal(rng);
  ContaminationSpec spec;
  spec.kind = AttackKind::sample_replacement;
  spec.seed = 5;
  const CorruptedSamples c = corrupt_samples(samples, 0.1, spec);
  REQUIRE(c.modified.size() == 5);
  CHECK(std::is_sorted(c.modified.begin(), c.modified.end()));
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const bool moved = std::binary_search(c.modified.begin(), c.modified.end(), static_cast<std::size_t>(i));
    if (moved) {
      CHECK(c.points.row(i).norm() == doctest::Approx(1000.0));
    } else {
      CHECK(c.points.row(i) == samples.row(i));
    }
  }
  const CorruptedSamples again = corrupt_samples(samples, 0.1, spec);
  CHECK(again.modified == c.modified);
  spec.kind = AttackKind::mirror_blend;
  CHECK_THROWS_AS(corrupt_samples(samples, 0.1, spec), InputError);
}

TEST_CASE("family members hit their moment constraint") {
  FamilySpec two_atom;
  CHECK(family_moment(two_atom) == doctest::Approx(std::pow(two_atom.sigma, two_atom.k)));
  FamilySpec pareto;
  pareto.member = "pareto";
  pareto.dim = 3;
  CHECK(family_moment(pareto) == doctest::Approx(std::pow(pareto.sigma, pareto.k)));
}

TEST_CASE("family gw_to_point closed forms agree with Monte Carlo") {
  std::vector<FamilySpec> specs(4);
  specs[1].member = "pareto";
  specs[1].dim = 2;
  specs[2].family = FamilyKind::sub_gaussian;
  specs[2].dim = 2;
  specs[3].family = FamilyKind::sliced_moment_k;
  specs[3].dim = 3;
  for (const FamilySpec& s : specs) {
    CAPTURE(to_string(s.family));
    const Matrix x = sample_family(s, 200000, 77);
    const double mc = gw_to_point(DiscreteMeasure::empirical(x));
    // Heavy-tailed Pareto draws converge slowly.
    CHECK(mc == doctest::Approx(family_gw_to_point(s)).epsilon(s.member == "pareto" ? 0.1 : 0.03));
  }
}

TEST_CASE("sub-Gaussian member has the variance that makes the Orlicz norm equal sigma") {
  FamilySpec s;
  s.family = FamilyKind::sub_gaussian;
  s.dim = 2;
  const Matrix x = sample_family(s, 400000, 78);
  const double var = x.col(0).squaredNorm() / static_cast<double>(x.rows());
  CHECK(var == doctest::Approx(3.0 / 8.0).epsilon(0.01));
  // E exp(X^2 / sigma^2) = (1 - 2 var / sigma^2)^(-1/2) for a centered Gaussian.
  CHECK(1.0 / std::sqrt(1.0 - 2.0 * (3.0 / 8.0)) == doctest::Approx(2.0));
}

TEST_CASE("spec validation and JSON errors carry the key path") {
  ContaminationSpec c;
  c.eps = 1.5;
  CHECK_THROWS_AS(c.validate(), InputError);
  FamilySpec f;
  f.k = 3.0;
  CHECK_THROWS_AS(f.validate(), InputError);
  try {
    family_from_json(nlohmann::json{{"family", "bounded_moment_k"}, {"k", "eight"}});
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "family.k");
  }
  try {
    contamination_from_json(nlohmann::json{{"kind", "two_point"}, {"extra", 1}});
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "adversary.extra");
  }
}
