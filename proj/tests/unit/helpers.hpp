#pragma once

#include <random>
#include <vector>

#include "rgw/measures.hpp"
#include "rgw/seeding.hpp"

namespace testing_helpers {

inline rgw::DiscreteMeasure random_measure(rgw::Rng& rng, std::size_t atoms, std::size_t dim, double spread = 1.0) {
  std::normal_distribution<double> normal(0.0, spread);
  std::uniform_real_distribution<double> uniform(0.1, 1.0);
  rgw::Matrix pts(static_cast<Eigen::Index>(atoms), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = normal(rng);
  std::vector<double> w(atoms);
  for (double& x : w) x = uniform(rng);
  return rgw::normalize(rgw::DiscreteMeasure(pts, w));
}

inline rgw::DiscreteMeasure on_line(std::initializer_list<std::pair<double, double>> atoms) {
  rgw::Matrix pts(static_cast<Eigen::Index>(atoms.size()), 1);
  std::vector<double> w;
  Eigen::Index i = 0;
  for (const auto& [x, m] : atoms) {
    pts(i++, 0) = x;
    w.push_back(m);
  }
  return rgw::DiscreteMeasure(pts, w);
}

inline rgw::Matrix random_rotation(rgw::Rng& rng, std::size_t dim) {
  std::normal_distribution<double> normal;
  rgw::Matrix g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  Eigen::HouseholderQR<rgw::Matrix> qr(g);
  return qr.householderQ();
}

}  // namespace testing_helpers
