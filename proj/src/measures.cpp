#include "rgw/measures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "rgw/errors.hpp"
#include "rgw/format.hpp"

namespace rgw {

namespace {

using Key = std::vector<double>;

Key key_of(const Matrix& pts, Eigen::Index i) {
  Key k(static_cast<std::size_t>(pts.cols()));
  for (Eigen::Index c = 0; c < pts.cols(); ++c) k[static_cast<std::size_t>(c)] = pts(i, c) + 0.0;
  return k;
}

void check_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw InputError(std::string(op) + ": dimension mismatch (" + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()) + ")");
  }
}

// Masses of both measures on the union of their supports, keyed by point.
struct Overlay {
  std::map<Key, std::pair<long double, long double>> mass;
};

Overlay overlay(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  Overlay o;
  for (std::size_t i = 0; i < a.size(); ++i) {
    o.mass[key_of(a.points(), static_cast<Eigen::Index>(i))].first += a.weight(i);
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    o.mass[key_of(b.points(), static_cast<Eigen::Index>(i))].second += b.weight(i);
  }
  return o;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw InputError("csv line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::size_t dim) : dim_(dim), points_(0, static_cast<Eigen::Index>(dim)) {}

DiscreteMeasure::DiscreteMeasure(Matrix points, std::vector<double> weights)
    : dim_(static_cast<std::size_t>(points.cols())), points_(std::move(points)), weights_(std::move(weights)) {
  if (static_cast<std::size_t>(points_.rows()) != weights_.size()) {
    throw InputError("measure: " + std::to_string(points_.rows()) + " points but " +
                     std::to_string(weights_.size()) + " weights");
  }
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("measure: weights must be finite and nonnegative");
  }
  if (!points_.allFinite()) throw InputError("measure: non-finite coordinate");
}

DiscreteMeasure DiscreteMeasure::dirac(const Vector& at, double mass) {
  Matrix p(1, at.size());
  p.row(0) = at.transpose();
  return DiscreteMeasure(std::move(p), {mass});
}

DiscreteMeasure DiscreteMeasure::empirical(Matrix samples) {
  const auto n = static_cast<std::size_t>(samples.rows());
  if (n == 0) throw InputError("empirical measure needs at least one sample");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  return DiscreteMeasure(std::move(samples), std::move(w));
}

Vector DiscreteMeasure::weight_vector() const {
  return Eigen::Map<const Vector>(weights_.data(), static_cast<Eigen::Index>(weights_.size()));
}

double DiscreteMeasure::total_mass() const {
  long double s = 0.0L;
  for (double w : weights_) s += w;
  return static_cast<double>(s);
}

bool DiscreteMeasure::is_probability() const { return std::abs(total_mass() - 1.0) <= 1e-12; }

DiscreteMeasure DiscreteMeasure::merged() const {
  std::map<Key, std::size_t> index;
  std::vector<Eigen::Index> rows;
  std::vector<long double> mass;
  for (std::size_t i = 0; i < size(); ++i) {
    auto [it, inserted] = index.emplace(key_of(points_, static_cast<Eigen::Index>(i)), rows.size());
    if (inserted) {
      rows.push_back(static_cast<Eigen::Index>(i));
      mass.push_back(weights_[i]);
    } else {
      mass[it->second] += weights_[i];
    }
  }
  Matrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim_));
  std::vector<double> w(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    pts.row(static_cast<Eigen::Index>(r)) = points_.row(rows[r]);
    w[r] = static_cast<double>(mass[r]);
  }
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure DiscreteMeasure::without_null_atoms() const {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < size(); ++i) {
    if (weights_[i] > 0.0) keep.push_back(static_cast<Eigen::Index>(i));
  }
  Matrix pts(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(dim_));
  std::vector<double> w;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    pts.row(static_cast<Eigen::Index>(r)) = points_.row(keep[r]);
    w.push_back(weights_[static_cast<std::size_t>(keep[r])]);
  }
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure DiscreteMeasure::scaled(double factor) const {
  std::vector<double> w = weights_;
  for (double& x : w) x *= factor;
  return DiscreteMeasure(points_, std::move(w));
}

DiscreteMeasure DiscreteMeasure::with_atom(const Eigen::RowVectorXd& at, double mass) const {
  if (static_cast<std::size_t>(at.size()) != dim_) throw InputError("with_atom: dimension mismatch");
  Matrix pts(points_.rows() + 1, points_.cols());
  pts.topRows(points_.rows()) = points_;
  pts.row(points_.rows()) = at;
  std::vector<double> w = weights_;
  w.push_back(mass);
  return DiscreteMeasure(std::move(pts), std::move(w));
}

bool DiscreteMeasure::identical_to(const DiscreteMeasure& other) const {
  return dim_ == other.dim_ && weights_ == other.weights_ && points_.rows() == other.points_.rows() &&
         points_ == other.points_;
}

DiscreteMeasure operator+(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) throw InputError("measure sum: dimension mismatch");
  Matrix pts(a.points().rows() + b.points().rows(), static_cast<Eigen::Index>(a.dim()));
  pts.topRows(a.points().rows()) = a.points();
  pts.bottomRows(b.points().rows()) = b.points();
  std::vector<double> w(a.weights().begin(), a.weights().end());
  w.insert(w.end(), b.weights().begin(), b.weights().end());
  return DiscreteMeasure(std::move(pts), std::move(w));
}

Matrix squared_distances(const Matrix& points) {
  const Eigen::Index n = points.rows();
  Matrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = 0.0;
    for (Eigen::Index k = i + 1; k < n; ++k) {
      double d = (points.row(i) - points.row(k)).squaredNorm();
      c(i, k) = d;
      c(k, i) = d;
    }
  }
  return c;
}

MMSpace::MMSpace(DiscreteMeasure measure)
    : measure_(std::move(measure)), cost_(squared_distances(measure_.points())) {}

MMSpace::MMSpace(DiscreteMeasure measure, Matrix cost) : measure_(std::move(measure)), cost_(std::move(cost)) {
  const auto n = static_cast<Eigen::Index>(measure_.size());
  if (cost_.rows() != n || cost_.cols() != n) throw InputError("mm-space: cost matrix size mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cost_(i, i) != 0.0) throw InputError("mm-space: cost diagonal must be zero");
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!(cost_(i, k) >= 0.0) || cost_(i, k) != cost_(k, i)) {
        throw InputError("mm-space: cost must be symmetric and nonnegative");
      }
    }
  }
}

double tv_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  check_same_dim(a, b, "tv_distance");
  long double s = 0.0L;
  for (const auto& [pt, m] : overlay(a, b).mass) s += std::fabs(m.first - m.second);
  return static_cast<double>(s / 2.0L);
}

DiscreteMeasure measure_min(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  check_same_dim(a, b, "measure_min");
  const Overlay o = overlay(a, b);
  const DiscreteMeasure am = a.merged();
  std::vector<Eigen::Index> rows;
  std::vector<double> w;
  // Atoms of a (merged, original order) that also carry an atom of b.
  std::map<Key, bool> in_b;
  for (std::size_t i = 0; i < b.size(); ++i) in_b[key_of(b.points(), static_cast<Eigen::Index>(i))] = true;
  for (std::size_t i = 0; i < am.size(); ++i) {
    Key k = key_of(am.points(), static_cast<Eigen::Index>(i));
    if (!in_b.count(k)) continue;
    const auto& m = o.mass.at(k);
    rows.push_back(static_cast<Eigen::Index>(i));
    w.push_back(static_cast<double>(std::min(m.first, m.second)));
  }
  Matrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(a.dim()));
  for (std::size_t r = 0; r < rows.size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = am.points().row(rows[r]);
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure normalize(const DiscreteMeasure& a) {
  long double total = 0.0L;
  for (double w : a.weights()) total += w;
  if (!(total > 0.0L)) throw InputError("normalize: measure has zero total mass");
  std::vector<double> w(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) w[i] = static_cast<double>(a.weight(i) / total);
  // Push the rounding residual onto the heaviest atom.
  long double s = 0.0L;
  for (double x : w) s += x;
  auto heaviest = std::max_element(w.begin(), w.end());
  *heaviest = static_cast<double>(*heaviest + (1.0L - s));
  return DiscreteMeasure(a.points(), std::move(w));
}

DiscreteMeasure apply_isometry(const DiscreteMeasure& a, const Matrix& rotation, const Vector& shift) {
  const auto d = static_cast<Eigen::Index>(a.dim());
  if (rotation.rows() != d || rotation.cols() != d || shift.size() != d) {
    throw InputError("apply_isometry: dimension mismatch");
  }
  const double defect = (rotation.transpose() * rotation - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  if (d > 0 && defect > 1e-10) throw InputError("apply_isometry: rotation is not orthogonal");
  Matrix pts = (a.points() * rotation.transpose()).rowwise() + shift.transpose();
  return DiscreteMeasure(std::move(pts), std::vector<double>(a.weights().begin(), a.weights().end()));
}

DiscreteMeasure measure_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("measure json: ") + e.what());
  }
  if (!j.is_object()) throw InputError("measure json: top level must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "dim" && key != "points" && key != "weights") throw InputError("measure json: unknown key '" + key + "'");
  }
  if (!j.contains("dim") || !j["dim"].is_number_unsigned()) throw InputError("measure json: 'dim' must be a nonnegative integer");
  if (!j.contains("points") || !j["points"].is_array()) throw InputError("measure json: 'points' must be an array");
  if (!j.contains("weights") || !j["weights"].is_array()) throw InputError("measure json: 'weights' must be an array");
  const auto d = j["dim"].get<std::size_t>();
  const auto& pts = j["points"];
  Matrix p(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].is_array() || pts[i].size() != d) {
      throw InputError("measure json: point " + std::to_string(i) + " does not have dim coordinates");
    }
    for (std::size_t c = 0; c < d; ++c) {
      if (!pts[i][c].is_number()) throw InputError("measure json: non-numeric coordinate");
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = pts[i][c].get<double>();
    }
  }
  std::vector<double> w;
  for (const auto& x : j["weights"]) {
    if (!x.is_number()) throw InputError("measure json: non-numeric weight");
    w.push_back(x.get<double>());
  }
  return DiscreteMeasure(std::move(p), std::move(w));
}

std::string measure_to_json_text(const DiscreteMeasure& m) {
  std::ostringstream os;
  os << "{\"dim\": " << m.dim() << ", \"points\": [";
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << (i ? ", [" : "[");
    for (std::size_t c = 0; c < m.dim(); ++c) {
      os << (c ? ", " : "") << repr17(m.points()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    }
    os << "]";
  }
  os << "], \"weights\": [";
  for (std::size_t i = 0; i < m.size(); ++i) os << (i ? ", " : "") << repr17(m.weight(i));
  os << "]}\n";
  return os.str();
}

DiscreteMeasure measure_from_csv_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(is, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_csv(trim(line));
  }
  if (header.empty()) throw InputError("measure csv: missing header row");
  if (header.back() != "weight") throw InputError("measure csv: last header column must be 'weight'");
  const std::size_t d = header.size() - 1;
  std::vector<std::vector<double>> rows;
  std::vector<double> w;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw InputError("measure csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " columns");
    }
    std::vector<double> r(d);
    for (std::size_t c = 0; c < d; ++c) r[c] = parse_double(cells[c], line_no);
    rows.push_back(std::move(r));
    w.push_back(parse_double(cells[d], line_no));
  }
  Matrix p(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  }
  return DiscreteMeasure(std::move(p), std::move(w));
}

std::string measure_to_csv_text(const DiscreteMeasure& m) {
  std::ostringstream os;
  for (std::size_t c = 0; c < m.dim(); ++c) os << "x" << c << ",";
  os << "weight\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t c = 0; c < m.dim(); ++c) {
      os << repr17(m.points()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c))) << ",";
    }
    os << repr17(m.weight(i)) << "\n";
  }
  return os.str();
}

DiscreteMeasure read_measure(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open measure file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() == ".csv") return measure_from_csv_text(buf.str());
  return measure_from_json_text(buf.str());
}

void write_measure(const DiscreteMeasure& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write measure file: " + path.string());
  out << (path.extension() == ".csv" ? measure_to_csv_text(m) : measure_to_json_text(m));
}

}  // namespace rgw
