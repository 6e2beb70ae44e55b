#include "pbo/core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pbo {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_tag(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = mix64(root);
  for (std::uint64_t tag : path) s = mix64(s ^ mix64(tag + 0x632be59bd9b4e019ULL));
  return s;
}

double Rng::gumbel() {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return -std::log(-std::log(u));
}

// ---------------------------------------------------------------------------

Domain Domain::box(Point lower, Point upper) {
  if (lower.size() < 1) throw InvalidArgument("domain: dimension must be >= 1");
  if (lower.size() != upper.size()) throw InvalidArgument("domain: bound dimension mismatch");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      std::ostringstream os;
      os << "domain: lower[" << i << "] must be < upper[" << i << "]";
      throw InvalidArgument(os.str());
    }
  }
  Domain d;
  d.kind_ = Kind::ContinuousBox;
  d.width_ = upper - lower;
  d.lower_ = std::move(lower);
  d.upper_ = std::move(upper);
  return d;
}

Domain Domain::finite(std::vector<Point> alternatives) {
  if (alternatives.size() < 2) throw InvalidArgument("domain: finite set needs at least 2 alternatives");
  const auto dim = alternatives.front().size();
  if (dim < 1) throw InvalidArgument("domain: dimension must be >= 1");
  for (const auto& a : alternatives)
    if (a.size() != dim) throw InvalidArgument("domain: alternatives differ in dimension");
  bool distinct = false;
  for (std::size_t i = 1; i < alternatives.size() && !distinct; ++i)
    distinct = alternatives[i] != alternatives.front();
  if (!distinct) throw InvalidArgument("domain: finite set needs at least 2 distinct alternatives");

  Domain d;
  d.kind_ = Kind::FiniteSet;
  d.lower_ = alternatives.front();
  d.upper_ = alternatives.front();
  for (const auto& a : alternatives) {
    d.lower_ = d.lower_.cwiseMin(a);
    d.upper_ = d.upper_.cwiseMax(a);
  }
  d.width_ = d.upper_ - d.lower_;
  for (Eigen::Index i = 0; i < d.width_.size(); ++i)
    if (d.width_[i] <= 0.0) d.width_[i] = 1.0;
  d.alternatives_ = std::move(alternatives);
  return d;
}

bool Domain::contains(const Point& x) const {
  if (x.size() != lower_.size()) return false;
  if (kind_ == Kind::FiniteSet) {
    for (const auto& a : alternatives_)
      if (a == x) return true;
    return false;
  }
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= lower_[i] && x[i] <= upper_[i])) return false;
  return true;
}

Point Domain::to_unit(const Point& x) const { return (x - lower_).cwiseQuotient(width_); }

Point Domain::from_unit(const Point& u) const { return lower_ + u.cwiseProduct(width_); }

Point Domain::clamp(const Point& x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

Point Domain::sample(Rng& rng) const {
  if (kind_ == Kind::FiniteSet) return alternatives_[rng.index(alternatives_.size())];
  Point x(lower_.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(lower_[i], upper_[i]);
  return x;
}

// ---------------------------------------------------------------------------

bool Query::operator==(const Query& other) const {
  if (points.size() != other.points.size()) return false;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i].size() != other.points[i].size() || points[i] != other.points[i]) return false;
  return true;
}

void validate_query(const Domain& domain, const Query& query) {
  if (query.size() < 2) throw QueryError("query: q must be >= 2", -1, -1);
  for (int i = 0; i < query.size(); ++i) {
    const Point& x = query.points[i];
    if (x.size() != domain.dim()) {
      std::ostringstream os;
      os << "query: point " << i << " has dimension " << x.size() << ", expected " << domain.dim();
      throw QueryError(os.str(), i, -1);
    }
    if (!domain.is_box()) {
      if (!domain.contains(x)) {
        std::ostringstream os;
        os << "query: point " << i << " is not an alternative of the finite domain";
        throw QueryError(os.str(), i, -1);
      }
      continue;
    }
    for (int c = 0; c < x.size(); ++c) {
      if (!(x[c] >= domain.lower()[c] && x[c] <= domain.upper()[c])) {
        std::ostringstream os;
        os << "query: point " << i << " coordinate " << c << " = " << x[c] << " outside ["
           << domain.lower()[c] << ", " << domain.upper()[c] << "]";
        throw QueryError(os.str(), i, c);
      }
    }
  }
}

// ---------------------------------------------------------------------------

PreferenceDataset PreferenceDataset::appended(const Query& query, Response response) const {
  if (query.size() < 2) throw InvalidArgument("dataset: query must have q >= 2 points");
  if (response.choice < 0 || response.choice >= query.size()) {
    std::ostringstream os;
    os << "dataset: choice " << response.choice << " out of range for q = " << query.size();
    throw InvalidArgument(os.str());
  }
  if (q_ != 0 && query.size() != q_) {
    std::ostringstream os;
    os << "dataset: query has " << query.size() << " points, dataset q = " << q_;
    throw InvalidArgument(os.str());
  }
  const auto dim = points_.empty() ? query.points.front().size() : points_.front().size();
  for (const auto& x : query.points)
    if (x.size() != dim) throw InvalidArgument("dataset: point dimension mismatch");

  PreferenceDataset out = *this;
  out.q_ = query.size();
  Observation obs{query, response, {}};
  obs.point_index.reserve(query.points.size());
  for (const auto& x : query.points) {
    std::vector<double> key(x.data(), x.data() + x.size());
    auto [it, inserted] = out.index_.try_emplace(std::move(key), static_cast<int>(out.points_.size()));
    if (inserted) out.points_.push_back(x);
    obs.point_index.push_back(it->second);
  }
  out.observations_.push_back(std::move(obs));
  return out;
}

PreferenceDataset PreferenceDataset::prefix(std::size_t n) const {
  PreferenceDataset out(q_);
  for (std::size_t i = 0; i < n && i < observations_.size(); ++i)
    out = out.appended(observations_[i].query, observations_[i].response);
  return out;
}

bool PreferenceDataset::operator==(const PreferenceDataset& other) const {
  if (q_ != other.q_ || observations_.size() != other.observations_.size()) return false;
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    if (!(observations_[i].query == other.observations_[i].query)) return false;
    if (observations_[i].response.choice != other.observations_[i].response.choice) return false;
  }
  return true;
}

PreferenceDataset append_observation(const PreferenceDataset& ds, const Query& query, Response response) {
  return ds.appended(query, response);
}

// ---------------------------------------------------------------------------

json point_to_json(const Point& x) {
  json j = json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) j.push_back(x[i]);
  return j;
}

Point point_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidArgument("json: point must be a non-empty array of numbers");
  Point x(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument("json: point coordinates must be numbers");
    x[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return x;
}

json query_to_json(const Query& query) {
  json j = json::array();
  for (const auto& x : query.points) j.push_back(point_to_json(x));
  return j;
}

Query query_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("json: query must be an array of points");
  Query q;
  for (const auto& p : j) q.points.push_back(point_from_json(p));
  return q;
}

json domain_to_json(const Domain& domain) {
  if (domain.is_box())
    return {{"lower", point_to_json(domain.lower())}, {"upper", point_to_json(domain.upper())}};
  json alts = json::array();
  for (const auto& a : domain.alternatives()) alts.push_back(point_to_json(a));
  return {{"alternatives", alts}};
}

Domain domain_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("json: domain must be an object");
  if (j.contains("alternatives")) {
    std::vector<Point> alts;
    for (const auto& a : j.at("alternatives")) alts.push_back(point_from_json(a));
    return Domain::finite(std::move(alts));
  }
  if (!j.contains("lower") || !j.contains("upper"))
    throw InvalidArgument("json: domain needs lower/upper or alternatives");
  return Domain::box(point_from_json(j.at("lower")), point_from_json(j.at("upper")));
}

json dataset_to_json(const PreferenceDataset& ds) {
  json obs = json::array();
  for (const auto& o : ds.observations())
    obs.push_back({{"points", query_to_json(o.query)}, {"choice", o.response.choice}});
  return {{"q", ds.q()}, {"observations", obs}};
}

PreferenceDataset dataset_from_json(const json& j) {
  if (!j.is_object() || !j.contains("observations")) throw InvalidArgument("json: dataset needs observations");
  PreferenceDataset ds(j.value("q", 0));
  for (const auto& o : j.at("observations"))
    ds = ds.appended(query_from_json(o.at("points")), Response{o.at("choice").get<int>()});
  return ds;
}

}  // namespace pbo
