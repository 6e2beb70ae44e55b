#pragma once

// Shared value types for preferential Bayesian optimization: the space of
// alternatives, q-wise queries, choice responses, the preference dataset,
// and hierarchically seeded randomness.

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <initializer_list>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pbo {

using Point = Eigen::VectorXd;
using json = nlohmann::json;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Raised by validate_query. point_index / coordinate are -1 when the
/// failure is not tied to a specific point (e.g. q < 2).
class QueryError : public Error {
 public:
  QueryError(const std::string& what, int point_index, int coordinate)
      : Error(what), point_index_(point_index), coordinate_(coordinate) {}

  int point_index() const noexcept { return point_index_; }
  int coordinate() const noexcept { return coordinate_; }

 private:
  int point_index_;
  int coordinate_;
};

// ---------------------------------------------------------------------------
// Randomness

/// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a hash of a stream name, for readable seed paths.
std::uint64_t stream_tag(std::string_view name) noexcept;

/// Derives a child seed from a root seed and a path of tags. Identical
/// (root, path) pairs always produce the same seed.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  /// Standard Gumbel draw.
  double gumbel();
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t next() { return engine_(); }
  Rng split(std::uint64_t tag) { return Rng(derive_seed(next(), {tag})); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Domain

class Domain {
 public:
  enum class Kind { ContinuousBox, FiniteSet };

  /// Continuous box; requires lower[i] < upper[i] and d >= 1.
  static Domain box(Point lower, Point upper);
  /// Explicit finite set of at least two distinct alternatives.
  static Domain finite(std::vector<Point> alternatives);

  Kind kind() const noexcept { return kind_; }
  bool is_box() const noexcept { return kind_ == Kind::ContinuousBox; }
  int dim() const noexcept { return static_cast<int>(lower_.size()); }

  /// Bounding box (for finite sets, of the alternatives).
  const Point& lower() const noexcept { return lower_; }
  const Point& upper() const noexcept { return upper_; }
  /// Per-dimension scale used for normalization; 1 where a finite set is flat.
  const Point& width() const noexcept { return width_; }
  const std::vector<Point>& alternatives() const noexcept { return alternatives_; }

  bool contains(const Point& x) const;
  Point to_unit(const Point& x) const;
  Point from_unit(const Point& u) const;
  Point clamp(const Point& x) const;
  /// Uniform draw from the box, or a uniformly chosen alternative.
  Point sample(Rng& rng) const;

 private:
  Kind kind_ = Kind::ContinuousBox;
  Point lower_, upper_, width_;
  std::vector<Point> alternatives_;
};

// ---------------------------------------------------------------------------
// Queries and responses

struct Query {
  std::vector<Point> points;

  int size() const noexcept { return static_cast<int>(points.size()); }
  bool operator==(const Query& other) const;
};

/// 0-based index of the chosen alternative.
struct Response {
  int choice = 0;
};

/// Throws QueryError when q < 2 or any point lies outside the domain.
void validate_query(const Domain& domain, const Query& query);

// ---------------------------------------------------------------------------
// Preference dataset

struct Observation {
  Query query;
  Response response;
  /// Index of each query point in PreferenceDataset::distinct_points().
  std::vector<int> point_index;
};

/// Ordered list of (query, response) pairs with an exact-equality dedup
/// index over all points seen. Value type: appending returns a new dataset.
class PreferenceDataset {
 public:
  PreferenceDataset() = default;
  explicit PreferenceDataset(int q) : q_(q) {}

  /// 0 until the first observation fixes it (unless given at construction).
  int q() const noexcept { return q_; }
  bool empty() const noexcept { return observations_.empty(); }
  std::size_t size() const noexcept { return observations_.size(); }
  int dim() const noexcept { return points_.empty() ? 0 : static_cast<int>(points_.front().size()); }

  const std::vector<Observation>& observations() const noexcept { return observations_; }
  const std::vector<Point>& distinct_points() const noexcept { return points_; }

  /// Returns a copy with the observation appended. Throws InvalidArgument on
  /// an out-of-range choice, a q mismatch, or a dimension mismatch.
  PreferenceDataset appended(const Query& query, Response response) const;

  /// First n observations.
  PreferenceDataset prefix(std::size_t n) const;

  bool operator==(const PreferenceDataset& other) const;

 private:
  int q_ = 0;
  std::vector<Observation> observations_;
  std::vector<Point> points_;
  std::map<std::vector<double>, int> index_;
};

PreferenceDataset append_observation(const PreferenceDataset& ds, const Query& query, Response response);

// ---------------------------------------------------------------------------
// JSON

json point_to_json(const Point& x);
Point point_from_json(const json& j);
json query_to_json(const Query& query);
Query query_from_json(const json& j);
json domain_to_json(const Domain& domain);
Domain domain_from_json(const json& j);
json dataset_to_json(const PreferenceDataset& ds);
PreferenceDataset dataset_from_json(const json& j);

}  // namespace pbo
