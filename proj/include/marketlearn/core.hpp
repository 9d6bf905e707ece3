#pragma once

// Shared value types for markets and learners: points on the probability
// simplex, share quantities, loss streams and the numeric tolerances every
// check in the library is measured against.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace marketlearn {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidPenalty : public Error {
 public:
  using Error::Error;
};

class InvalidOutcome : public Error {
 public:
  using Error::Error;
};

class InadmissibleReport : public Error {
 public:
  using Error::Error;
};

class InvalidTrace : public Error {
 public:
  using Error::Error;
};

/// Thrown when the iterative penalty solver runs out of iterations. Carries
/// the last iterate so callers can inspect how far it got.
class SolverDiverged : public Error {
 public:
  SolverDiverged(const std::string& what, std::vector<double> last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

// ---------------------------------------------------------------------------
// Tolerances
// ---------------------------------------------------------------------------

struct Tolerances {
  double simplex_eps = 1e-9;
  double solver_eps = 1e-8;
  double finitediff_h = 1e-5;
  double equality_eps = 1e-6;
};

inline constexpr Tolerances kTol{};

static_assert(kTol.simplex_eps > 0 && kTol.solver_eps > 0 && kTol.finitediff_h > 0 &&
              kTol.equality_eps > 0);

// Entries in [-kClampSlack, 0) are rounding noise and snap to zero.
inline constexpr double kClampSlack = 1e-12;

// ---------------------------------------------------------------------------
// ProbVector
// ---------------------------------------------------------------------------

/// A point on the probability simplex. Immutable once constructed.
class ProbVector {
 public:
  explicit ProbVector(std::vector<double> entries) : p_(std::move(entries)) {
    if (p_.empty()) throw InvalidInput("ProbVector: empty");
    double sum = 0.0;
    for (double& x : p_) {
      if (!std::isfinite(x)) throw InvalidInput("ProbVector: non-finite entry");
      if (x < 0.0) {
        if (x < -kClampSlack)
          throw InvalidInput("ProbVector: negative entry " + std::to_string(x));
        x = 0.0;
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > kTol.simplex_eps)
      throw InvalidInput("ProbVector: entries sum to " + std::to_string(sum));
    for (double& x : p_) x /= sum;
  }

  ProbVector(std::initializer_list<double> entries)
      : ProbVector(std::vector<double>(entries)) {}

  static ProbVector uniform(std::size_t n) {
    if (n == 0) throw InvalidInput("ProbVector: empty");
    return ProbVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static ProbVector vertex(std::size_t n, std::size_t i) {
    if (i >= n) throw InvalidInput("ProbVector: vertex index out of range");
    std::vector<double> v(n, 0.0);
    v[i] = 1.0;
    return ProbVector(std::move(v));
  }

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> span() const noexcept { return p_; }
  const std::vector<double>& values() const noexcept { return p_; }
  auto begin() const noexcept { return p_.begin(); }
  auto end() const noexcept { return p_.end(); }

  /// True when every entry is at least `floor`.
  bool interior(double floor = 0.0) const {
    return std::all_of(p_.begin(), p_.end(), [floor](double x) { return x > floor; });
  }

 private:
  std::vector<double> p_;
};

// ---------------------------------------------------------------------------
// QuantityVector
// ---------------------------------------------------------------------------

/// Outstanding shares per outcome. Any finite real, including negative.
class QuantityVector {
 public:
  QuantityVector() = default;

  explicit QuantityVector(std::vector<double> entries) : q_(std::move(entries)) {
    for (double x : q_)
      if (!std::isfinite(x)) throw InvalidInput("QuantityVector: non-finite entry");
  }

  QuantityVector(std::initializer_list<double> entries)
      : QuantityVector(std::vector<double>(entries)) {}

  static QuantityVector zeros(std::size_t n) { return QuantityVector(std::vector<double>(n, 0.0)); }

  std::size_t size() const noexcept { return q_.size(); }
  double operator[](std::size_t i) const { return q_[i]; }
  std::span<const double> span() const noexcept { return q_; }
  const std::vector<double>& values() const noexcept { return q_; }

  QuantityVector operator+(const QuantityVector& o) const {
    check_same(o);
    std::vector<double> out(q_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += o.q_[i];
    return QuantityVector(std::move(out));
  }

  QuantityVector operator-(const QuantityVector& o) const { return *this + o * -1.0; }

  QuantityVector operator*(double k) const {
    std::vector<double> out(q_);
    for (double& x : out) x *= k;
    return QuantityVector(std::move(out));
  }

  /// q + k·1
  QuantityVector shifted(double k) const {
    std::vector<double> out(q_);
    for (double& x : out) x += k;
    return QuantityVector(std::move(out));
  }

  /// q + k·e_i
  QuantityVector bumped(std::size_t i, double k) const {
    std::vector<double> out(q_);
    out.at(i) += k;
    return QuantityVector(std::move(out));
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : q_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  void check_same(const QuantityVector& o) const {
    if (o.size() != size()) throw InvalidInput("QuantityVector: dimension mismatch");
  }

  std::vector<double> q_;
};

// ---------------------------------------------------------------------------
// LossMatrix
// ---------------------------------------------------------------------------

/// T rounds by N experts, row-major, every entry in [0, 1].
class LossMatrix {
 public:
  LossMatrix() = default;

  LossMatrix(std::size_t rounds, std::size_t experts, std::vector<double> data)
      : rounds_(rounds), experts_(experts), data_(std::move(data)) {
    if (data_.size() != rounds_ * experts_) throw InvalidInput("LossMatrix: size mismatch");
    for (double x : data_)
      if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("LossMatrix: entry outside [0,1]");
  }

  explicit LossMatrix(const std::vector<std::vector<double>>& rows)
      : LossMatrix(rows.size(), rows.empty() ? 0 : rows.front().size(), flatten(rows)) {}

  std::size_t rounds() const noexcept { return rounds_; }
  std::size_t experts() const noexcept { return experts_; }
  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(data_).subspan(t * experts_, experts_);
  }
  double operator()(std::size_t t, std::size_t i) const { return data_[t * experts_ + i]; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const LossMatrix&) const = default;

 private:
  static std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    for (const auto& r : rows) {
      if (r.size() != rows.front().size()) throw InvalidInput("LossMatrix: ragged rows");
      out.insert(out.end(), r.begin(), r.end());
    }
    return out;
  }

  std::size_t rounds_ = 0;
  std::size_t experts_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Simplex arithmetic
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Euclidean projection onto the simplex by the sorted-threshold method.
/// Ties in the sort keep original index order.
inline ProbVector project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("project_to_simplex: empty input");
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidInput("project_to_simplex: non-finite input");

  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });

  double running = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    running += v[order[k]];
    const double t = (running - 1.0) / static_cast<double>(k + 1);
    if (v[order[k]] - t > 0.0) theta = t;
  }

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(v[i] - theta, 0.0);
  // Summation error from the threshold is O(n·ulp); renormalization in the
  // constructor absorbs it.
  return ProbVector(std::move(out));
}

/// Shannon entropy in nats, with 0·log 0 = 0.
inline double entropy(const ProbVector& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

/// Shortest decimal text that round-trips to the same double. Used for every
/// CSV field so identical runs give byte-identical files.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace marketlearn
