// Minimal dense row-major matrix/vector helpers used by the toy encoders.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cecl/rng.hpp"

namespace cecl {

using Vec = std::vector<double>;

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec a;  // row-major

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  std::size_t size() const { return a.size(); }
};

inline void fill_uniform(Mat& m, RngStream& rng, double lo, double hi) {
  for (double& x : m.a) x = rng.next_uniform(lo, hi);
}

inline void fill_uniform(Vec& v, RngStream& rng, double lo, double hi) {
  for (double& x : v) x = rng.next_uniform(lo, hi);
}

// y = M x
inline Vec matvec(const Mat& m, const Vec& x) {
  if (x.size() != m.cols) throw std::runtime_error("matvec shape mismatch");
  Vec y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double acc = 0.0;
    const double* row = &m.a[i * m.cols];
    for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// y = M^T x
inline Vec matvec_t(const Mat& m, const Vec& x) {
  if (x.size() != m.rows) throw std::runtime_error("matvec_t shape mismatch");
  Vec y(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = &m.a[i * m.cols];
    for (std::size_t j = 0; j < m.cols; ++j) y[j] += row[j] * x[i];
  }
  return y;
}

// M += scale * u v^T
inline void add_outer(Mat& m, const Vec& u, const Vec& v, double scale = 1.0) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = &m.a[i * m.cols];
    const double ui = scale * u[i];
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += ui * v[j];
  }
}

inline double dot(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void axpy(Vec& y, const Vec& x, double alpha) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace cecl
