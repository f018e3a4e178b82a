#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace harmonize {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major N-d array of doubles. Shapes are small (images, kernels),
// so extents are plain ints.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    for (int e : shape) {
      if (e <= 0) throw ShapeError("Tensor: non-positive extent");
    }
    data.assign(static_cast<size_t>(count(shape)), fill);
  }

  static Tensor from(std::vector<int> s, std::vector<double> d) {
    Tensor t;
    t.shape = std::move(s);
    t.data = std::move(d);
    if (count(t.shape) != static_cast<long long>(t.data.size()))
      throw ShapeError("Tensor::from: shape/data size mismatch");
    return t;
  }

  static long long count(const std::vector<int>& s) {
    long long n = 1;
    for (int e : s) n *= e;
    return n;
  }

  int size() const { return static_cast<int>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  double& operator[](int i) { return data[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data[static_cast<size_t>(i)]; }

  // [H,W]
  double& at2(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
  double at2(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }

  // [C,H,W]
  double& at3(int ch, int r, int c) {
    return data[(static_cast<size_t>(ch) * shape[1] + r) * shape[2] + c];
  }
  double at3(int ch, int r, int c) const {
    return data[(static_cast<size_t>(ch) * shape[1] + r) * shape[2] + c];
  }

  // [O,I,Kh,Kw]
  double& at4(int o, int i, int r, int c) {
    return data[((static_cast<size_t>(o) * shape[1] + i) * shape[2] + r) * shape[3] + c];
  }
  double at4(int o, int i, int r, int c) const {
    return data[((static_cast<size_t>(o) * shape[1] + i) * shape[2] + r) * shape[3] + c];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double min() const { return *std::min_element(data.begin(), data.end()); }
  double max() const { return *std::max_element(data.begin(), data.end()); }

  double mean() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s / static_cast<double>(data.size());
  }

  Tensor& fill(double v) {
    std::fill(data.begin(), data.end(), v);
    return *this;
  }

  Tensor& fill_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    for (double& v : data) v = d(rng);
    return *this;
  }

  Tensor& fill_normal(std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> d(0.0, stddev);
    for (double& v : data) v = d(rng);
    return *this;
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b)) throw ShapeError(std::string(who) + ": shape mismatch");
}

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "operator+");
  Tensor r = a;
  for (int i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "operator-");
  Tensor r = a;
  for (int i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

inline Tensor operator*(const Tensor& a, double s) {
  Tensor r = a;
  for (double& v : r.data) v *= s;
  return r;
}

// Deterministic stream seeding: all randomness in the project derives from a
// user seed plus fixed stream tags, so runs are reproducible and resumable.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace harmonize
