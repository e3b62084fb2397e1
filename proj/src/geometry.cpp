#include "rlf/geometry.hpp"

#include <algorithm>

#include "rlf/errors.hpp"

namespace rlf {

Lattice::Lattice(int dim, Vec origin, double spacing, std::array<int, kMaxDim> counts)
    : dim_(dim), origin_(origin), spacing_(spacing), counts_(counts) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("lattice dimension must be in 1..3");
  if (!(spacing > 0.0)) throw ConfigError("lattice spacing must be positive");
  size_ = 1;
  for (int d = 0; d < kMaxDim; ++d) {
    if (d >= dim) counts_[d] = 1;
    if (counts_[d] < 1) throw ConfigError("lattice counts must be positive");
    size_ *= static_cast<std::size_t>(counts_[d]);
  }
}

Lattice Lattice::covering(const Box& box, double spacing, const Vec& anchor) {
  Vec origin{};
  std::array<int, kMaxDim> counts{1, 1, 1};
  for (int d = 0; d < box.dim; ++d) {
    const double kmin = std::floor((box.lo[d] - anchor[d]) / spacing + 1e-9);
    const double kmax = std::ceil((box.hi[d] - anchor[d]) / spacing - 1e-9);
    origin[d] = anchor[d] + kmin * spacing;
    counts[d] = static_cast<int>(kmax - kmin) + 1;
  }
  return Lattice(box.dim, origin, spacing, counts);
}

Vec Lattice::point(std::size_t flat) const {
  const auto m = multi(flat);
  Vec p{};
  for (int d = 0; d < dim_; ++d) p[d] = origin_[d] + spacing_ * m[d];
  return p;
}

std::array<int, kMaxDim> Lattice::multi(std::size_t flat) const {
  std::array<int, kMaxDim> m{0, 0, 0};
  for (int d = dim_ - 1; d >= 0; --d) {
    const auto n = static_cast<std::size_t>(counts_[d]);
    m[d] = static_cast<int>(flat % n);
    flat /= n;
  }
  return m;
}

std::size_t Lattice::flat(const std::array<int, kMaxDim>& m) const {
  std::size_t f = 0;
  for (int d = 0; d < dim_; ++d) f = f * static_cast<std::size_t>(counts_[d]) + static_cast<std::size_t>(m[d]);
  return f;
}

bool Lattice::in_range(const std::array<int, kMaxDim>& m) const {
  for (int d = 0; d < dim_; ++d)
    if (m[d] < 0 || m[d] >= counts_[d]) return false;
  return true;
}

std::array<int, kMaxDim> Lattice::nearest(const Vec& x) const {
  std::array<int, kMaxDim> m{0, 0, 0};
  for (int d = 0; d < dim_; ++d) {
    const long k = std::lround((x[d] - origin_[d]) / spacing_);
    m[d] = static_cast<int>(std::clamp<long>(k, 0, counts_[d] - 1));
  }
  return m;
}

Box Lattice::bounds() const {
  Box b{dim_, origin_, origin_};
  for (int d = 0; d < dim_; ++d) b.hi[d] = origin_[d] + spacing_ * (counts_[d] - 1);
  return b;
}

double Lattice::interpolate(const std::vector<double>& values, const Vec& x) const {
  std::array<int, kMaxDim> base{0, 0, 0};
  std::array<double, kMaxDim> frac{0, 0, 0};
  for (int d = 0; d < dim_; ++d) {
    double s = (x[d] - origin_[d]) / spacing_;
    const double top = counts_[d] - 1;
    if (s < -0.5 || s > top + 0.5) return 0.0;
    s = std::clamp(s, 0.0, top);
    int k = static_cast<int>(std::floor(s));
    if (k >= counts_[d] - 1) k = std::max(counts_[d] - 2, 0);
    base[d] = k;
    frac[d] = counts_[d] == 1 ? 0.0 : s - k;
  }
  double acc = 0.0;
  const int corners = 1 << dim_;
  for (int mask = 0; mask < corners; ++mask) {
    double w = 1.0;
    std::array<int, kMaxDim> m = base;
    for (int d = 0; d < dim_; ++d) {
      if (mask & (1 << d)) {
        w *= frac[d];
        m[d] += 1;
      } else {
        w *= 1.0 - frac[d];
      }
    }
    if (w == 0.0) continue;
    acc += w * values[flat(m)];
  }
  return acc;
}

}  // namespace rlf
