#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace fsf {

// Dense NCHW tensor of doubles. Minimal by intent: layers index it directly.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

  std::size_t size() const { return v.size(); }

  double& at(int in, int ic, int iy, int ix) {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  double at(int in, int ic, int iy, int ix) const {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  double* plane(int in, int ic) {
    return v.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
  }
  const double* plane(int in, int ic) const {
    return v.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

}  // namespace fsf
