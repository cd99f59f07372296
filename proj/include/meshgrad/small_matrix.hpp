#pragma once

#include "meshgrad/active.hpp"

#include <array>
#include <utility>

namespace meshgrad {

/// Fixed-length vector over plain or active scalars. Mixed expressions
/// (active with passive) promote to the active type.
template <class S, int D>
struct SmallVec {
  std::array<S, D> c{};

  S& operator[](int i) { return c[i]; }
  const S& operator[](int i) const { return c[i]; }

  template <class T>
  static SmallVec from(const Eigen::Matrix<T, D, 1>& v) {
    SmallVec out;
    for (int i = 0; i < D; ++i) out[i] = S(v[i]);
    return out;
  }
};

template <class S>
using SmallVec2 = SmallVec<S, 2>;
template <class S>
using SmallVec3 = SmallVec<S, 3>;

template <class A, class B>
using promote_t = decltype(std::declval<A>() * std::declval<B>());

template <class A, class B, int D>
SmallVec<promote_t<A, B>, D> operator+(const SmallVec<A, D>& a, const SmallVec<B, D>& b) {
  SmallVec<promote_t<A, B>, D> r;
  for (int i = 0; i < D; ++i) r[i] = a[i] + b[i];
  return r;
}

template <class A, class B, int D>
SmallVec<promote_t<A, B>, D> operator-(const SmallVec<A, D>& a, const SmallVec<B, D>& b) {
  SmallVec<promote_t<A, B>, D> r;
  for (int i = 0; i < D; ++i) r[i] = a[i] - b[i];
  return r;
}

template <class A, int D>
SmallVec<A, D> operator-(const SmallVec<A, D>& a) {
  SmallVec<A, D> r;
  for (int i = 0; i < D; ++i) r[i] = -a[i];
  return r;
}

template <class A, class B, int D>
SmallVec<promote_t<A, B>, D> operator*(const A& s, const SmallVec<B, D>& v) {
  SmallVec<promote_t<A, B>, D> r;
  for (int i = 0; i < D; ++i) r[i] = s * v[i];
  return r;
}

template <class A, class B, int D>
SmallVec<promote_t<A, B>, D> operator/(const SmallVec<A, D>& v, const B& s) {
  SmallVec<promote_t<A, B>, D> r;
  for (int i = 0; i < D; ++i) r[i] = v[i] / s;
  return r;
}

template <class A, class B, int D>
promote_t<A, B> dot(const SmallVec<A, D>& a, const SmallVec<B, D>& b) {
  promote_t<A, B> r = a[0] * b[0];
  for (int i = 1; i < D; ++i) r = r + a[i] * b[i];
  return r;
}

template <class A, int D>
A squared_norm(const SmallVec<A, D>& a) {
  return dot(a, a);
}

template <class A, int D>
A norm(const SmallVec<A, D>& a) {
  return sqrt(squared_norm(a));
}

template <class A, int D>
SmallVec<A, D> normalized(const SmallVec<A, D>& a) {
  return a / norm(a);
}

template <class A, class B>
SmallVec<promote_t<A, B>, 3> cross(const SmallVec<A, 3>& a, const SmallVec<B, 3>& b) {
  return {{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]}};
}

/// Dense R x C matrix, row-major.
template <class S, int R, int C>
struct SmallMat {
  std::array<S, R * C> e{};

  S& operator()(int i, int j) { return e[i * C + j]; }
  const S& operator()(int i, int j) const { return e[i * C + j]; }

  static SmallMat identity() {
    static_assert(R == C);
    SmallMat m;
    for (int i = 0; i < R; ++i) m(i, i) = S(1.0);
    return m;
  }

  template <class T>
  static SmallMat from_columns(const std::array<SmallVec<T, R>, C>& cols) {
    SmallMat m;
    for (int j = 0; j < C; ++j) {
      for (int i = 0; i < R; ++i) m(i, j) = cols[j][i];
    }
    return m;
  }

  template <class T>
  static SmallMat from(const Eigen::Matrix<T, R, C>& src) {
    SmallMat m;
    for (int i = 0; i < R; ++i) {
      for (int j = 0; j < C; ++j) m(i, j) = S(src(i, j));
    }
    return m;
  }
};

template <class A, class B, int R, int N, int C>
SmallMat<promote_t<A, B>, R, C> operator*(const SmallMat<A, R, N>& a, const SmallMat<B, N, C>& b) {
  SmallMat<promote_t<A, B>, R, C> r;
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      promote_t<A, B> acc = a(i, 0) * b(0, j);
      for (int k = 1; k < N; ++k) acc = acc + a(i, k) * b(k, j);
      r(i, j) = acc;
    }
  }
  return r;
}

template <class S>
S determinant(const SmallMat<S, 2, 2>& m) {
  return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

template <class S>
S determinant(const SmallMat<S, 3, 3>& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

template <class S, int R, int C>
S frobenius_squared(const SmallMat<S, R, C>& m) {
  S acc = m.e[0] * m.e[0];
  for (int i = 1; i < R * C; ++i) acc = acc + m.e[i] * m.e[i];
  return acc;
}

template <class S>
struct InverseDet {
  SmallMat<S, 2, 2> inverse;
  S det;
};

/// Adjugate inverse of a 2 x 2 matrix together with its determinant. A zero
/// determinant propagates as non-finite entries.
template <class S>
InverseDet<S> small_inverse_det(const SmallMat<S, 2, 2>& m) {
  InverseDet<S> out{{}, determinant(m)};
  const S inv_det = 1.0 / out.det;
  out.inverse(0, 0) = m(1, 1) * inv_det;
  out.inverse(0, 1) = -m(0, 1) * inv_det;
  out.inverse(1, 0) = -m(1, 0) * inv_det;
  out.inverse(1, 1) = m(0, 0) * inv_det;
  return out;
}

}  // namespace meshgrad
