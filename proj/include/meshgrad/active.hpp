#pragma once

#include <Eigen/Core>

#include <array>
#include <cassert>
#include <cmath>
#include <concepts>
#include <span>
#include <type_traits>

namespace meshgrad {

namespace detail {
struct NoHessian {};
}  // namespace detail

/// Forward-mode scalar carrying a value, its gradient with respect to K local
/// variables and, when `WithHessian` is set, the K x K Hessian.
///
/// Every update to `hess` is written in a form whose (i, j) and (j, i)
/// entries are computed by identical floating point operations, so the
/// Hessian stays bitwise symmetric. Out-of-domain inputs (log of a negative
/// number, division by zero) produce non-finite values instead of throwing.
template <int K, bool WithHessian = true>
class ActiveScalar {
 public:
  static_assert(K >= 1);
  static constexpr int size = K;
  static constexpr bool with_hessian = WithHessian;
  using Gradient = Eigen::Matrix<double, K, 1>;
  using Hessian = Eigen::Matrix<double, K, K>;

  double val = 0.0;
  Gradient grad = Gradient::Zero();
  [[no_unique_address]] std::conditional_t<WithHessian, Hessian, detail::NoHessian> hess{};

  ActiveScalar() { clear_hessian(); }
  // Passive constants convert implicitly so they mix freely with actives.
  ActiveScalar(double value) : val(value) { clear_hessian(); }  // NOLINT

  static ActiveScalar variable(double value, int index) {
    assert(index >= 0 && index < K);
    ActiveScalar a(value);
    a.grad[index] = 1.0;
    return a;
  }

  ActiveScalar& operator+=(const ActiveScalar& b) { return *this = *this + b; }
  ActiveScalar& operator-=(const ActiveScalar& b) { return *this = *this - b; }
  ActiveScalar& operator*=(const ActiveScalar& b) { return *this = *this * b; }
  ActiveScalar& operator/=(const ActiveScalar& b) { return *this = *this / b; }

  friend ActiveScalar operator-(const ActiveScalar& a) {
    ActiveScalar r;
    r.val = -a.val;
    r.grad = -a.grad;
    if constexpr (WithHessian) r.hess = -a.hess;
    return r;
  }

  friend ActiveScalar operator+(const ActiveScalar& a, const ActiveScalar& b) {
    ActiveScalar r;
    r.val = a.val + b.val;
    r.grad = a.grad + b.grad;
    if constexpr (WithHessian) r.hess = a.hess + b.hess;
    return r;
  }
  friend ActiveScalar operator+(ActiveScalar a, double b) {
    a.val += b;
    return a;
  }
  friend ActiveScalar operator+(double a, ActiveScalar b) {
    b.val += a;
    return b;
  }

  friend ActiveScalar operator-(const ActiveScalar& a, const ActiveScalar& b) {
    ActiveScalar r;
    r.val = a.val - b.val;
    r.grad = a.grad - b.grad;
    if constexpr (WithHessian) r.hess = a.hess - b.hess;
    return r;
  }
  friend ActiveScalar operator-(ActiveScalar a, double b) {
    a.val -= b;
    return a;
  }
  friend ActiveScalar operator-(double a, const ActiveScalar& b) { return (-b) + a; }

  friend ActiveScalar operator*(const ActiveScalar& a, const ActiveScalar& b) {
    ActiveScalar r;
    r.val = a.val * b.val;
    r.grad = b.val * a.grad + a.val * b.grad;
    if constexpr (WithHessian) {
      const Hessian outer = a.grad * b.grad.transpose();
      r.hess = b.val * a.hess + a.val * b.hess + (outer + outer.transpose());
    }
    return r;
  }
  friend ActiveScalar operator*(ActiveScalar a, double b) {
    a.val *= b;
    a.grad *= b;
    if constexpr (WithHessian) a.hess *= b;
    return a;
  }
  friend ActiveScalar operator*(double a, const ActiveScalar& b) { return b * a; }

  friend ActiveScalar operator/(const ActiveScalar& a, const ActiveScalar& b) {
    // f = a / b  =>  f' = (a' - f b') / b,  f'' = (a'' - f b'' - (f' b'^T + b' f'^T)) / b
    const double inv = 1.0 / b.val;
    ActiveScalar r;
    r.val = a.val / b.val;
    r.grad = (a.grad - r.val * b.grad) * inv;
    if constexpr (WithHessian) {
      const Hessian outer = r.grad * b.grad.transpose();
      r.hess = (a.hess - r.val * b.hess - (outer + outer.transpose())) * inv;
    }
    return r;
  }
  friend ActiveScalar operator/(ActiveScalar a, double b) {
    a.val /= b;
    a.grad /= b;
    if constexpr (WithHessian) a.hess /= b;
    return a;
  }
  friend ActiveScalar operator/(double a, const ActiveScalar& b) { return ActiveScalar(a) / b; }

  friend bool operator<(const ActiveScalar& a, const ActiveScalar& b) { return a.val < b.val; }
  friend bool operator>(const ActiveScalar& a, const ActiveScalar& b) { return a.val > b.val; }
  friend bool operator<=(const ActiveScalar& a, const ActiveScalar& b) { return a.val <= b.val; }
  friend bool operator>=(const ActiveScalar& a, const ActiveScalar& b) { return a.val >= b.val; }

 private:
  void clear_hessian() {
    if constexpr (WithHessian) hess.setZero();
  }
};

template <class T>
struct is_active : std::false_type {};
template <int K, bool H>
struct is_active<ActiveScalar<K, H>> : std::true_type {};
template <class T>
inline constexpr bool is_active_v = is_active<std::remove_cvref_t<T>>::value;

inline double value_of(double x) { return x; }
template <int K, bool H>
double value_of(const ActiveScalar<K, H>& x) {
  return x.val;
}

/// Seeds K independent variables: element i has gradient e_i and zero Hessian.
template <int K, bool WithHessian = true>
std::array<ActiveScalar<K, WithHessian>, K> lift(std::span<const double, K> values) {
  std::array<ActiveScalar<K, WithHessian>, K> out;
  for (int i = 0; i < K; ++i) out[i] = ActiveScalar<K, WithHessian>::variable(values[i], i);
  return out;
}

/// Applies a scalar function with known first and second derivatives.
template <int K, bool H>
ActiveScalar<K, H> chain(const ActiveScalar<K, H>& a, double f, double df, double ddf) {
  ActiveScalar<K, H> r;
  r.val = f;
  r.grad = df * a.grad;
  if constexpr (H) {
    // materialized first: Eigen would otherwise fold ddf into one factor
    const typename ActiveScalar<K, H>::Hessian outer = a.grad * a.grad.transpose();
    r.hess = df * a.hess + ddf * outer;
  }
  return r;
}

// Elementary functions. The double overloads let energy code call these
// unqualified from inside this namespace for passive evaluation too.
// Passive overloads are templates so that a plain ::sqrt(double) picked up
// by `using namespace meshgrad` wins overload resolution instead of clashing.
template <std::floating_point T>
T sqrt(T x) { return std::sqrt(x); }
template <std::floating_point T>
T log(T x) { return std::log(x); }
template <std::floating_point T>
T exp(T x) { return std::exp(x); }
template <std::floating_point T>
T sin(T x) { return std::sin(x); }
template <std::floating_point T>
T cos(T x) { return std::cos(x); }
template <std::floating_point T>
T abs(T x) { return std::abs(x); }
template <std::floating_point T>
T sqr(T x) { return x * x; }
template <std::floating_point T>
T pow(T x, int n) { return std::pow(x, n); }

template <int K, bool H>
ActiveScalar<K, H> sqrt(const ActiveScalar<K, H>& a) {
  const double f = std::sqrt(a.val);
  const double df = 0.5 / f;
  return chain(a, f, df, -0.5 * df / a.val);
}

template <int K, bool H>
ActiveScalar<K, H> log(const ActiveScalar<K, H>& a) {
  const double inv = 1.0 / a.val;
  return chain(a, std::log(a.val), inv, -inv * inv);
}

template <int K, bool H>
ActiveScalar<K, H> exp(const ActiveScalar<K, H>& a) {
  const double f = std::exp(a.val);
  return chain(a, f, f, f);
}

template <int K, bool H>
ActiveScalar<K, H> sin(const ActiveScalar<K, H>& a) {
  const double s = std::sin(a.val);
  return chain(a, s, std::cos(a.val), -s);
}

template <int K, bool H>
ActiveScalar<K, H> cos(const ActiveScalar<K, H>& a) {
  const double c = std::cos(a.val);
  return chain(a, c, -std::sin(a.val), -c);
}

// Derivative at 0 is taken as 0.
template <int K, bool H>
ActiveScalar<K, H> abs(const ActiveScalar<K, H>& a) {
  const double sign = a.val > 0 ? 1.0 : (a.val < 0 ? -1.0 : 0.0);
  return chain(a, std::abs(a.val), sign, 0.0);
}

template <int K, bool H>
ActiveScalar<K, H> sqr(const ActiveScalar<K, H>& a) {
  return chain(a, a.val * a.val, 2.0 * a.val, 2.0);
}

template <int K, bool H>
ActiveScalar<K, H> pow(const ActiveScalar<K, H>& a, int n) {
  if (n == 0) return ActiveScalar<K, H>(1.0);
  const double df = n * std::pow(a.val, n - 1);
  const double ddf = n == 1 ? 0.0 : static_cast<double>(n) * (n - 1) * std::pow(a.val, n - 2);
  return chain(a, std::pow(a.val, n), df, ddf);
}

template <int K, bool H>
bool isfinite(const ActiveScalar<K, H>& a) {
  return std::isfinite(a.val);
}
template <std::floating_point T>
bool isfinite(T x) { return std::isfinite(x); }

}  // namespace meshgrad
