#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <type_traits>

namespace martrep {

// The engine runs in one of two scalar modes: plain double for the main path
// and exact rationals for the oracle/test path. Everything numeric in the
// finite engine is templated on the scalar.
using Rational = boost::multiprecision::cpp_rational;

template <class S>
struct scalar_traits;

template <>
struct scalar_traits<double> {
  static constexpr bool exact = false;
  static double tolerance() { return 1e-12; }
  // A bracket mass point counts as present only above this threshold, so that
  // float dust cannot create fake overlaps between singular measures.
  static double mass_tolerance() { return 1e-12; }
};

template <>
struct scalar_traits<Rational> {
  static constexpr bool exact = true;
  static Rational tolerance() { return Rational(0); }
  static Rational mass_tolerance() { return Rational(0); }
};

template <class S>
inline S fraction(long long num, long long den) {
  if constexpr (scalar_traits<S>::exact) {
    return Rational(num, den);
  } else {
    return static_cast<double>(num) / static_cast<double>(den);
  }
}

inline double to_double(double x) { return x; }
inline double to_double(const Rational& x) { return x.convert_to<double>(); }

template <class S>
inline S abs_value(const S& x) {
  return x < S(0) ? S(-x) : x;
}

template <class S>
inline bool nearly_equal(const S& a, const S& b) {
  return abs_value<S>(a - b) <= scalar_traits<S>::tolerance();
}

template <class S>
inline bool nearly_zero(const S& a) {
  return abs_value<S>(a) <= scalar_traits<S>::tolerance();
}

template <class S>
inline bool mass_positive(const S& a) {
  return a > scalar_traits<S>::mass_tolerance();
}

template <class S>
inline std::string scalar_to_string(const S& x) {
  if constexpr (scalar_traits<S>::exact) {
    return x.str();
  } else {
    return std::to_string(x);
  }
}

}  // namespace martrep
