#pragma once

#include <gmpxx.h>

#include <cctype>
#include <string>
#include <string_view>

#include "jetprol/errors.hpp"

namespace jetprol {

using Rational = mpq_class;
using Integer = mpz_class;

/// Parses "a", "-a" or "a/b" with decimal integers. Floats are rejected.
inline Rational parse_rational(std::string_view text) {
  auto fail = [&] {
    return InputError("input", "not an exact rational: \"" + std::string(text) + "\"");
  };
  std::size_t pos = 0;
  auto digits = [&](bool allow_sign) {
    std::size_t start = pos;
    if (allow_sign && pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
    std::size_t first_digit = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == first_digit) throw fail();
    return std::string(text.substr(start, pos - start));
  };
  std::string num = digits(true);
  if (!num.empty() && num[0] == '+') num.erase(0, 1);
  std::string den = "1";
  if (pos < text.size() && text[pos] == '/') {
    ++pos;
    den = digits(false);
  }
  if (pos != text.size()) throw fail();
  Integer d(den);
  if (d == 0) throw InputError("input", "zero denominator in \"" + std::string(text) + "\"");
  Rational r(Integer(num), d);
  r.canonicalize();
  return r;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

}  // namespace jetprol
