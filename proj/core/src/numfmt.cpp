#include "qsadn/numfmt.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string_view>

namespace qsadn {

std::string format_decimal(double v, int digits) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  if (digits < 1) digits = 1;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits - 1, v);
  // buf looks like "-d.ddde+XX"; pull out sign, mantissa digits and exponent.
  std::string_view s(buf);
  std::string out;
  if (s.front() == '-') {
    out.push_back('-');
    s.remove_prefix(1);
  }
  const auto e = s.find('e');
  std::string mant;
  for (char c : s.substr(0, e)) {
    if (c != '.') mant.push_back(c);
  }
  const int exp = std::atoi(std::string(s.substr(e + 1)).c_str());
  if (v == 0.0) {
    out = digits > 1 ? "0." + std::string(digits - 1, '0') : "0";
    return out;
  }
  if (exp < 0) {
    out += "0." + std::string(static_cast<std::size_t>(-exp - 1), '0') + mant;
  } else if (exp + 1 >= static_cast<int>(mant.size())) {
    out += mant + std::string(static_cast<std::size_t>(exp + 1 - int(mant.size())), '0');
  } else {
    out += mant.substr(0, exp + 1) + "." + mant.substr(exp + 1);
  }
  return out;
}

std::string format_general(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string format_fixed(double v, int decimals) {
  char buf[384];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace qsadn
