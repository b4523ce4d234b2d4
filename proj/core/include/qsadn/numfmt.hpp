#pragma once

#include <string>

namespace qsadn {

/// Positional decimal rendering (never exponent notation) with exactly `digits`
/// significant digits, trailing zeros kept: format_decimal(0.5, 3) == "0.500".
std::string format_decimal(double v, int digits);

/// printf "%.<digits>g".
std::string format_general(double v, int digits);

/// printf "%.<decimals>f".
std::string format_fixed(double v, int decimals);

}  // namespace qsadn
