#pragma once

#include <complex>

#include "errors.hpp"

namespace dfigss {

using cplx = std::complex<double>;

} // namespace dfigss
