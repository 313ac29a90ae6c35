#include "sanmt/tensor.hpp"

#include <cmath>
#include <sstream>

namespace sanmt {

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::fabs(v));
  return m;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace sanmt
