#include "gpforge/gp_sample.hpp"

#include <stdexcept>

namespace gpforge {

std::string to_string(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::Rff: return "rff";
    case Method::Ciq: return "ciq";
    case Method::CiqPreconditioned: return "pciq";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "exact") return Method::Exact;
  if (name == "rff") return Method::Rff;
  if (name == "ciq") return Method::Ciq;
  if (name == "pciq") return Method::CiqPreconditioned;
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected exact, rff, ciq or pciq)");
}

}  // namespace gpforge
