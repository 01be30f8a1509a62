#include "slotframes/rng.hpp"

#include <sstream>

#include "slotframes/array.hpp"

namespace slotframes {

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw ConfigError("malformed rng state");
}

}  // namespace slotframes
