#include "flg/rng.hpp"

#include <sstream>

#include "flg/errors.hpp"

namespace flg {

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::set_state(const std::string& text) {
    std::istringstream is(text);
    std::mt19937_64 engine;
    is >> engine;
    if (!is) throw FormatError("malformed RNG state");
    engine_ = engine;
}

}  // namespace flg
