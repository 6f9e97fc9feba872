#pragma once

#include <iosfwd>
#include <string>

#include "artrec/nn/network.hpp"

namespace artrec::nn {

/// Self-describing textual checkpoint: versioned header, layer specs,
/// shapes, seed, and hexfloat parameter values (bit-exact round trip).
void write_network(std::ostream& os, const Network& net);
Network read_network(std::istream& is);

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace artrec::nn
