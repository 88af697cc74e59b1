#include "polis/positional_encoding.hpp"

#include <cassert>
#include <cmath>

namespace polis {

PositionalEncoding::PositionalEncoding(int dim_, double base_) : dim(dim_), base(base_) {
    if (dim < 2 || dim % 2 != 0)
        throw ConfigError("positional encoding dimension must be even and >= 2, got " +
                          std::to_string(dim));
    if (base <= 0.0) throw ConfigError("positional encoding base must be positive");
}

void PositionalEncoding::encode_into(long t, std::span<double> out) const {
    if (t < 0) throw std::domain_error("positional encoding requires t >= 0");
    assert(out.size() == static_cast<size_t>(dim));
    for (int i = 0; i < dim / 2; ++i) {
        double freq = std::pow(base, (2.0 * i) / dim);
        double angle = static_cast<double>(t) / freq;
        out[2 * i] = std::sin(angle);
        out[2 * i + 1] = std::cos(angle);
    }
}

Vec PositionalEncoding::encode(long t) const {
    Vec out(dim);
    encode_into(t, out);
    return out;
}

}  // namespace polis
