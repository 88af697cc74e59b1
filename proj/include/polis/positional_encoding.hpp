#pragma once

#include <span>

#include "polis/common.hpp"

namespace polis {

// Fourier time features: entry 2i = sin(t / base^{2i/dim}), entry 2i+1 the
// matching cosine. Parameter-free; every entry lies in [-1, 1] for t >= 0.
struct PositionalEncoding {
    int dim = 8;
    double base = 10000.0;

    PositionalEncoding() = default;
    PositionalEncoding(int dim_, double base_ = 10000.0);

    void encode_into(long t, std::span<double> out) const;
    Vec encode(long t) const;
};

}  // namespace polis
