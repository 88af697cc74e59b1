#pragma once

#include <cstdint>
#include <random>

namespace polis {

using Rng = std::mt19937_64;

// Named sub-streams fanned out from one master seed. Stream ids are part of
// the reproducibility contract (see README): changing them changes every run.
enum class Stream : std::uint32_t {
    init = 0,       // hyper-policy weight initialization
    exogenous = 1,  // environment exogenous process and reward noise
    sampling = 2,   // policy-parameter draws while acting
    replay = 3,     // replayed trajectories during retraining
    bench = 4,      // bound-benchmark instance generation
};

inline Rng make_rng(std::uint64_t master, Stream stream,
                    std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
        static_cast<std::uint32_t>(stream),
        static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
        static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
        static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return Rng(seq);
}

}  // namespace polis
