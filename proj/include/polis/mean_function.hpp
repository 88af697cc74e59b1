#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "polis/common.hpp"
#include "polis/positional_encoding.hpp"
#include "polis/rng.hpp"

#include "json.hpp"

namespace polis {

// Constant mean, ignores time. Parameters: the constant vector itself.
struct StationarySpec {
    int dim = 1;
};

// Per-dimension A sin(phi t + psi) + B. Parameter layout: [A | phi | psi | B],
// each block of length dim.
struct SinusoidSpec {
    int dim = 1;
};

// Causal dilated convolution stack over positional encodings of the times
// t-b .. t, where b = 2^{l-1}(k-1). Layer i uses dilation 2^{i-1} with left
// zero padding; a rectifier follows every convolution and the linear head on
// the final position is unactivated. Times below 0 are clamped to 0 before
// encoding. Parameter layout: [W_1 | b_1 | ... | W_l | b_l | W_head | b_head]
// with W_i indexed [out_channel][in_channel][tap] row-major; tap j reads the
// input dilation*j steps back.
struct TemporalConvSpec {
    PositionalEncoding encoding;
    std::vector<int> channels = {8, 8, 4};
    int kernel = 3;
    int out_dim = 1;

    long receptive_field() const;
};

class MeanFunction {
public:
    using Spec = std::variant<StationarySpec, SinusoidSpec, TemporalConvSpec>;

    MeanFunction(StationarySpec s);
    MeanFunction(SinusoidSpec s);
    MeanFunction(TemporalConvSpec s);

    int theta_dim() const;
    int param_count() const;
    long receptive_field() const;
    bool is_stationary() const;
    std::string variant_name() const;
    const Spec& spec() const { return spec_; }

    void value_into(std::span<const double> params, long t, std::span<double> out) const;
    Vec value(std::span<const double> params, long t) const;

    // Accumulates d<cot, mu(t)>/d(params) into grad. Reverse accumulation
    // through the conv stack; closed forms for the other variants.
    void vjp_accum(std::span<const double> params, long t, std::span<const double> cot,
                   std::span<double> grad) const;

    // Uniform +-1/sqrt(fan_in) per conv layer; zeros for the closed-form
    // variants (experiments overwrite those explicitly).
    Vec initial_params(Rng& rng) const;

    nlohmann::json spec_json() const;
    static MeanFunction from_spec_json(const nlohmann::json& j);

private:
    Spec spec_;
    void check_params(std::span<const double> params) const;
};

}  // namespace polis
