#include "polis/mean_function.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace polis {

long TemporalConvSpec::receptive_field() const {
    long l = static_cast<long>(channels.size());
    return (1L << (l - 1)) * (kernel - 1);
}

namespace {

void validate_tcn(const TemporalConvSpec& s) {
    if (s.channels.empty()) throw ConfigError("temporal conv needs at least one layer");
    for (int c : s.channels)
        if (c < 1) throw ConfigError("temporal conv channel sizes must be positive");
    if (s.kernel < 2) throw ConfigError("temporal conv kernel size must be >= 2");
    if (s.out_dim < 1) throw ConfigError("temporal conv output dimension must be >= 1");
}

int tcn_param_count(const TemporalConvSpec& s) {
    int n = 0;
    int in_ch = s.encoding.dim;
    for (int out_ch : s.channels) {
        n += out_ch * in_ch * s.kernel + out_ch;
        in_ch = out_ch;
    }
    n += s.out_dim * in_ch + s.out_dim;
    return n;
}

// Scratch for one forward pass: per-layer pre-activations and activations,
// channel-major [ch * n + pos].
struct TcnForward {
    long n = 0;
    std::vector<Vec> inputs;  // inputs[0] = encodings, inputs[i] = relu(z[i-1])
    std::vector<Vec> preact;  // preact[i] = pre-activation of conv layer i
};

void tcn_forward(const TemporalConvSpec& s, std::span<const double> p, long t, TcnForward& fw,
                 std::span<double> out) {
    const long b = s.receptive_field();
    const long n = b + 1;
    fw.n = n;
    const size_t layers = s.channels.size();
    fw.inputs.assign(layers + 1, Vec());
    fw.preact.assign(layers, Vec());

    Vec& x0 = fw.inputs[0];
    x0.assign(static_cast<size_t>(s.encoding.dim) * n, 0.0);
    Vec enc(s.encoding.dim);
    for (long pos = 0; pos < n; ++pos) {
        long time = std::max<long>(t - b + pos, 0);
        s.encoding.encode_into(time, enc);
        for (int c = 0; c < s.encoding.dim; ++c) x0[static_cast<size_t>(c) * n + pos] = enc[c];
    }

    size_t off = 0;
    int in_ch = s.encoding.dim;
    for (size_t li = 0; li < layers; ++li) {
        const int out_ch = s.channels[li];
        const long dil = 1L << li;
        const double* W = p.data() + off;
        const double* bias = p.data() + off + static_cast<size_t>(out_ch) * in_ch * s.kernel;
        const Vec& xin = fw.inputs[li];
        Vec& z = fw.preact[li];
        Vec& xout = fw.inputs[li + 1];
        z.assign(static_cast<size_t>(out_ch) * n, 0.0);
        xout.assign(static_cast<size_t>(out_ch) * n, 0.0);
        for (int co = 0; co < out_ch; ++co) {
            const double* Wc = W + static_cast<size_t>(co) * in_ch * s.kernel;
            for (long pos = 0; pos < n; ++pos) {
                double acc = bias[co];
                for (int j = 0; j < s.kernel; ++j) {
                    long src = pos - j * dil;
                    if (src < 0) continue;  // left zero padding
                    const double* Wj = Wc + static_cast<size_t>(j);
                    for (int ci = 0; ci < in_ch; ++ci)
                        acc += Wj[static_cast<size_t>(ci) * s.kernel] *
                               xin[static_cast<size_t>(ci) * n + src];
                }
                z[static_cast<size_t>(co) * n + pos] = acc;
                xout[static_cast<size_t>(co) * n + pos] = acc > 0.0 ? acc : 0.0;
            }
        }
        off += static_cast<size_t>(out_ch) * in_ch * s.kernel + out_ch;
        in_ch = out_ch;
    }

    const double* Wh = p.data() + off;
    const double* bh = p.data() + off + static_cast<size_t>(s.out_dim) * in_ch;
    const Vec& xl = fw.inputs[layers];
    for (int o = 0; o < s.out_dim; ++o) {
        double acc = bh[o];
        for (int ci = 0; ci < in_ch; ++ci)
            acc += Wh[static_cast<size_t>(o) * in_ch + ci] *
                   xl[static_cast<size_t>(ci) * n + (n - 1)];
        out[o] = acc;
    }
}

void tcn_vjp(const TemporalConvSpec& s, std::span<const double> p, long t,
             std::span<const double> cot, std::span<double> grad) {
    TcnForward fw;
    Vec out(s.out_dim);
    tcn_forward(s, p, t, fw, out);

    const long n = fw.n;
    const size_t layers = s.channels.size();

    // Parameter offsets per layer, recomputed to walk backwards.
    std::vector<size_t> offs(layers + 1);
    {
        size_t off = 0;
        int in_ch = s.encoding.dim;
        for (size_t li = 0; li < layers; ++li) {
            offs[li] = off;
            off += static_cast<size_t>(s.channels[li]) * in_ch * s.kernel + s.channels[li];
            in_ch = s.channels[li];
        }
        offs[layers] = off;  // head
    }

    int last_ch = s.channels.back();
    Vec dx(static_cast<size_t>(last_ch) * n, 0.0);
    {
        const double* Wh = p.data() + offs[layers];
        const Vec& xl = fw.inputs[layers];
        size_t gh = offs[layers];
        for (int o = 0; o < s.out_dim; ++o) {
            for (int ci = 0; ci < last_ch; ++ci) {
                grad[gh + static_cast<size_t>(o) * last_ch + ci] +=
                    cot[o] * xl[static_cast<size_t>(ci) * n + (n - 1)];
                dx[static_cast<size_t>(ci) * n + (n - 1)] +=
                    cot[o] * Wh[static_cast<size_t>(o) * last_ch + ci];
            }
            grad[gh + static_cast<size_t>(s.out_dim) * last_ch + o] += cot[o];
        }
    }

    for (size_t li = layers; li-- > 0;) {
        const int out_ch = s.channels[li];
        const int in_ch = li == 0 ? s.encoding.dim : s.channels[li - 1];
        const long dil = 1L << li;
        const double* W = p.data() + offs[li];
        const Vec& z = fw.preact[li];
        const Vec& xin = fw.inputs[li];
        Vec dprev(static_cast<size_t>(in_ch) * n, 0.0);
        for (int co = 0; co < out_ch; ++co) {
            const double* Wc = W + static_cast<size_t>(co) * in_ch * s.kernel;
            size_t gW = offs[li] + static_cast<size_t>(co) * in_ch * s.kernel;
            size_t gb = offs[li] + static_cast<size_t>(out_ch) * in_ch * s.kernel;
            for (long pos = 0; pos < n; ++pos) {
                double g = dx[static_cast<size_t>(co) * n + pos];
                if (g == 0.0 || z[static_cast<size_t>(co) * n + pos] <= 0.0) continue;
                grad[gb + co] += g;
                for (int j = 0; j < s.kernel; ++j) {
                    long src = pos - j * dil;
                    if (src < 0) continue;
                    for (int ci = 0; ci < in_ch; ++ci) {
                        grad[gW + static_cast<size_t>(ci) * s.kernel + j] +=
                            g * xin[static_cast<size_t>(ci) * n + src];
                        dprev[static_cast<size_t>(ci) * n + src] +=
                            g * Wc[static_cast<size_t>(ci) * s.kernel + j];
                    }
                }
            }
        }
        dx = std::move(dprev);
    }
}

}  // namespace

MeanFunction::MeanFunction(StationarySpec s) : spec_(s) {
    if (s.dim < 1) throw ConfigError("stationary mean dimension must be >= 1");
}

MeanFunction::MeanFunction(SinusoidSpec s) : spec_(s) {
    if (s.dim < 1) throw ConfigError("sinusoid mean dimension must be >= 1");
}

MeanFunction::MeanFunction(TemporalConvSpec s) : spec_(std::move(s)) {
    validate_tcn(std::get<TemporalConvSpec>(spec_));
}

int MeanFunction::theta_dim() const {
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, TemporalConvSpec>)
                return s.out_dim;
            else
                return s.dim;
        },
        spec_);
}

int MeanFunction::param_count() const {
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, StationarySpec>) return s.dim;
            if constexpr (std::is_same_v<T, SinusoidSpec>) return 4 * s.dim;
            if constexpr (std::is_same_v<T, TemporalConvSpec>) return tcn_param_count(s);
        },
        spec_);
}

long MeanFunction::receptive_field() const {
    if (const auto* s = std::get_if<TemporalConvSpec>(&spec_)) return s->receptive_field();
    return 0;
}

bool MeanFunction::is_stationary() const {
    return std::holds_alternative<StationarySpec>(spec_);
}

std::string MeanFunction::variant_name() const {
    if (std::holds_alternative<StationarySpec>(spec_)) return "stationary";
    if (std::holds_alternative<SinusoidSpec>(spec_)) return "sinusoid";
    return "temporal_conv";
}

void MeanFunction::check_params(std::span<const double> params) const {
    if (params.size() != static_cast<size_t>(param_count()))
        throw ConfigError("mean-function parameter vector has length " +
                          std::to_string(params.size()) + ", architecture requires " +
                          std::to_string(param_count()));
}

void MeanFunction::value_into(std::span<const double> params, long t,
                              std::span<double> out) const {
    check_params(params);
    if (std::holds_alternative<StationarySpec>(spec_)) {
        std::copy(params.begin(), params.end(), out.begin());
        return;
    }
    if (const auto* s = std::get_if<SinusoidSpec>(&spec_)) {
        const int d = s->dim;
        for (int i = 0; i < d; ++i) {
            double a = params[i], phi = params[d + i], psi = params[2 * d + i],
                   b = params[3 * d + i];
            out[i] = a * std::sin(phi * t + psi) + b;
        }
        return;
    }
    TcnForward fw;
    tcn_forward(std::get<TemporalConvSpec>(spec_), params, t, fw, out);
}

Vec MeanFunction::value(std::span<const double> params, long t) const {
    Vec out(theta_dim());
    value_into(params, t, out);
    return out;
}

void MeanFunction::vjp_accum(std::span<const double> params, long t,
                             std::span<const double> cot, std::span<double> grad) const {
    check_params(params);
    assert(grad.size() == params.size());
    if (std::holds_alternative<StationarySpec>(spec_)) {
        for (size_t i = 0; i < cot.size(); ++i) grad[i] += cot[i];
        return;
    }
    if (const auto* s = std::get_if<SinusoidSpec>(&spec_)) {
        const int d = s->dim;
        for (int i = 0; i < d; ++i) {
            double a = params[i], phi = params[d + i], psi = params[2 * d + i];
            double arg = phi * t + psi;
            double sn = std::sin(arg), cs = std::cos(arg);
            grad[i] += cot[i] * sn;
            grad[d + i] += cot[i] * a * static_cast<double>(t) * cs;
            grad[2 * d + i] += cot[i] * a * cs;
            grad[3 * d + i] += cot[i];
        }
        return;
    }
    tcn_vjp(std::get<TemporalConvSpec>(spec_), params, t, cot, grad);
}

Vec MeanFunction::initial_params(Rng& rng) const {
    Vec p(param_count(), 0.0);
    const auto* s = std::get_if<TemporalConvSpec>(&spec_);
    if (!s) return p;
    size_t off = 0;
    int in_ch = s->encoding.dim;
    auto fill = [&](size_t count, int fan_in) {
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (size_t i = 0; i < count; ++i) p[off + i] = u(rng);
        off += count;
    };
    for (int out_ch : s->channels) {
        int fan = in_ch * s->kernel;
        fill(static_cast<size_t>(out_ch) * in_ch * s->kernel, fan);
        fill(out_ch, fan);
        in_ch = out_ch;
    }
    fill(static_cast<size_t>(s->out_dim) * in_ch, in_ch);
    fill(s->out_dim, in_ch);
    return p;
}

nlohmann::json MeanFunction::spec_json() const {
    nlohmann::json j;
    j["variant"] = variant_name();
    if (const auto* st = std::get_if<StationarySpec>(&spec_)) {
        j["dim"] = st->dim;
    } else if (const auto* si = std::get_if<SinusoidSpec>(&spec_)) {
        j["dim"] = si->dim;
    } else {
        const auto& tc = std::get<TemporalConvSpec>(spec_);
        j["encoding_dim"] = tc.encoding.dim;
        j["encoding_base"] = tc.encoding.base;
        j["channels"] = tc.channels;
        j["kernel"] = tc.kernel;
        j["out_dim"] = tc.out_dim;
    }
    return j;
}

MeanFunction MeanFunction::from_spec_json(const nlohmann::json& j) {
    const std::string variant = j.at("variant").get<std::string>();
    if (variant == "stationary") return MeanFunction(StationarySpec{j.at("dim").get<int>()});
    if (variant == "sinusoid") return MeanFunction(SinusoidSpec{j.at("dim").get<int>()});
    if (variant == "temporal_conv") {
        TemporalConvSpec s;
        s.encoding = PositionalEncoding(j.at("encoding_dim").get<int>(),
                                        j.at("encoding_base").get<double>());
        s.channels = j.at("channels").get<std::vector<int>>();
        s.kernel = j.at("kernel").get<int>();
        s.out_dim = j.at("out_dim").get<int>();
        return MeanFunction(s);
    }
    throw ConfigError("unknown mean-function variant '" + variant + "'");
}

}  // namespace polis
