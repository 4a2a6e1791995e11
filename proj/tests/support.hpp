#pragma once

// Independent reference computations for tests. Nothing here calls the
// engine's forward or backward code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

#include "cpg/nn.hpp"

namespace cpg::testing {

/// Double-precision forward through the (layer,row,col) map, plain loops.
inline std::vector<std::vector<double>> naive_forward(const nn::Network& net, const std::vector<double>& w,
                                                      const nn::Tensor& batch,
                                                      std::vector<double>* min_abs_preact = nullptr) {
    std::vector<std::vector<double>> out;
    double closest = 1e300;
    for (std::size_t s = 0; s < batch.rows(); ++s) {
        auto r = batch.row(s);
        std::vector<double> x(r.begin(), r.end());
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const auto& spec = net.layers()[l];
            std::vector<double> y(spec.out_width, 0.0);
            if (spec.kind == nn::LayerKind::relu) {
                for (std::size_t i = 0; i < x.size(); ++i) {
                    closest = std::min(closest, std::fabs(x[i]));
                    y[i] = std::max(0.0, x[i]);
                }
            } else {
                for (std::size_t o = 0; o < spec.out_width; ++o) {
                    double acc = spec.has_bias ? w[net.bias_index(l, o)] : 0.0;
                    for (std::size_t c = 0; c < spec.in_width; ++c) acc += w[net.weight_index(l, o, c)] * x[c];
                    y[o] = acc;
                }
            }
            x = std::move(y);
        }
        out.push_back(std::move(x));
    }
    if (min_abs_preact) min_abs_preact->assign(1, closest);
    return out;
}

inline double naive_loss(const nn::Network& net, const std::vector<double>& w, const nn::Tensor& batch,
                         const std::vector<int>& labels) {
    const auto logits = naive_forward(net, w, batch);
    double total = 0.0;
    for (std::size_t s = 0; s < logits.size(); ++s) {
        const auto& z = logits[s];
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - m);
        total += std::log(sum) + m - z[static_cast<std::size_t>(labels[s])];
    }
    return total / static_cast<double>(logits.size());
}

/// Central differences on the loss, step h.
inline std::vector<double> finite_difference_grad(const nn::Network& net, const std::vector<float>& w,
                                                  const nn::Tensor& batch, const std::vector<int>& labels,
                                                  double h = 1e-3) {
    std::vector<double> wd(w.begin(), w.end());
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double keep = wd[i];
        wd[i] = keep + h;
        const double up = naive_loss(net, wd, batch, labels);
        wd[i] = keep - h;
        const double down = naive_loss(net, wd, batch, labels);
        wd[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// |a-b| / max(|a|, |b|, 1e-3); the floor keeps near-zero entries from
/// dominating on float rounding alone.
inline double relative_error(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-3});
}

inline nn::Tensor random_batch(std::size_t n, std::size_t width, std::mt19937_64& rng) {
    std::normal_distribution<float> d(0.0f, 1.0f);
    std::vector<float> v(n * width);
    for (auto& x : v) x = d(rng);
    return nn::Tensor({n, width}, std::move(v));
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, static_cast<int>(classes) - 1);
    std::vector<int> y(n);
    for (auto& v : y) v = d(rng);
    return y;
}

inline bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

/// FNV-1a over the raw bytes of the selected entries.
inline std::uint64_t hash_entries(const std::vector<float>& v, const std::vector<std::size_t>& idx) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto i : idx) {
        std::uint32_t bits;
        std::memcpy(&bits, &v[i], 4);
        for (int b = 0; b < 4; ++b) {
            h ^= (bits >> (8 * b)) & 0xffu;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace cpg::testing
