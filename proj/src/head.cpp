#include "cpg/head.hpp"

#include <algorithm>
#include <cmath>

#include "cpg/error.hpp"

namespace cpg {

Head Head::init(std::size_t in_width, std::size_t classes, std::uint64_t seed) {
    if (in_width == 0 || classes == 0) throw DimensionError("head widths must be positive");
    Head h;
    h.in_width = in_width;
    h.classes = classes;
    h.params.assign(h.param_count(), 0.0f);
    std::mt19937_64 rng(seed);
    const float a = std::sqrt(6.0f / static_cast<float>(in_width + classes));
    std::uniform_real_distribution<float> dist(-a, a);
    for (std::size_t i = 0; i < in_width * classes; ++i) h.params[i] = dist(rng);
    return h;
}

std::vector<float> Head::padded(std::size_t in) const {
    if (in < in_width) throw DimensionError("cannot shrink a head");
    if (in == in_width) return params;
    std::vector<float> out(in * classes + classes, 0.0f);
    for (std::size_t r = 0; r < classes; ++r)
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(r * in_width), in_width,
                    out.begin() + static_cast<std::ptrdiff_t>(r * in));
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(in_width * classes), classes,
                out.begin() + static_cast<std::ptrdiff_t>(in * classes));
    return out;
}

void Head::widen(std::size_t new_in_width, float noise, std::mt19937_64& rng) {
    auto out = padded(new_in_width);
    if (noise > 0.0f) {
        std::uniform_real_distribution<float> dist(-noise, noise);
        for (std::size_t r = 0; r < classes; ++r)
            for (std::size_t c = in_width; c < new_in_width; ++c) out[r * new_in_width + c] = dist(rng);
    }
    params = std::move(out);
    in_width = new_in_width;
}

std::vector<float> stack_effective(std::span<const float> view, const Head& head, std::size_t backbone_out) {
    std::vector<float> eff(view.begin(), view.end());
    const auto h = head.padded(backbone_out);
    eff.insert(eff.end(), h.begin(), h.end());
    return eff;
}

nn::Tensor task_logits(const nn::Network& backbone, std::span<const float> view, const Head& head,
                       const nn::Tensor& batch) {
    const auto net = nn::with_head(backbone, head.classes);
    return nn::forward(net, stack_effective(view, head, backbone.output_width()), batch);
}

double accuracy(const nn::Tensor& logits, std::span<const int> labels) {
    if (logits.rows() != labels.size()) throw DimensionError("logit rows and label count differ");
    if (labels.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        auto row = logits.row(s);
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        if (best == labels[s]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double accuracy(const nn::Network& backbone, std::span<const float> view, const Head& head,
                const data::Dataset& dataset) {
    nn::Tensor flat({dataset.size(), dataset.feature_width()}, dataset.samples.data);
    return accuracy(task_logits(backbone, view, head, flat), dataset.labels);
}

}  // namespace cpg
