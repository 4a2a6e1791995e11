#include "cpg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cpg/error.hpp"

namespace cpg::nn {

namespace {

std::string describe(const LayerSpec& l) {
    const char* kind = l.kind == LayerKind::dense ? "dense" : l.kind == LayerKind::relu ? "relu" : "head";
    return std::string(kind) + " " + std::to_string(l.in_width) + "->" + std::to_string(l.out_width);
}

void validate_chain(std::span<const LayerSpec> spec) {
    if (spec.empty()) throw DimensionError("network spec is empty");
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto& l = spec[i];
        if (l.in_width == 0 || l.out_width == 0)
            throw DimensionError("layer " + std::to_string(i) + " (" + describe(l) + ") has zero width");
        if (l.kind == LayerKind::relu && l.in_width != l.out_width)
            throw DimensionError("relu layer " + std::to_string(i) + " changes width");
        if (l.kind == LayerKind::head && i + 1 != spec.size())
            throw DimensionError("head layer must be last");
        if (i > 0 && spec[i - 1].out_width != l.in_width)
            throw DimensionError("layer " + std::to_string(i) + " input width " +
                                 std::to_string(l.in_width) + " does not match previous output " +
                                 std::to_string(spec[i - 1].out_width));
    }
}

std::size_t check_batch(const Network& net, std::span<const float> effective, const Tensor& batch) {
    if (effective.size() != net.param_count())
        throw DimensionError("effective weight vector has " + std::to_string(effective.size()) +
                             " entries, network has " + std::to_string(net.param_count()));
    if (batch.dims.size() < 2 || batch.row_width() != net.input_width())
        throw DimensionError("batch feature width does not match network input width " +
                             std::to_string(net.input_width()));
    if (batch.data.size() != batch.rows() * batch.row_width())
        throw DimensionError("batch data length does not match dims");
    for (float v : batch.data)
        if (!std::isfinite(v)) throw DimensionError("batch contains a non-finite value");
    return batch.rows();
}

// Output of one layer for one sample. Bias first, then ascending inputs.
void layer_forward(const LayerSpec& l, const Network::IndexTable& t, std::span<const float> w,
                   std::span<const float> in, std::span<float> out) {
    if (l.kind == LayerKind::relu) {
        for (std::size_t i = 0; i < l.out_width; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
        return;
    }
    for (std::size_t r = 0; r < l.out_width; ++r) {
        float acc = l.has_bias ? w[t.biases[r]] : 0.0f;
        const std::uint32_t* row = t.weights.data() + r * l.in_width;
        for (std::size_t c = 0; c < l.in_width; ++c) {
            const float wv = w[row[c]];
            if (wv != 0.0f) acc += wv * in[c];
        }
        out[r] = acc;
    }
}

}  // namespace

LayerSpec dense(std::size_t in, std::size_t out, bool bias) { return {LayerKind::dense, in, out, bias}; }
LayerSpec relu(std::size_t width) { return {LayerKind::relu, width, width, false}; }
LayerSpec head(std::size_t in, std::size_t classes) { return {LayerKind::head, in, classes, true}; }

Tensor::Tensor(std::vector<std::size_t> d, std::vector<float> v) : dims(std::move(d)), data(std::move(v)) {
    std::size_t n = 1;
    for (auto x : dims) {
        if (x == 0) throw DimensionError("tensor dims must be positive");
        n *= x;
    }
    if (dims.empty() || n != data.size()) throw DimensionError("tensor dims do not match data length");
}

Tensor Tensor::zeros(std::vector<std::size_t> d) {
    std::size_t n = 1;
    for (auto x : d) n *= x;
    return Tensor(std::move(d), std::vector<float>(n, 0.0f));
}

std::size_t Tensor::row_width() const {
    if (dims.size() < 2) return dims.empty() ? 0 : 1;
    std::size_t n = 1;
    for (std::size_t i = 1; i < dims.size(); ++i) n *= dims[i];
    return n;
}

std::span<const float> Tensor::row(std::size_t r) const {
    const std::size_t w = row_width();
    return std::span<const float>(data).subspan(r * w, w);
}

std::span<float> Tensor::row(std::size_t r) {
    const std::size_t w = row_width();
    return std::span<float>(data).subspan(r * w, w);
}

std::size_t Network::weight_index(std::size_t layer, std::size_t row, std::size_t col) const {
    const auto& l = layers_.at(layer);
    if (!l.has_params() || row >= l.out_width || col >= l.in_width)
        throw DimensionError("weight position out of range");
    return tables_[layer].weights[row * l.in_width + col];
}

std::size_t Network::bias_index(std::size_t layer, std::size_t row) const {
    const auto& l = layers_.at(layer);
    if (!l.has_params() || !l.has_bias || row >= l.out_width) throw DimensionError("bias position out of range");
    return tables_[layer].biases[row];
}

std::vector<std::uint32_t> Network::layer_of_params() const {
    std::vector<std::uint32_t> owner(params_.size(), 0);
    for (std::size_t l = 0; l < tables_.size(); ++l) {
        for (auto i : tables_[l].weights) owner[i] = static_cast<std::uint32_t>(l);
        for (auto i : tables_[l].biases) owner[i] = static_cast<std::uint32_t>(l);
    }
    return owner;
}

Network Network::from_parts(std::vector<LayerSpec> layers, std::vector<IndexTable> tables,
                            std::vector<float> params) {
    validate_chain(layers);
    if (tables.size() != layers.size()) throw DimensionError("index table count does not match layers");
    std::vector<std::uint8_t> seen(params.size(), 0);
    auto mark = [&](std::uint32_t i) {
        if (i >= seen.size() || seen[i]) throw DimensionError("parameter index map is not a bijection");
        seen[i] = 1;
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& s = layers[l];
        const std::size_t nw = s.has_params() ? s.in_width * s.out_width : 0;
        const std::size_t nb = s.has_params() && s.has_bias ? s.out_width : 0;
        if (tables[l].weights.size() != nw || tables[l].biases.size() != nb)
            throw DimensionError("index table size mismatch at layer " + std::to_string(l));
        for (auto i : tables[l].weights) mark(i);
        for (auto i : tables[l].biases) mark(i);
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw DimensionError("parameter index map does not cover every parameter");
    Network net;
    net.layers_ = std::move(layers);
    net.tables_ = std::move(tables);
    net.params_ = std::move(params);
    return net;
}

Network build_network(std::span<const LayerSpec> spec, std::uint64_t seed) {
    validate_chain(spec);
    Network net;
    net.layers_.assign(spec.begin(), spec.end());
    net.tables_.resize(spec.size());
    std::mt19937_64 rng(seed);
    std::uint32_t next = 0;
    for (std::size_t l = 0; l < spec.size(); ++l) {
        auto& s = net.layers_[l];
        if (s.kind == LayerKind::relu) {
            s.has_bias = false;
            continue;
        }
        auto& t = net.tables_[l];
        const float a = std::sqrt(6.0f / static_cast<float>(s.in_width + s.out_width));
        std::uniform_real_distribution<float> dist(-a, a);
        t.weights.resize(s.in_width * s.out_width);
        for (auto& i : t.weights) {
            i = next++;
            net.params_.push_back(dist(rng));
        }
        if (s.has_bias) {
            t.biases.resize(s.out_width);
            for (auto& i : t.biases) {
                i = next++;
                net.params_.push_back(0.0f);
            }
        }
    }
    return net;
}

Tensor forward(const Network& net, std::span<const float> effective, const Tensor& batch) {
    const std::size_t n = check_batch(net, effective, batch);
    std::size_t widest = net.input_width();
    for (const auto& l : net.layers()) widest = std::max(widest, l.out_width);
    std::vector<float> a(widest), b(widest);

    Tensor out = Tensor::zeros({n, net.output_width()});
    for (std::size_t s = 0; s < n; ++s) {
        auto x = batch.row(s);
        std::copy(x.begin(), x.end(), a.begin());
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const auto& spec = net.layers()[l];
            layer_forward(spec, net.index_tables()[l], effective, std::span<const float>(a).first(spec.in_width),
                          std::span<float>(b).first(spec.out_width));
            std::swap(a, b);
        }
        std::copy_n(a.begin(), net.output_width(), out.row(s).begin());
    }
    return out;
}

LossGrad loss_and_grad(const Network& net, std::span<const float> effective, const Tensor& batch,
                       std::span<const int> labels) {
    const std::size_t n = check_batch(net, effective, batch);
    if (labels.size() != n) throw DimensionError("label count does not match batch size");
    const std::size_t classes = net.output_width();
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw DimensionError("label " + std::to_string(y) + " out of range for " + std::to_string(classes) +
                                 " classes");

    const auto& layers = net.layers();
    const auto& tables = net.index_tables();
    // acts[l] is the input of layer l; acts.back() holds the logits.
    std::vector<std::vector<float>> acts(layers.size() + 1);
    acts[0].resize(net.input_width());
    for (std::size_t l = 0; l < layers.size(); ++l) acts[l + 1].resize(layers[l].out_width);

    std::vector<double> grad(net.param_count(), 0.0);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> delta, prev;

    for (std::size_t s = 0; s < n; ++s) {
        auto x = batch.row(s);
        std::copy(x.begin(), x.end(), acts[0].begin());
        for (std::size_t l = 0; l < layers.size(); ++l)
            layer_forward(layers[l], tables[l], effective, acts[l], acts[l + 1]);

        const auto& z = acts.back();
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (float v : z) denom += std::exp(static_cast<double>(v) - zmax);
        const int y = labels[s];
        loss += std::log(denom) + zmax - static_cast<double>(z[y]);

        delta.assign(classes, 0.0);
        for (std::size_t c = 0; c < classes; ++c)
            delta[c] = (std::exp(static_cast<double>(z[c]) - zmax) / denom - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_n;

        for (std::size_t l = layers.size(); l-- > 0;) {
            const auto& spec = layers[l];
            const auto& in = acts[l];
            prev.assign(spec.in_width, 0.0);
            if (spec.kind == LayerKind::relu) {
                for (std::size_t i = 0; i < spec.in_width; ++i) prev[i] = in[i] > 0.0f ? delta[i] : 0.0;
            } else {
                const auto& t = tables[l];
                for (std::size_t r = 0; r < spec.out_width; ++r) {
                    const double d = delta[r];
                    if (spec.has_bias) grad[t.biases[r]] += d;
                    if (d == 0.0) continue;
                    const std::uint32_t* row = t.weights.data() + r * spec.in_width;
                    for (std::size_t c = 0; c < spec.in_width; ++c) {
                        grad[row[c]] += d * in[c];
                        prev[c] += d * effective[row[c]];
                    }
                }
            }
            delta.swap(prev);
        }
    }

    LossGrad out;
    out.loss = static_cast<float>(loss * inv_n);
    out.grad.resize(grad.size());
    std::transform(grad.begin(), grad.end(), out.grad.begin(), [](double g) { return static_cast<float>(g); });
    return out;
}

void sgd_step(std::span<float> params, std::span<const float> grad, std::span<const std::uint8_t> update_mask,
              float lr, std::span<float> momentum, float momentum_coeff) {
    if (grad.size() != params.size() || update_mask.size() != params.size() || momentum.size() != params.size())
        throw DimensionError("sgd_step vectors differ in length");
    if (!std::isfinite(lr) || !std::isfinite(momentum_coeff)) throw DimensionError("non-finite learning rate");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!update_mask[i]) continue;
        momentum[i] = momentum_coeff * momentum[i] + grad[i];
        params[i] -= lr * momentum[i];
    }
}

std::size_t grow(Network& net, std::span<const std::size_t> increments) {
    auto& layers = net.layers_;
    if (increments.size() != layers.size()) throw DimensionError("one growth increment per layer required");
    for (std::size_t l = 0; l < layers.size(); ++l)
        if (increments[l] != 0 && layers[l].kind != LayerKind::dense)
            throw DimensionError("only dense layers can grow (layer " + std::to_string(l) + ")");

    const std::size_t before = net.params_.size();
    auto next = static_cast<std::uint32_t>(before);
    auto append = [&] {
        net.params_.push_back(0.0f);
        return next++;
    };

    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::size_t d = increments[l];
        if (d == 0) continue;
        auto& s = layers[l];
        auto& t = net.tables_[l];
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < s.in_width; ++c) t.weights.push_back(append());
        if (s.has_bias)
            for (std::size_t r = 0; r < d; ++r) t.biases.push_back(append());
        s.out_width += d;

        for (std::size_t p = l + 1; p < layers.size(); ++p) {
            auto& ps = layers[p];
            if (ps.kind == LayerKind::relu) {
                ps.in_width += d;
                ps.out_width += d;
                continue;
            }
            auto& pt = net.tables_[p];
            std::vector<std::uint32_t> widened;
            widened.reserve(ps.out_width * (ps.in_width + d));
            std::vector<std::uint32_t> fresh;
            fresh.reserve(ps.out_width * d);
            for (std::size_t r = 0; r < ps.out_width; ++r)
                for (std::size_t c = 0; c < d; ++c) fresh.push_back(append());
            for (std::size_t r = 0; r < ps.out_width; ++r) {
                auto old_row = pt.weights.begin() + static_cast<std::ptrdiff_t>(r * ps.in_width);
                widened.insert(widened.end(), old_row, old_row + static_cast<std::ptrdiff_t>(ps.in_width));
                widened.insert(widened.end(), fresh.begin() + static_cast<std::ptrdiff_t>(r * d),
                               fresh.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
            }
            pt.weights = std::move(widened);
            ps.in_width += d;
            break;
        }
    }
    return net.params_.size() - before;
}

std::size_t param_count_after_growth(const Network& net, std::span<const std::size_t> increments) {
    Network copy = net;
    grow(copy, increments);
    return copy.param_count();
}

Network with_head(const Network& backbone, std::size_t classes) {
    if (classes == 0) throw DimensionError("head needs at least one class");
    Network net = backbone;
    const auto in = backbone.output_width();
    if (net.layers_.back().kind == LayerKind::head) throw DimensionError("network already has a head");
    net.layers_.push_back(head(in, classes));
    Network::IndexTable t;
    auto next = static_cast<std::uint32_t>(net.params_.size());
    t.weights.resize(in * classes);
    std::iota(t.weights.begin(), t.weights.end(), next);
    next += static_cast<std::uint32_t>(in * classes);
    t.biases.resize(classes);
    std::iota(t.biases.begin(), t.biases.end(), next);
    net.tables_.push_back(std::move(t));
    net.params_.resize(net.params_.size() + in * classes + classes, 0.0f);
    return net;
}

}  // namespace cpg::nn
