#include "cpg/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cpg/error.hpp"

namespace cpg {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'G', '1'};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : buf_(b) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto out = buf_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    /// Guards element counts read from the file before allocating.
    std::size_t count(std::uint64_t n, std::size_t elem_size) {
        need(n * elem_size);
        return static_cast<std::size_t>(n);
    }
    bool done() const { return pos_ == buf_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > buf_.size() - pos_) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::uint64_t le(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t{buf_[pos_ + i]} << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> b) {
    uLong crc = crc32(0L, Z_NULL, 0);
    return static_cast<std::uint32_t>(crc32(crc, b.data(), static_cast<uInt>(b.size())));
}

}  // namespace

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    return out;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t n_bits) {
    if (bytes.size() != (n_bits + 7) / 8) throw CheckpointError("packed mask length mismatch");
    std::vector<std::uint8_t> bits(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i) bits[i] = (bytes[i / 8] >> (i % 8)) & 1u;
    return bits;
}

std::vector<std::uint8_t> serialize_checkpoint(const CpgState& st) {
    Writer w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kCheckpointVersion);
    w.u64(st.seed);
    w.u64(st.n0);
    w.f64(st.policy.increment_fraction);
    w.f64(st.policy.max_expansion);
    w.u32(static_cast<std::uint32_t>(st.policy.max_retries));
    w.u8(st.policy.reset_on_grow ? 1 : 0);
    w.f32(st.policy.noise);

    const auto& layers = st.net.layers();
    w.u32(static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        w.u8(l.has_bias ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(l.in_width));
        w.u32(static_cast<std::uint32_t>(l.out_width));
    }
    w.u64(st.net.param_count());
    for (const auto& t : st.net.index_tables()) {
        for (auto i : t.weights) w.u32(i);
        for (auto i : t.biases) w.u32(i);
    }
    for (float v : st.net.params()) w.f32(v);
    for (auto o : st.ledger.owners()) w.u16(o);

    w.u16(st.ledger.committed_tasks());
    w.u32(static_cast<std::uint32_t>(st.records.size()));
    for (const auto& r : st.records) {
        w.u16(r.id);
        w.u8(r.best_effort ? 1 : 0);
        w.u8(static_cast<std::uint8_t>(r.goal.source));
        w.f64(r.goal.value);
        w.f64(r.achieved);
        w.u64(r.owned_count);
        w.u32(static_cast<std::uint32_t>(r.growth_events));
        w.u32(static_cast<std::uint32_t>(r.classes.size()));
        for (int c : r.classes) w.i32(c);
        w.u32(static_cast<std::uint32_t>(r.head.in_width));
        w.u32(static_cast<std::uint32_t>(r.head.classes));
        for (float v : r.head.params) w.f32(v);
        w.u64(r.mask.size());
        w.bytes(pack_bits(r.mask));
    }
    auto& buf = w.buffer();
    const auto crc = crc32_of(buf);
    w.u32(crc);
    return std::move(buf);
}

CpgState deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12) throw CheckpointError("checkpoint too short");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic");
    const auto body = bytes.first(bytes.size() - 4);
    Reader tail(bytes.last(4));
    if (tail.u32() != crc32_of(body)) throw CheckpointError("checkpoint checksum mismatch");

    Reader r(body.subspan(4));
    const auto version = r.u32();
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto seed = r.u64();
    const auto n0 = static_cast<std::size_t>(r.u64());
    GrowthPolicy policy;
    policy.increment_fraction = r.f64();
    policy.max_expansion = r.f64();
    policy.max_retries = r.u32();
    policy.reset_on_grow = r.u8() != 0;
    policy.noise = r.f32();

    std::vector<nn::LayerSpec> layers(r.count(r.u32(), 10));
    for (auto& l : layers) {
        const auto kind = r.u8();
        if (kind > static_cast<std::uint8_t>(nn::LayerKind::head)) throw CheckpointError("unknown layer kind");
        l.kind = static_cast<nn::LayerKind>(kind);
        l.has_bias = r.u8() != 0;
        l.in_width = r.u32();
        l.out_width = r.u32();
    }
    const auto n = r.count(r.u64(), 4 + 4 + 2);
    std::vector<nn::Network::IndexTable> tables(layers.size());
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        if (!l.has_params()) continue;
        tables[li].weights.resize(r.count(std::uint64_t{l.in_width} * l.out_width, 4));
        for (auto& i : tables[li].weights) i = r.u32();
        if (l.has_bias) {
            tables[li].biases.resize(r.count(l.out_width, 4));
            for (auto& i : tables[li].biases) i = r.u32();
        }
    }
    std::vector<float> params(n);
    for (auto& v : params) v = r.f32();
    std::vector<TaskId> owners(n);
    for (auto& o : owners) o = r.u16();
    const TaskId committed = r.u16();

    nn::Network net;
    Ledger ledger(1);
    try {
        net = nn::Network::from_parts(std::move(layers), std::move(tables), std::move(params));
        ledger = Ledger::from_owners(std::move(owners), committed);
    } catch (const Error& e) {
        throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
    }

    std::vector<TaskRecord> records(r.count(r.u32(), 40));
    for (auto& rec : records) {
        rec.id = r.u16();
        rec.best_effort = r.u8() != 0;
        const auto src = r.u8();
        if (src > static_cast<std::uint8_t>(GoalSource::top)) throw CheckpointError("unknown goal source");
        rec.goal.source = static_cast<GoalSource>(src);
        rec.goal.value = r.f64();
        rec.achieved = r.f64();
        rec.owned_count = r.u64();
        rec.growth_events = r.u32();
        rec.classes.resize(r.count(r.u32(), 4));
        for (auto& c : rec.classes) c = r.i32();
        rec.head.in_width = r.u32();
        rec.head.classes = r.u32();
        rec.head.params.resize(r.count(std::uint64_t{rec.head.in_width} * rec.head.classes + rec.head.classes, 4));
        for (auto& v : rec.head.params) v = r.f32();
        const auto bits = r.count(r.u64(), 0);
        rec.mask = unpack_bits(r.bytes((bits + 7) / 8), bits);
    }
    if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
    if (records.size() != committed) throw CheckpointError("record count does not match committed tasks");
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& rec = records[k];
        if (rec.id != k + 1) throw CheckpointError("task records out of order");
        if (rec.mask.size() != ledger.prior_indices(rec.id).size())
            throw CheckpointError("mask of task " + std::to_string(rec.id) + " does not match its prior-owned set");
        if (rec.head.in_width > net.output_width()) throw CheckpointError("head wider than the backbone");
    }
    return CpgState{std::move(net), std::move(ledger), std::move(records), policy, n0, seed};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void save_checkpoint(const CpgState& state, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_checkpoint(state));
}

CpgState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return deserialize_checkpoint(bytes);
}

}  // namespace cpg
