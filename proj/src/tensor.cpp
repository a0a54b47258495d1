#include "fedsilo/tensor.hpp"

#include <cstring>
#include <limits>

#include "fedsilo/crypto.hpp"

namespace fedsilo {

namespace {

constexpr std::uint8_t kMagic[4] = {'A', 'P', 'F', 'L'};
constexpr std::uint8_t kVersion = 0x01;
constexpr std::size_t kMaxElements = std::size_t(1) << 32;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

// Bounds-checked little-endian reader.
struct Reader {
    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;

    std::size_t remaining() const { return buf.size() - pos; }

    void need(std::size_t n) const {
        if (remaining() < n) fail(Err::Truncated, "unexpected end of encoded state");
    }

    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = std::uint16_t(buf[pos]) | (std::uint16_t(buf[pos + 1]) << 8);
        pos += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }

    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

} // namespace

Tensor::Tensor(std::vector<std::size_t> dims, Dtype dtype) : dims_(std::move(dims)), dtype_(dtype) {
    if (dims_.empty()) fail(Err::ShapeMismatch, "tensor dims must be nonempty");
    std::size_t n = 1;
    for (std::size_t d : dims_) {
        if (d == 0) fail(Err::ShapeMismatch, "tensor extents must be >= 1");
        if (d > kMaxElements / n) fail(Err::ShapeMismatch, "tensor too large");
        n *= d;
    }
    data_.assign(n, 0.0);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, Dtype dtype) {
    return Tensor({rows, cols}, dtype);
}

Tensor Tensor::from_values(std::vector<std::size_t> dims, std::vector<double> values, Dtype dtype) {
    Tensor t(std::move(dims), dtype);
    if (values.size() != t.size())
        fail(Err::ShapeMismatch, "value count does not match product of dims");
    for (std::size_t i = 0; i < values.size(); ++i) t.set(i, values[i]);
    return t;
}

void ModelState::add(std::string name, Tensor tensor) {
    if (index_.count(name)) fail(Err::DuplicateName, "entry '" + name + "' already present");
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
        fail(Err::BadConfig, "entry name longer than 65535 bytes");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(tensor));
}

const Tensor& ModelState::at(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(Err::NameNotFound, "no entry named '" + std::string(name) + "'");
    return entries_[it->second].second;
}

Tensor& ModelState::at(std::string_view name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail(Err::NameNotFound, "no entry named '" + std::string(name) + "'");
    return entries_[it->second].second;
}

bool ModelState::contains(std::string_view name) const { return index_.count(name) > 0; }

std::size_t ModelState::byte_size() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.byte_size();
    return n;
}

std::vector<std::string> ModelState::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, t] : entries_) out.push_back(name);
    return out;
}

std::vector<std::uint8_t> encode_state(const ModelState& state) {
    std::vector<std::uint8_t> out;
    out.reserve(13 + state.byte_size());
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kVersion);
    put_u32(out, static_cast<std::uint32_t>(state.size()));
    for (const auto& [name, t] : state) {
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<std::uint8_t>(t.dtype()));
        out.push_back(static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
        if (t.dtype() == Dtype::F32) {
            for (double v : t.values()) {
                const float f = static_cast<float>(v);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                put_u32(out, bits);
            }
        } else {
            for (double v : t.values()) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, 8);
                put_u64(out, bits);
            }
        }
    }
    put_u32(out, crc32(out));
    return out;
}

ModelState decode_state(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 13) fail(Err::Truncated, "encoded state shorter than minimal layout");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        fail(Err::BadMagic, "missing APFL magic bytes");
    if (bytes[4] != kVersion)
        fail(Err::UnsupportedVersion, "format version " + std::to_string(bytes[4]));

    // CRC covers everything before the 4-byte trailer; verify before parsing.
    const std::span<const std::uint8_t> body = bytes.first(bytes.size() - 4);
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i)
        stored |= std::uint32_t(bytes[bytes.size() - 4 + i]) << (8 * i);
    if (crc32(body) != stored) fail(Err::CorruptPayload, "CRC-32 mismatch");

    Reader r{body, 5};
    const std::uint32_t count = r.u32();
    ModelState state;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        const std::uint8_t dtype_code = r.u8();
        if (dtype_code > 1) fail(Err::CorruptPayload, "unknown dtype code");
        const Dtype dtype = static_cast<Dtype>(dtype_code);
        const std::uint8_t rank = r.u8();
        if (rank == 0) fail(Err::CorruptPayload, "zero-rank tensor");
        std::vector<std::size_t> dims(rank);
        std::size_t n = 1;
        for (std::uint8_t i = 0; i < rank; ++i) {
            dims[i] = r.u32();
            if (dims[i] == 0) fail(Err::CorruptPayload, "zero extent");
            if (dims[i] > kMaxElements / n) fail(Err::CorruptPayload, "element count overflow");
            n *= dims[i];
        }
        r.need(n * dtype_bytes(dtype));
        Tensor t(std::move(dims), dtype);
        if (dtype == Dtype::F32) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint32_t bits = r.u32();
                float f;
                std::memcpy(&f, &bits, 4);
                t.values_mut()[i] = static_cast<double>(f);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint64_t bits = r.u64();
                double v;
                std::memcpy(&v, &bits, 8);
                t.values_mut()[i] = v;
            }
        }
        state.add(std::move(name), std::move(t));
    }
    if (r.pos != body.size()) fail(Err::CorruptPayload, "trailing bytes after last entry");
    return state;
}

} // namespace fedsilo
