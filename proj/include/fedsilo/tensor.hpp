#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedsilo/errors.hpp"

namespace fedsilo {

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_bytes(Dtype d) { return d == Dtype::F32 ? 4 : 8; }

// Dense row-major tensor. Values live in doubles regardless of dtype; F32
// tensors are quantized through float on every write so that the binary
// codec round-trips element-exact.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> dims, Dtype dtype = Dtype::F64);

    static Tensor matrix(std::size_t rows, std::size_t cols, Dtype dtype = Dtype::F64);
    static Tensor from_values(std::vector<std::size_t> dims, std::vector<double> values,
                              Dtype dtype = Dtype::F64);

    const std::vector<std::size_t>& dims() const { return dims_; }
    Dtype dtype() const { return dtype_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t byte_size() const { return size() * dtype_bytes(dtype_); }

    bool is_matrix() const { return dims_.size() == 2; }
    std::size_t rows() const { return dims_.at(0); }
    std::size_t cols() const { return dims_.at(1); }

    double get(std::size_t flat) const { return data_[flat]; }
    double get2(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }
    void set(std::size_t flat, double v) { data_[flat] = quantize(v); }
    void set2(std::size_t r, std::size_t c, double v) { data_[r * dims_[1] + c] = quantize(v); }

    const std::vector<double>& values() const { return data_; }
    // Mutable element storage: callers writing through this on an F32 tensor
    // must pass values already representable in float.
    std::vector<double>& values_mut() { return data_; }

    bool operator==(const Tensor& other) const {
        return dtype_ == other.dtype_ && dims_ == other.dims_ && data_ == other.data_;
    }

private:
    double quantize(double v) const {
        return dtype_ == Dtype::F32 ? static_cast<double>(static_cast<float>(v)) : v;
    }

    std::vector<std::size_t> dims_;
    Dtype dtype_ = Dtype::F64;
    std::vector<double> data_;
};

// Ordered, uniquely-named collection of tensors. Iteration order is
// insertion order and is preserved by the codec.
class ModelState {
public:
    using Entry = std::pair<std::string, Tensor>;

    void add(std::string name, Tensor tensor);
    const Tensor& at(std::string_view name) const;
    Tensor& at(std::string_view name);
    bool contains(std::string_view name) const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t byte_size() const;

    const std::vector<Entry>& entries() const { return entries_; }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::vector<std::string> names() const;

    bool operator==(const ModelState& other) const { return entries_ == other.entries_; }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

// Canonical .apfl byte layout:
//   magic "APFL" | version 0x01 | entry count u32le
//   per entry: name len u16le, name bytes, dtype u8, rank u8,
//              extents u32le each, raw little-endian element bytes
//   trailer: CRC-32 (IEEE) of all preceding bytes, u32le
std::vector<std::uint8_t> encode_state(const ModelState& state);
ModelState decode_state(std::span<const std::uint8_t> bytes);

inline const Tensor& state_get(const ModelState& state, std::string_view name) {
    return state.at(name);
}

} // namespace fedsilo
