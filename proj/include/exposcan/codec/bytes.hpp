#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace exposcan {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s)
{
    return {reinterpret_cast<const std::uint8_t *>(s.data()), s.size()};
}

inline std::string to_string(ByteView b) { return {b.begin(), b.end()}; }

std::string to_hex(ByteView b);

// Raised by every decoder. Truncated means "valid prefix, need more bytes";
// Malformed means the bytes can never decode.
class DecodeError : public std::runtime_error {
public:
    enum class Kind { Truncated, Malformed };

    DecodeError(Kind kind, std::size_t offset, const std::string &what)
        : std::runtime_error(what), kind_(kind), offset_(offset)
    {}

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] std::size_t offset() const { return offset_; }
    [[nodiscard]] bool truncated() const { return kind_ == Kind::Truncated; }

private:
    Kind kind_;
    std::size_t offset_;
};

[[noreturn]] inline void throw_truncated(std::size_t offset, const char *what)
{
    throw DecodeError(DecodeError::Kind::Truncated, offset, what);
}

[[noreturn]] inline void throw_malformed(std::size_t offset, const std::string &what)
{
    throw DecodeError(DecodeError::Kind::Malformed, offset, what);
}

template <typename T> struct Decoded {
    T value;
    std::size_t consumed = 0;
};

class ByteReader {
public:
    explicit ByteReader(ByteView data, std::size_t base_offset = 0)
        : data_(data), base_(base_offset)
    {}

    [[nodiscard]] std::size_t position() const { return pos_; }
    [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }
    [[nodiscard]] bool at_end() const { return pos_ == data_.size(); }
    [[nodiscard]] std::size_t absolute() const { return base_ + pos_; }

    std::uint8_t u8()
    {
        need(1);
        return data_[pos_++];
    }

    std::uint16_t u16le() { return load<std::uint16_t>(false); }
    std::uint16_t u16be() { return load<std::uint16_t>(true); }
    std::uint32_t u32le() { return load<std::uint32_t>(false); }
    std::uint32_t u32be() { return load<std::uint32_t>(true); }
    std::int32_t i32le() { return static_cast<std::int32_t>(u32le()); }
    std::int32_t i32be() { return static_cast<std::int32_t>(u32be()); }
    std::int16_t i16be() { return static_cast<std::int16_t>(u16be()); }
    std::uint64_t u64le() { return load<std::uint64_t>(false); }
    std::int64_t i64le() { return static_cast<std::int64_t>(u64le()); }
    std::int64_t i64be() { return static_cast<std::int64_t>(load<std::uint64_t>(true)); }

    std::uint32_t u24le()
    {
        need(3);
        std::uint32_t v = data_[pos_] | (data_[pos_ + 1] << 8) | (data_[pos_ + 2] << 16);
        pos_ += 3;
        return v;
    }

    double f64le() { return std::bit_cast<double>(u64le()); }

    ByteView bytes(std::size_t n)
    {
        need(n);
        ByteView out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::string str(std::size_t n)
    {
        auto b = bytes(n);
        return {b.begin(), b.end()};
    }

    // NUL-terminated string; a missing terminator is Truncated.
    std::string cstring()
    {
        for (std::size_t i = pos_; i < data_.size(); ++i) {
            if (data_[i] == 0) {
                std::string out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                    data_.begin() + static_cast<std::ptrdiff_t>(i));
                pos_ = i + 1;
                return out;
            }
        }
        throw_truncated(absolute(), "unterminated string");
    }

    ByteView rest()
    {
        ByteView out = data_.subspan(pos_);
        pos_ = data_.size();
        return out;
    }

    void skip(std::size_t n) { bytes(n); }

private:
    void need(std::size_t n) const
    {
        if (remaining() < n) {
            throw_truncated(absolute(), "unexpected end of input");
        }
    }

    template <typename T> T load(bool big_endian)
    {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            std::size_t shift = big_endian ? (sizeof(T) - 1 - i) * 8 : i * 8;
            v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << shift);
        }
        pos_ += sizeof(T);
        return v;
    }

    ByteView data_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16le(std::uint16_t v) { store(v, false); }
    void u16be(std::uint16_t v) { store(v, true); }
    void u32le(std::uint32_t v) { store(v, false); }
    void u32be(std::uint32_t v) { store(v, true); }
    void i32le(std::int32_t v) { store(static_cast<std::uint32_t>(v), false); }
    void i32be(std::int32_t v) { store(static_cast<std::uint32_t>(v), true); }
    void i16be(std::int16_t v) { store(static_cast<std::uint16_t>(v), true); }
    void u64le(std::uint64_t v) { store(v, false); }
    void i64le(std::int64_t v) { store(static_cast<std::uint64_t>(v), false); }
    void i64be(std::int64_t v) { store(static_cast<std::uint64_t>(v), true); }
    void f64le(double v) { u64le(std::bit_cast<std::uint64_t>(v)); }

    void u24le(std::uint32_t v)
    {
        out_.push_back(static_cast<std::uint8_t>(v));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        out_.push_back(static_cast<std::uint8_t>(v >> 16));
    }

    void bytes(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void str(std::string_view s) { bytes(as_bytes(s)); }

    void cstring(std::string_view s)
    {
        str(s);
        out_.push_back(0);
    }

    void patch_u32le(std::size_t at, std::uint32_t v)
    {
        for (std::size_t i = 0; i < 4; ++i) {
            out_[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
        }
    }

    void patch_u32be(std::size_t at, std::uint32_t v)
    {
        for (std::size_t i = 0; i < 4; ++i) {
            out_[at + i] = static_cast<std::uint8_t>(v >> (8 * (3 - i)));
        }
    }

    [[nodiscard]] std::size_t size() const { return out_.size(); }
    Bytes &data() { return out_; }
    Bytes take() { return std::move(out_); }

private:
    template <typename T> void store(T v, bool big_endian)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            std::size_t shift = big_endian ? (sizeof(T) - 1 - i) * 8 : i * 8;
            out_.push_back(static_cast<std::uint8_t>(v >> shift));
        }
    }

    Bytes out_;
};

} // namespace exposcan
