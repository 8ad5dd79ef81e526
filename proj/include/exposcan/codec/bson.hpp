#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "exposcan/codec/bytes.hpp"

namespace exposcan::bson {

struct Element;
using Document = std::vector<Element>;

struct Array;

struct Binary {
    std::uint8_t subtype = 0;
    Bytes data;
    bool operator==(const Binary &) const = default;
};

// An element type outside the supported subset (ObjectId, dates, decimal128,
// ...), preserved as its raw payload so it can be rendered or re-encoded.
struct Unsupported {
    std::uint8_t type = 0;
    Bytes raw;
    bool operator==(const Unsupported &) const = default;
};

struct Null {
    bool operator==(const Null &) const = default;
};

struct Value;

struct Array {
    std::vector<Value> items;
    bool operator==(const Array &) const;
};

struct Value {
    using Storage = std::variant<Null, bool, std::int32_t, std::int64_t, double, std::string,
        Document, Array, Binary, Unsupported>;
    Storage v;

    Value() = default;
    template <typename T>
        requires std::is_constructible_v<Storage, T &&>
    Value(T &&x) : v(std::forward<T>(x)) // NOLINT(google-explicit-constructor)
    {}

    template <typename T> [[nodiscard]] bool is() const { return std::holds_alternative<T>(v); }
    template <typename T> [[nodiscard]] const T *get_if() const { return std::get_if<T>(&v); }

    bool operator==(const Value &o) const;
};

struct Element {
    std::string key;
    Value value;
    bool operator==(const Element &o) const;
};

inline constexpr int kMaxDepth = 64;
inline constexpr std::size_t kMaxDocumentSize = 16u << 20;

Bytes encode(const Document &doc);
Decoded<Document> decode(ByteView data);

// Lookup helpers over a decoded document.
const Value *find(const Document &doc, std::string_view key);
std::optional<std::string> get_string(const Document &doc, std::string_view key);
std::optional<double> get_number(const Document &doc, std::string_view key);
std::optional<bool> get_bool(const Document &doc, std::string_view key);
const Document *get_document(const Document &doc, std::string_view key);
const Array *get_array(const Document &doc, std::string_view key);

// Relaxed extended-JSON-like text, used for samples.
std::string to_json_text(const Document &doc);

} // namespace exposcan::bson
