#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "dasmae/errors.hpp"

// Little-endian primitive encoding shared by the WFP1 and DMCK formats.
namespace dasmae::io {

template <typename U>
void put_le(std::ostream& os, U value) {
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

inline void put_f32(std::ostream& os, float v) { put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v)); }

/// Reads little-endian values from a stream, throwing DataError that names
/// `source` when the stream ends early.
class Reader {
public:
    Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

    template <typename U>
    U le() {
        unsigned char bytes[sizeof(U)];
        read_raw(bytes, sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
        return v;
    }

    float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }

    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        if (n > 0) read_raw(s.data(), n);
        return s;
    }

    void read_raw(void* dst, std::size_t n) {
        is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) throw DataError(source_ + ": truncated payload");
    }

    bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

    const std::string& source() const { return source_; }

private:
    std::istream& is_;
    std::string source_;
};

}  // namespace dasmae::io
