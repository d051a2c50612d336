// Copyright 2026-present the compressae project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "compressae/errors.hpp"

// Little-endian primitives shared by the corpus, model and index formats.
namespace compressae::binary {

template <typename T>
T byteswap(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
        std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        return byteswap(value);
    } else {
        return value;
    }
}

void write_bytes(std::ostream& out, const void* data, std::size_t size);
void read_bytes(std::istream& in, void* data, std::size_t size, const char* what);

template <typename T>
void write_scalar(std::ostream& out, T value) {
    value = to_little(value);
    write_bytes(out, &value, sizeof(T));
}

template <typename T>
T read_scalar(std::istream& in, const char* what) {
    T value;
    read_bytes(in, &value, sizeof(T), what);
    return to_little(value);
}

template <typename T>
void write_array(std::ostream& out, std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
        write_bytes(out, values.data(), values.size_bytes());
    } else {
        for (T v : values) write_scalar(out, v);
    }
}

template <typename T>
void read_array(std::istream& in, std::span<T> values, const char* what) {
    read_bytes(in, values.data(), values.size_bytes(), what);
    if constexpr (std::endian::native == std::endian::big) {
        for (T& v : values) v = byteswap(v);
    }
}

void write_magic(std::ostream& out, const char (&magic)[5]);
/// Throws FormatError when the next four bytes are not `magic`.
void expect_magic(std::istream& in, const char (&magic)[5]);

}  // namespace compressae::binary
