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

#include "compressae/binary_io.hpp"

namespace compressae::binary {

void write_bytes(std::ostream& out, const void* data, std::size_t size) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("write failed");
}

void read_bytes(std::istream& in, void* data, std::size_t size, const char* what) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in.gcount()) != size) {
        throw FormatError(std::string("truncated input while reading ") + what);
    }
}

void write_magic(std::ostream& out, const char (&magic)[5]) { write_bytes(out, magic, 4); }

void expect_magic(std::istream& in, const char (&magic)[5]) {
    char got[4];
    read_bytes(in, got, 4, "magic");
    if (std::memcmp(got, magic, 4) != 0) {
        throw FormatError(std::string("bad magic: expected \"") + magic + "\", got \"" +
                          std::string(got, 4) + "\"");
    }
}

}  // namespace compressae::binary
