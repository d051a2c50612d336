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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace compressae {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A vector with zero norm (or a reconstruction with a zero quadratic form)
/// reached an operation that needs a direction. `row()` carries the batch or
/// corpus row when one is known.
class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& what,
                                  std::optional<std::size_t> row = std::nullopt)
        : Error(row ? what + " (row " + std::to_string(*row) + ")" : what), row_(row) {}

    std::optional<std::size_t> row() const noexcept { return row_; }

private:
    std::optional<std::size_t> row_;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or invariant-violating file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced during optimisation.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace compressae
