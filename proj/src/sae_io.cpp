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

#include <fstream>
#include <span>
#include <string>

#include "compressae/binary_io.hpp"
#include "compressae/sae.hpp"

namespace compressae {

std::size_t write_model(const SaeParams<float>& params, std::ostream& out) {
    validate_params(params);
    binary::write_magic(out, kModelMagic);
    binary::write_scalar<std::uint32_t>(out, kModelVersion);
    binary::write_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(params.dim_in));
    binary::write_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(params.dim_latent));
    binary::write_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(params.sparsity));
    binary::write_array<float>(out, std::span<const float>(params.w_enc.data(), params.w_enc.size()));
    binary::write_array<float>(out, std::span<const float>(params.b_enc.data(), params.b_enc.size()));
    binary::write_array<float>(out, std::span<const float>(params.w_dec.data(), params.w_dec.size()));
    const std::size_t d = params.dim_in, h = params.dim_latent;
    return kModelHeaderSize + 4 * (2 * h * d + h);
}

SaeParams<float> read_model(std::istream& in) {
    binary::expect_magic(in, kModelMagic);
    const auto version = binary::read_scalar<std::uint32_t>(in, "version");
    if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
    SaeParams<float> p;
    p.dim_in = binary::read_scalar<std::uint32_t>(in, "d");
    p.dim_latent = binary::read_scalar<std::uint32_t>(in, "h");
    p.sparsity = binary::read_scalar<std::uint32_t>(in, "k");
    try {
        check_dims(p.dim_in, p.dim_latent, p.sparsity);
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("invalid model header: ") + e.what());
    }
    const auto d = static_cast<Eigen::Index>(p.dim_in);
    const auto h = static_cast<Eigen::Index>(p.dim_latent);
    p.w_enc.resize(h, d);
    p.b_enc.resize(h);
    p.w_dec.resize(d, h);
    binary::read_array<float>(in, std::span<float>(p.w_enc.data(), p.w_enc.size()), "W_enc");
    binary::read_array<float>(in, std::span<float>(p.b_enc.data(), p.b_enc.size()), "b_enc");
    binary::read_array<float>(in, std::span<float>(p.w_dec.data(), p.w_dec.size()), "W_dec");
    try {
        validate_params(p);
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("invalid model: ") + e.what());
    }
    return p;
}

void save_model(const SaeParams<float>& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_model(params, out);
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

SaeParams<float> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_model(in);
}

}  // namespace compressae
