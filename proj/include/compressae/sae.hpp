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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "compressae/errors.hpp"

namespace compressae {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A k-sparse latent code: strictly increasing indices into [0, dim_latent)
/// with matching nonzero values.
template <typename Scalar>
struct SparseActivation {
    std::vector<std::uint32_t> indices;
    std::vector<Scalar> values;
    std::size_t dim_latent = 0;

    std::size_t nnz() const { return indices.size(); }

    Vector<Scalar> to_dense() const {
        Vector<Scalar> dense = Vector<Scalar>::Zero(static_cast<Eigen::Index>(dim_latent));
        for (std::size_t j = 0; j < indices.size(); ++j) dense(indices[j]) = values[j];
        return dense;
    }

    friend bool operator==(const SparseActivation&, const SparseActivation&) = default;
};

/// Encoder weights (h x d, one row per latent), encoder bias (h) and the
/// bias-free decoder (d x h, column-major so every atom is contiguous).
template <typename Scalar>
struct SaeParams {
    using EncoderMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using DecoderMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

    std::size_t dim_in = 0;
    std::size_t dim_latent = 0;
    std::size_t sparsity = 0;
    EncoderMatrix w_enc;
    Vector<Scalar> b_enc;
    DecoderMatrix w_dec;

    template <typename Other>
    SaeParams<Other> cast() const {
        SaeParams<Other> out;
        out.dim_in = dim_in;
        out.dim_latent = dim_latent;
        out.sparsity = sparsity;
        out.w_enc = w_enc.template cast<Other>();
        out.b_enc = b_enc.template cast<Other>();
        out.w_dec = w_dec.template cast<Other>();
        return out;
    }

    friend bool operator==(const SaeParams& a, const SaeParams& b) {
        return a.dim_in == b.dim_in && a.dim_latent == b.dim_latent && a.sparsity == b.sparsity &&
               a.w_enc == b.w_enc && a.b_enc == b.b_enc && a.w_dec == b.w_dec;
    }
};

/// Checks 1 <= k, 4k <= h and nonzero d.
inline void check_dims(std::size_t d, std::size_t h, std::size_t k) {
    if (d == 0 || h == 0) throw InvalidArgument("dim_in and dim_latent must be positive");
    if (k == 0) throw InvalidArgument("sparsity k must be at least 1");
    if (4 * k > h) {
        throw InvalidArgument("4k <= h is required by the dual (k, 4k) loss, got k=" +
                              std::to_string(k) + ", h=" + std::to_string(h));
    }
}

/// Throws InvalidArgument when shapes, atom norms (1 +- tol) or finiteness fail.
template <typename Scalar>
void validate_params(const SaeParams<Scalar>& p, double atom_tolerance = 1e-5) {
    check_dims(p.dim_in, p.dim_latent, p.sparsity);
    const auto d = static_cast<Eigen::Index>(p.dim_in);
    const auto h = static_cast<Eigen::Index>(p.dim_latent);
    if (p.w_enc.rows() != h || p.w_enc.cols() != d || p.b_enc.size() != h ||
        p.w_dec.rows() != d || p.w_dec.cols() != h) {
        throw InvalidArgument("parameter shapes do not match (d, h)");
    }
    if (!p.w_enc.allFinite() || !p.b_enc.allFinite() || !p.w_dec.allFinite()) {
        throw InvalidArgument("parameters contain non-finite entries");
    }
    for (Eigen::Index j = 0; j < h; ++j) {
        const double norm = static_cast<double>(p.w_dec.col(j).norm());
        if (std::abs(norm - 1.0) > atom_tolerance) {
            throw InvalidArgument("decoder atom " + std::to_string(j) + " has norm " +
                                  std::to_string(norm));
        }
    }
}

template <typename Derived>
auto normalize_input(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    const Scalar norm = x.norm();
    if (!(norm > Scalar(0))) throw DegenerateInputError("cannot normalize a zero vector");
    Vector<Scalar> out = x / norm;
    return out;
}

/// Position order used by top-k selection: larger magnitude first, then the
/// smaller latent index.
template <typename Scalar>
struct MagnitudeOrder {
    const Scalar* z;
    bool operator()(std::uint32_t a, std::uint32_t b) const {
        const Scalar ma = std::abs(z[a]);
        const Scalar mb = std::abs(z[b]);
        return ma != mb ? ma > mb : a < b;
    }
};

/// Nonzero positions of `z` ranked by MagnitudeOrder, truncated to `k`.
template <typename Scalar>
std::vector<std::uint32_t> rank_by_magnitude(std::span<const Scalar> z, std::size_t k) {
    std::vector<std::uint32_t> candidates;
    candidates.reserve(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] != Scalar(0)) candidates.push_back(static_cast<std::uint32_t>(i));
    }
    const std::size_t keep = std::min(k, candidates.size());
    MagnitudeOrder<Scalar> order{z.data()};
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), order);
    candidates.resize(keep);
    return candidates;
}

/// Sparse code from ranked positions: the first `k` of `ranked`, re-sorted by index.
template <typename Scalar>
SparseActivation<Scalar> gather_activation(std::span<const Scalar> z,
                                           std::span<const std::uint32_t> ranked, std::size_t k) {
    SparseActivation<Scalar> s;
    s.dim_latent = z.size();
    s.indices.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size())));
    std::sort(s.indices.begin(), s.indices.end());
    s.values.reserve(s.indices.size());
    for (auto i : s.indices) s.values.push_back(z[i]);
    return s;
}

/// Keeps the k entries of largest absolute value with their signs. Exact
/// zeros are never kept, so fewer than k entries come back for very sparse z.
template <typename Scalar>
SparseActivation<Scalar> topk_abs(std::span<const Scalar> z, std::size_t k) {
    if (k == 0 || k > z.size()) throw InvalidArgument("topk_abs requires 1 <= k <= h");
    const auto ranked = rank_by_magnitude(z, k);
    return gather_activation<Scalar>(z, ranked, k);
}

template <typename Derived>
auto topk_abs(const Eigen::MatrixBase<Derived>& z, std::size_t k) {
    using Scalar = typename Derived::Scalar;
    const Vector<Scalar> dense = z;
    return topk_abs(std::span<const Scalar>(dense.data(), static_cast<std::size_t>(dense.size())), k);
}

/// Dense pre-activation W_enc * normalize(x) + b_enc.
template <typename Scalar, typename Derived>
Vector<Scalar> pre_activation(const SaeParams<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
    if (static_cast<std::size_t>(x.size()) != p.dim_in) {
        throw DimensionMismatch("input has dim " + std::to_string(x.size()) + ", model expects " +
                                std::to_string(p.dim_in));
    }
    const Vector<Scalar> xbar = normalize_input(x);
    Vector<Scalar> z = p.w_enc * xbar;
    z += p.b_enc;
    return z;
}

template <typename Scalar, typename Derived>
SparseActivation<Scalar> encode(const SaeParams<Scalar>& p, const Eigen::MatrixBase<Derived>& x,
                                std::optional<std::size_t> k_override = std::nullopt) {
    const Vector<Scalar> z = pre_activation(p, x);
    return topk_abs(std::span<const Scalar>(z.data(), static_cast<std::size_t>(z.size())),
                    k_override.value_or(p.sparsity));
}

/// Sum of value_j * atom_j over stored entries; touches nnz * d weights only.
template <typename Scalar>
Vector<Scalar> decode(const SaeParams<Scalar>& p, const SparseActivation<Scalar>& s) {
    if (s.dim_latent != p.dim_latent) {
        throw DimensionMismatch("activation has h=" + std::to_string(s.dim_latent) +
                                ", model has h=" + std::to_string(p.dim_latent));
    }
    Vector<Scalar> out = Vector<Scalar>::Zero(static_cast<Eigen::Index>(p.dim_in));
    for (std::size_t j = 0; j < s.indices.size(); ++j) {
        out.noalias() += s.values[j] * p.w_dec.col(s.indices[j]);
    }
    return out;
}

template <typename Scalar>
struct ForwardResult {
    SparseActivation<Scalar> activation;
    Vector<Scalar> reconstruction;
};

template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const SaeParams<Scalar>& p, const Eigen::MatrixBase<Derived>& x,
                              std::optional<std::size_t> k_override = std::nullopt) {
    ForwardResult<Scalar> out;
    out.activation = encode(p, x, k_override);
    out.reconstruction = decode(p, out.activation);
    return out;
}

/// Random unit atoms for W_dec, W_enc = W_dec^T, zero bias.
template <typename Scalar = float>
SaeParams<Scalar> init_params(std::size_t d, std::size_t h, std::size_t k, std::uint64_t seed) {
    check_dims(d, h, k);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SaeParams<Scalar> p;
    p.dim_in = d;
    p.dim_latent = h;
    p.sparsity = k;
    p.w_dec.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(h));
    Eigen::VectorXd atom(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < p.w_dec.cols(); ++j) {
        do {
            for (Eigen::Index i = 0; i < atom.size(); ++i) atom(i) = normal(rng);
        } while (atom.norm() == 0.0);
        atom.normalize();
        p.w_dec.col(j) = atom.cast<Scalar>();
    }
    p.w_enc = p.w_dec.transpose();
    p.b_enc = Vector<Scalar>::Zero(static_cast<Eigen::Index>(h));
    return p;
}

/// Rescales every decoder column to unit norm (zero columns are left alone).
template <typename Scalar>
void normalize_atoms(SaeParams<Scalar>& p) {
    for (Eigen::Index j = 0; j < p.w_dec.cols(); ++j) {
        const Scalar norm = p.w_dec.col(j).norm();
        if (norm > Scalar(0)) p.w_dec.col(j) /= norm;
    }
}

// Model file "CSAM": magic, version, d, h, k (u32), then W_enc row-major,
// b_enc, W_dec column-major; float32 little-endian.
inline constexpr char kModelMagic[5] = "CSAM";
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::size_t kModelHeaderSize = 20;

std::size_t write_model(const SaeParams<float>& params, std::ostream& out);
SaeParams<float> read_model(std::istream& in);
void save_model(const SaeParams<float>& params, const std::filesystem::path& path);
SaeParams<float> load_model(const std::filesystem::path& path);

}  // namespace compressae
