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

#include "compressae/sparse_index.hpp"

#include <cmath>
#include <limits>
#include <fstream>
#include <string>

#include "compressae/binary_io.hpp"
#include "compressae/errors.hpp"

namespace compressae {

namespace {

float l2_norm(std::span<const float> values) {
    double sum = 0;
    for (const float v : values) sum += static_cast<double>(v) * v;
    return static_cast<float>(std::sqrt(sum));
}

}  // namespace

SparseRowView make_row_view(const SparseActivation<float>& s) {
    return {s.indices, s.values, l2_norm(s.values)};
}

SparseIndex::SparseIndex(std::size_t dim_latent, std::vector<std::uint64_t> indptr,
                         std::vector<std::uint32_t> indices, std::vector<float> values)
    : dim_latent_(dim_latent), indptr_(std::move(indptr)), indices_(std::move(indices)), values_(std::move(values)) {
    validate();
    compute_norms();
}

void SparseIndex::validate() const {
    if (indptr_.empty() || indptr_.front() != 0) throw FormatError("indptr must start at 0");
    if (indptr_.back() != indices_.size() || indices_.size() != values_.size()) {
        throw FormatError("indptr end, indices and values disagree on nnz");
    }
    for (std::size_t i = 0; i + 1 < indptr_.size(); ++i) {
        if (indptr_[i + 1] < indptr_[i]) throw FormatError("indptr decreases at row " + std::to_string(i));
        for (std::uint64_t p = indptr_[i]; p < indptr_[i + 1]; ++p) {
            if (indices_[p] >= dim_latent_) {
                throw FormatError("row " + std::to_string(i) + " has index " + std::to_string(indices_[p]) +
                                  " >= h=" + std::to_string(dim_latent_));
            }
            if (p > indptr_[i] && indices_[p] <= indices_[p - 1]) {
                throw FormatError("row " + std::to_string(i) + " indices are not strictly increasing");
            }
            if (!std::isfinite(values_[p])) throw FormatError("row " + std::to_string(i) + " has a non-finite value");
        }
    }
}

void SparseIndex::compute_norms() {
    row_norms_.resize(n_items());
    for (std::size_t i = 0; i < n_items(); ++i) {
        row_norms_[i] = l2_norm(std::span<const float>(values_).subspan(indptr_[i], indptr_[i + 1] - indptr_[i]));
    }
}

void SparseIndex::push_back(const SparseActivation<float>& row) {
    if (row.dim_latent != dim_latent_) {
        throw DimensionMismatch("activation has h=" + std::to_string(row.dim_latent) + ", index has h=" +
                                std::to_string(dim_latent_));
    }
    if (row.indices.size() != row.values.size()) throw InvalidArgument("indices and values differ in length");
    for (std::size_t j = 0; j < row.indices.size(); ++j) {
        if (row.indices[j] >= dim_latent_ || (j > 0 && row.indices[j] <= row.indices[j - 1])) {
            throw InvalidArgument("activation indices must be strictly increasing and < h");
        }
        if (!std::isfinite(row.values[j])) throw InvalidArgument("activation has a non-finite value");
    }
    indices_.insert(indices_.end(), row.indices.begin(), row.indices.end());
    values_.insert(values_.end(), row.values.begin(), row.values.end());
    indptr_.push_back(indices_.size());
    row_norms_.push_back(l2_norm(row.values));
}

SparseRowView SparseIndex::row(std::size_t i) const {
    const std::size_t begin = indptr_[i];
    const std::size_t len = indptr_[i + 1] - begin;
    return {std::span<const std::uint32_t>(indices_).subspan(begin, len),
            std::span<const float>(values_).subspan(begin, len), row_norms_[i]};
}

SparseActivation<float> SparseIndex::activation(std::size_t i) const {
    const SparseRowView view = row(i);
    return {{view.indices.begin(), view.indices.end()}, {view.values.begin(), view.values.end()}, dim_latent_};
}

SparseIndex from_activations(std::span<const SparseActivation<float>> rows, std::size_t h) {
    SparseIndex index(h);
    for (const auto& row : rows) index.push_back(row);
    return index;
}

double sparse_dot(const SparseRowView& a, const SparseRowView& b) {
    double sum = 0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] < b.indices[j]) {
            ++i;
        } else if (b.indices[j] < a.indices[i]) {
            ++j;
        } else {
            sum += static_cast<double>(a.values[i]) * b.values[j];
            ++i;
            ++j;
        }
    }
    return sum;
}

double sparse_cosine(const SparseRowView& a, const SparseRowView& b) {
    if (!(a.norm > 0) || !(b.norm > 0)) throw DegenerateInputError("sparse cosine of a zero-norm row");
    return sparse_dot(a, b) / (static_cast<double>(a.norm) * b.norm);
}

StorageStats storage_stats(const SparseIndex& index, std::size_t dense_dim) {
    StorageStats s;
    s.n_items = index.n_items();
    s.nnz = index.nnz();
    s.bytes_values = 4 * s.nnz;
    s.bytes_indices = 4 * s.nnz;
    s.bytes_total = index.serialized_bytes();
    s.dense_bytes_equivalent = s.n_items * dense_dim * 4;
    const std::uint64_t sparse = s.bytes_values + s.bytes_indices;
    s.compression_ratio = sparse > 0 ? static_cast<double>(s.dense_bytes_equivalent) / static_cast<double>(sparse)
                                     : std::numeric_limits<double>::infinity();
    return s;
}

std::size_t write_index(const SparseIndex& index, std::ostream& out) {
    binary::write_magic(out, SparseIndex::kMagic);
    binary::write_scalar<std::uint32_t>(out, SparseIndex::kVersion);
    binary::write_scalar<std::uint64_t>(out, index.n_items());
    binary::write_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(index.dim_latent()));
    binary::write_scalar<std::uint64_t>(out, index.nnz());
    binary::write_array(out, index.indptr());
    binary::write_array(out, index.indices());
    binary::write_array(out, index.values());
    return index.serialized_bytes();
}

SparseIndex read_index(std::istream& in) {
    binary::expect_magic(in, SparseIndex::kMagic);
    const auto version = binary::read_scalar<std::uint32_t>(in, "version");
    if (version != SparseIndex::kVersion) throw FormatError("unsupported index version " + std::to_string(version));
    const auto n = binary::read_scalar<std::uint64_t>(in, "n_items");
    const auto h = binary::read_scalar<std::uint32_t>(in, "dim_latent");
    const auto nnz = binary::read_scalar<std::uint64_t>(in, "nnz");
    std::vector<std::uint64_t> indptr(n + 1);
    std::vector<std::uint32_t> indices(nnz);
    std::vector<float> values(nnz);
    binary::read_array<std::uint64_t>(in, indptr, "indptr");
    binary::read_array<std::uint32_t>(in, indices, "indices");
    binary::read_array<float>(in, values, "values");
    return SparseIndex(h, std::move(indptr), std::move(indices), std::move(values));
}

void save_index(const SparseIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_index(index, out);
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

SparseIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_index(in);
}

}  // namespace compressae
