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
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "compressae/sae.hpp"

namespace compressae {

/// One CSR row. `norm` is the cached l2 norm of `values`.
struct SparseRowView {
    std::span<const std::uint32_t> indices;
    std::span<const float> values;
    float norm = 0;

    std::size_t nnz() const { return indices.size(); }
};

SparseRowView make_row_view(const SparseActivation<float>& s);

/// N x h CSR matrix of compressed embeddings.
class SparseIndex {
public:
    static constexpr char kMagic[5] = "CSAX";
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::size_t kHeaderSize = 28;

    SparseIndex() : indptr_{0} {}
    explicit SparseIndex(std::size_t dim_latent) : dim_latent_(dim_latent), indptr_{0} {}

    /// Takes ownership of raw CSR arrays; throws FormatError if they are invalid.
    SparseIndex(std::size_t dim_latent, std::vector<std::uint64_t> indptr,
                std::vector<std::uint32_t> indices, std::vector<float> values);

    /// Appends one row; indices must be strictly increasing and < h.
    void push_back(const SparseActivation<float>& row);

    std::size_t n_items() const { return indptr_.size() - 1; }
    std::size_t dim_latent() const { return dim_latent_; }
    std::size_t nnz() const { return indices_.size(); }

    SparseRowView row(std::size_t i) const;
    SparseActivation<float> activation(std::size_t i) const;

    std::span<const std::uint64_t> indptr() const { return indptr_; }
    std::span<const std::uint32_t> indices() const { return indices_; }
    std::span<const float> values() const { return values_; }
    std::span<const float> row_norms() const { return row_norms_; }

    /// Exact size of the serialized form.
    std::uint64_t serialized_bytes() const {
        return kHeaderSize + 8 * indptr_.size() + 4 * indices_.size() + 4 * values_.size();
    }

    friend bool operator==(const SparseIndex& a, const SparseIndex& b) {
        return a.dim_latent_ == b.dim_latent_ && a.indptr_ == b.indptr_ && a.indices_ == b.indices_ &&
               a.values_ == b.values_;
    }

private:
    void validate() const;
    void compute_norms();

    std::size_t dim_latent_ = 0;
    std::vector<std::uint64_t> indptr_;
    std::vector<std::uint32_t> indices_;
    std::vector<float> values_;
    std::vector<float> row_norms_;
};

SparseIndex from_activations(std::span<const SparseActivation<float>> rows, std::size_t h);

/// Merge of two sorted rows, accumulated in ascending index order (double).
double sparse_dot(const SparseRowView& a, const SparseRowView& b);

/// sparse_dot over the cached norms. Throws DegenerateInputError on a zero row.
double sparse_cosine(const SparseRowView& a, const SparseRowView& b);

struct StorageStats {
    std::uint64_t n_items = 0;
    std::uint64_t nnz = 0;
    std::uint64_t bytes_values = 0;
    std::uint64_t bytes_indices = 0;
    // Full file size, including header and row offsets.
    std::uint64_t bytes_total = 0;
    std::uint64_t dense_bytes_equivalent = 0;
    // dense_bytes_equivalent / (bytes_values + bytes_indices)
    double compression_ratio = 0;
};

StorageStats storage_stats(const SparseIndex& index, std::size_t dense_dim);

std::size_t write_index(const SparseIndex& index, std::ostream& out);
SparseIndex read_index(std::istream& in);
void save_index(const SparseIndex& index, const std::filesystem::path& path);
SparseIndex load_index(const std::filesystem::path& path);

}  // namespace compressae
