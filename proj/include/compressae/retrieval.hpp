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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compressae/sae.hpp"
#include "compressae/sparse_index.hpp"

namespace compressae {

struct SearchHit {
    std::size_t item_id = 0;
    float score = 0;

    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// Hits ordered by descending score, then ascending item id.
struct SearchResult {
    std::vector<SearchHit> entries;

    std::size_t size() const { return entries.size(); }
    std::vector<std::size_t> ids() const;
    friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

/// Bounded selection of the n best (score, id) pairs of a full scan.
class TopN {
public:
    explicit TopN(std::size_t n) : n_(n) { heap_.reserve(n + 1); }

    void push(std::size_t id, float score);
    /// Drains the selection into ranked order.
    SearchResult take();

private:
    std::size_t n_;
    std::vector<SearchHit> heap_;
};

/// Gram matrix of the decoder atoms, K = W_dec^T W_dec.
struct KernelMatrix {
    Eigen::MatrixXf data;

    std::size_t dim_latent() const { return static_cast<std::size_t>(data.rows()); }
};

KernelMatrix kernel_from_params(const SaeParams<float>& params);

/// a^T K b from the nnz_a x nnz_b gathered entries of K. Adds the number of
/// K reads to `reads` when given.
double kernel_bilinear(const KernelMatrix& kernel, const SparseActivation<float>& a,
                       const SparseActivation<float>& b, std::size_t* reads = nullptr);

/// Cosine between decode(a) and decode(b), computed from the codes and K.
double kernel_similarity(const KernelMatrix& kernel, const SparseActivation<float>& a,
                         const SparseActivation<float>& b, std::size_t* reads = nullptr);

/// Exact top-n by sparse cosine. Zero-norm rows are skipped.
SearchResult search_sparse(const SparseIndex& index, const SparseActivation<float>& query, std::size_t n);

/// An index with a kernel attached: caches s^T K s for every row.
class ReconstructedIndex {
public:
    ReconstructedIndex(const SparseIndex& index, KernelMatrix kernel);

    const SparseIndex& index() const { return *index_; }
    const KernelMatrix& kernel() const { return kernel_; }
    std::span<const double> quadratic_forms() const { return quad_; }

private:
    const SparseIndex* index_;
    KernelMatrix kernel_;
    std::vector<double> quad_;
};

/// Exact top-n by reconstructed-space cosine. Rows with a vanishing quadratic
/// form are skipped.
SearchResult search_reconstructed(const ReconstructedIndex& index, const SparseActivation<float>& query,
                                  std::size_t n);

enum class SearchMode { sparse, reconstructed };

const char* to_string(SearchMode mode);
SearchMode parse_search_mode(const std::string& text);

/// Independent per-query searches, results in input order. `reconstructed`
/// must be non-null for SearchMode::reconstructed. Failures are rethrown with
/// the query position prepended.
std::vector<SearchResult> batch_search(const SparseIndex& index, const ReconstructedIndex* reconstructed,
                                       std::span<const SparseActivation<float>> queries, std::size_t n,
                                       SearchMode mode, std::size_t threads = 1);

}  // namespace compressae
