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

#include "compressae/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "compressae/errors.hpp"
#include "compressae/parallel.hpp"

namespace compressae {

namespace {

bool better(const SearchHit& a, const SearchHit& b) {
    return a.score != b.score ? a.score > b.score : a.item_id < b.item_id;
}

void check_query(const SparseActivation<float>& query, std::size_t h) {
    if (query.dim_latent != h) {
        throw DimensionMismatch("query has h=" + std::to_string(query.dim_latent) + ", index has h=" +
                                std::to_string(h));
    }
}

}  // namespace

std::vector<std::size_t> SearchResult::ids() const {
    std::vector<std::size_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.item_id);
    return out;
}

void TopN::push(std::size_t id, float score) {
    if (n_ == 0) return;
    const SearchHit hit{id, score};
    if (heap_.size() < n_) {
        heap_.push_back(hit);
        std::push_heap(heap_.begin(), heap_.end(), better);
    } else if (better(hit, heap_.front())) {
        std::pop_heap(heap_.begin(), heap_.end(), better);
        heap_.back() = hit;
        std::push_heap(heap_.begin(), heap_.end(), better);
    }
}

SearchResult TopN::take() {
    std::sort_heap(heap_.begin(), heap_.end(), better);
    SearchResult result{std::move(heap_)};
    heap_.clear();
    return result;
}

KernelMatrix kernel_from_params(const SaeParams<float>& params) {
    KernelMatrix k;
    k.data.noalias() = params.w_dec.transpose() * params.w_dec;
    // Exact symmetry regardless of how the product was blocked.
    k.data = (0.5f * (k.data + k.data.transpose())).eval();
    return k;
}

double kernel_bilinear(const KernelMatrix& kernel, const SparseActivation<float>& a,
                       const SparseActivation<float>& b, std::size_t* reads) {
    const std::size_t h = kernel.dim_latent();
    if (a.dim_latent != h || b.dim_latent != h) throw DimensionMismatch("activation and kernel disagree on h");
    double sum = 0;
    for (std::size_t i = 0; i < a.indices.size(); ++i) {
        double row = 0;
        for (std::size_t j = 0; j < b.indices.size(); ++j) {
            row += static_cast<double>(kernel.data(a.indices[i], b.indices[j])) * b.values[j];
        }
        sum += a.values[i] * row;
    }
    if (reads) *reads += a.indices.size() * b.indices.size();
    return sum;
}

double kernel_similarity(const KernelMatrix& kernel, const SparseActivation<float>& a,
                         const SparseActivation<float>& b, std::size_t* reads) {
    const double aa = kernel_bilinear(kernel, a, a, reads);
    const double bb = kernel_bilinear(kernel, b, b, reads);
    if (!(aa > 0) || !(bb > 0)) throw DegenerateInputError("reconstruction has a zero quadratic form");
    return kernel_bilinear(kernel, a, b, reads) / std::sqrt(aa * bb);
}

SearchResult search_sparse(const SparseIndex& index, const SparseActivation<float>& query, std::size_t n) {
    check_query(query, index.dim_latent());
    const SparseRowView q = make_row_view(query);
    if (!(q.norm > 0)) throw DegenerateInputError("zero-norm query");
    TopN top(n);
    for (std::size_t i = 0; i < index.n_items(); ++i) {
        const SparseRowView row = index.row(i);
        if (!(row.norm > 0)) continue;
        top.push(i, static_cast<float>(sparse_dot(q, row) / (static_cast<double>(q.norm) * row.norm)));
    }
    return top.take();
}

ReconstructedIndex::ReconstructedIndex(const SparseIndex& index, KernelMatrix kernel)
    : index_(&index), kernel_(std::move(kernel)) {
    if (kernel_.dim_latent() != index.dim_latent()) {
        throw DimensionMismatch("kernel has h=" + std::to_string(kernel_.dim_latent()) + ", index has h=" +
                                std::to_string(index.dim_latent()));
    }
    quad_.resize(index.n_items());
    for (std::size_t i = 0; i < index.n_items(); ++i) {
        const SparseRowView row = index.row(i);
        double sum = 0;
        for (std::size_t a = 0; a < row.nnz(); ++a) {
            double inner = 0;
            for (std::size_t b = 0; b < row.nnz(); ++b) {
                inner += static_cast<double>(kernel_.data(row.indices[a], row.indices[b])) * row.values[b];
            }
            sum += row.values[a] * inner;
        }
        quad_[i] = sum;
    }
}

SearchResult search_reconstructed(const ReconstructedIndex& rindex, const SparseActivation<float>& query,
                                  std::size_t n) {
    const SparseIndex& index = rindex.index();
    const KernelMatrix& kernel = rindex.kernel();
    check_query(query, index.dim_latent());

    // K s_q, so each row costs one sparse gather instead of nnz^2 kernel reads.
    Eigen::VectorXd projected = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index.dim_latent()));
    for (std::size_t j = 0; j < query.indices.size(); ++j) {
        projected += static_cast<double>(query.values[j]) * kernel.data.col(query.indices[j]).cast<double>();
    }
    double qq = 0;
    for (std::size_t j = 0; j < query.indices.size(); ++j) qq += query.values[j] * projected(query.indices[j]);
    if (!(qq > 0)) throw DegenerateInputError("query reconstruction has a zero quadratic form");

    const auto quad = rindex.quadratic_forms();
    TopN top(n);
    for (std::size_t i = 0; i < index.n_items(); ++i) {
        if (!(quad[i] > 0)) continue;
        const SparseRowView row = index.row(i);
        double dot = 0;
        for (std::size_t t = 0; t < row.nnz(); ++t) dot += row.values[t] * projected(row.indices[t]);
        top.push(i, static_cast<float>(dot / std::sqrt(qq * quad[i])));
    }
    return top.take();
}

const char* to_string(SearchMode mode) {
    return mode == SearchMode::sparse ? "sparse" : "reconstructed";
}

SearchMode parse_search_mode(const std::string& text) {
    if (text == "sparse") return SearchMode::sparse;
    if (text == "reconstructed") return SearchMode::reconstructed;
    throw InvalidArgument("unknown search mode '" + text + "' (expected sparse or reconstructed)");
}

std::vector<SearchResult> batch_search(const SparseIndex& index, const ReconstructedIndex* reconstructed,
                                       std::span<const SparseActivation<float>> queries, std::size_t n,
                                       SearchMode mode, std::size_t threads) {
    if (mode == SearchMode::reconstructed && reconstructed == nullptr) {
        throw InvalidArgument("reconstructed search needs a kernel built from the decoder weights");
    }
    std::vector<SearchResult> results(queries.size());
    parallel_for(queries.size(), resolve_threads(threads), [&](std::size_t q) {
        const std::string where = "query " + std::to_string(q) + ": ";
        try {
            results[q] = mode == SearchMode::sparse ? search_sparse(index, queries[q], n)
                                                    : search_reconstructed(*reconstructed, queries[q], n);
        } catch (const DegenerateInputError& e) {
            throw DegenerateInputError(where + e.what(), q);
        } catch (const DimensionMismatch& e) {
            throw DimensionMismatch(where + e.what());
        }
    });
    return results;
}

}  // namespace compressae
