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
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "compressae/corpus.hpp"
#include "compressae/retrieval.hpp"
#include "compressae/sae.hpp"
#include "compressae/sparse_index.hpp"

namespace compressae {

/// Exact top-n dense cosine neighbours of corpus row `query`, excluding the
/// row itself. Zero-norm candidates are skipped; a zero query throws.
SearchResult dense_search(const DenseCorpus& corpus, std::span<const float> row_norms,
                          std::size_t query, std::size_t n);

std::vector<float> dense_row_norms(const DenseCorpus& corpus);

/// Ground-truth lists for each query row.
std::vector<SearchResult> dense_ground_truth(const DenseCorpus& corpus, std::span<const std::size_t> queries,
                                             std::size_t n, std::size_t threads = 1);

/// |truth & retrieved| / n. Both lists must have the same length.
double recall_overlap(std::span<const std::size_t> truth, std::span<const std::size_t> retrieved);

struct TruncationBaseline {
    DenseCorpus corpus;
    // Rows whose first r coordinates are all zero.
    std::vector<std::size_t> zero_rows;
};

/// First r coordinates of each row, renormalised.
TruncationBaseline truncation_baseline(const DenseCorpus& corpus, std::size_t r);

struct PcaBaseline {
    // r x d, orthonormal rows.
    Eigen::MatrixXf projection;
    Eigen::VectorXf mean;
    DenseCorpus corpus;
    std::size_t requested_rank = 0;
    std::vector<std::size_t> zero_rows;
};

/// Top principal directions of the centred corpus. Dimensions up to 2048 are
/// decomposed exactly; larger ones use seeded subspace iteration. When fewer
/// than r directions carry variance the rank is reduced.
PcaBaseline pca_baseline(const DenseCorpus& corpus, std::size_t r, std::uint64_t seed = 0);

struct BaselineResult {
    std::string name;
    std::size_t dims = 0;
    std::uint64_t bytes_per_row = 0;
    std::map<std::size_t, double> recall_at_n;
    double mean_reconstruction_cosine = 0;
};

struct EvalReport {
    std::map<SearchMode, std::map<std::size_t, double>> recall_at_n;
    double mean_reconstruction_cosine = 0;
    StorageStats storage;
    std::size_t n_queries = 0;
    std::size_t dim_latent = 0;
    std::vector<BaselineResult> baselines;
};

struct EvalOptions {
    std::vector<std::size_t> n_values{10};
    bool truncation = false;
    bool pca = false;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Mean recall against dense ground truth for each n and each available mode
/// (reconstructed only when a kernel is given), plus optional equal-budget
/// baselines with r = 2k dims.
EvalReport evaluate(const DenseCorpus& corpus, const SaeParams<float>& params, const SparseIndex& index,
                    const KernelMatrix* kernel, std::span<const std::size_t> queries,
                    const EvalOptions& options);

/// `count` distinct row ids drawn with a seeded shuffle, sorted.
std::vector<std::size_t> sample_queries(std::size_t n_items, std::size_t count, std::uint64_t seed);

/// Key-value summary and per-n table.
void write_eval_report(const EvalReport& report, std::ostream& out,
                       const std::map<std::string, std::string>& metadata = {});
/// Tab-separated "method mode dims bytes_per_row n recall" rows.
void write_eval_table(const EvalReport& report, std::ostream& out);

}  // namespace compressae
