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

#include "compressae/compression.hpp"

#include <chrono>
#include <string>

#include "compressae/errors.hpp"
#include "compressae/parallel.hpp"

namespace compressae {

namespace {

// Encodes one block of rows into `index`, in row order.
void encode_block(const SaeParams<float>& params, const RowMatrixXf& block, std::size_t first_row,
                  SparseIndex& index, std::vector<std::size_t>& zero_rows, std::size_t threads) {
    const auto rows = static_cast<std::size_t>(block.rows());
    std::vector<SparseActivation<float>> codes(rows);
    parallel_for(rows, threads, [&](std::size_t r) {
        const auto x = block.row(static_cast<Eigen::Index>(r)).transpose();
        if (x.squaredNorm() == 0.0f) {
            codes[r].dim_latent = params.dim_latent;
        } else {
            codes[r] = encode(params, x);
        }
    });
    for (std::size_t r = 0; r < rows; ++r) {
        if (codes[r].nnz() == 0 && block.row(static_cast<Eigen::Index>(r)).squaredNorm() == 0.0f) {
            zero_rows.push_back(first_row + r);
        }
        index.push_back(codes[r]);
    }
}

void check_dim(const SaeParams<float>& params, std::size_t corpus_dim) {
    if (corpus_dim != params.dim_in) {
        throw DimensionMismatch("corpus has d=" + std::to_string(corpus_dim) + " but model has d=" +
                                std::to_string(params.dim_in));
    }
}

void finish(CompressionReport& report, const SparseIndex& index, std::size_t d,
            std::chrono::steady_clock::time_point started) {
    report.n_items = index.n_items();
    report.storage = storage_stats(index, d);
    report.bytes_out = index.serialized_bytes();
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.items_per_second = report.seconds > 0 ? static_cast<double>(report.n_items) / report.seconds : 0.0;
}

}  // namespace

SparseIndex compress_corpus(const SaeParams<float>& params, const DenseCorpus& corpus, std::size_t batch_size,
                            CompressionReport* report, std::size_t threads) {
    if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
    check_dim(params, corpus.dim());
    const auto started = std::chrono::steady_clock::now();
    threads = resolve_threads(threads);
    SparseIndex index(params.dim_latent);
    CompressionReport local;
    for (std::size_t begin = 0; begin < corpus.n_items(); begin += batch_size) {
        const std::size_t rows = std::min(batch_size, corpus.n_items() - begin);
        const RowMatrixXf block =
            corpus.data.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(rows));
        encode_block(params, block, begin, index, local.zero_rows, threads);
    }
    local.bytes_in = CorpusHeader::kSize + corpus.n_items() * corpus.dim() * sizeof(float);
    finish(local, index, corpus.dim(), started);
    if (report) *report = std::move(local);
    return index;
}

CompressionReport compress_file(const SaeParams<float>& params, const std::filesystem::path& corpus_path,
                                const std::filesystem::path& index_path, std::size_t batch_size,
                                std::size_t threads) {
    if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
    const auto started = std::chrono::steady_clock::now();
    threads = resolve_threads(threads);
    CorpusReader reader(corpus_path);
    check_dim(params, reader.header().dim);

    CompressionReport report;
    SparseIndex index(params.dim_latent);
    std::size_t row = 0;
    while (reader.rows_remaining() > 0) {
        const RowMatrixXf block = reader.read_rows(batch_size);
        encode_block(params, block, row, index, report.zero_rows, threads);
        row += static_cast<std::size_t>(block.rows());
    }
    save_index(index, index_path);
    report.bytes_in = CorpusHeader::kSize + reader.header().payload_bytes();
    finish(report, index, reader.header().dim, started);
    return report;
}

}  // namespace compressae
