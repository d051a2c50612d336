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
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace compressae {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N x d dense embeddings, row-major float32. Rows must be finite.
struct DenseCorpus {
    RowMatrixXf data;

    std::size_t n_items() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }
    auto row(std::size_t i) const { return data.row(static_cast<Eigen::Index>(i)); }
};

/// Corpus file header ("CSED"): magic, version, dtype, n_items, dim.
struct CorpusHeader {
    static constexpr char kMagic[5] = "CSED";
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::uint32_t kFloat32 = 0;
    static constexpr std::size_t kSize = 24;

    std::uint32_t version = kVersion;
    std::uint32_t dtype = kFloat32;
    std::uint64_t n_items = 0;
    std::uint32_t dim = 0;

    std::uint64_t payload_bytes() const { return n_items * dim * sizeof(float); }
};

/// Throws InvalidArgument on empty dims or non-finite entries.
void validate_corpus(const DenseCorpus& corpus);

std::size_t write_corpus(const DenseCorpus& corpus, std::ostream& out);
DenseCorpus read_corpus(std::istream& in);

void save_corpus(const DenseCorpus& corpus, const std::filesystem::path& path);
DenseCorpus load_corpus(const std::filesystem::path& path);

CorpusHeader read_corpus_header(std::istream& in);

/// Sequential reader over a corpus file; holds at most one block of rows.
class CorpusReader {
public:
    explicit CorpusReader(const std::filesystem::path& path);

    const CorpusHeader& header() const { return header_; }
    std::size_t rows_remaining() const { return header_.n_items - rows_read_; }

    /// Reads up to `max_rows` rows; returns an empty matrix at end of file.
    RowMatrixXf read_rows(std::size_t max_rows);

private:
    std::ifstream in_;
    CorpusHeader header_;
    std::uint64_t rows_read_ = 0;
};

/// Yields B x d batches over the first `limit` rows of a corpus, epoch after
/// epoch. With a seed each epoch is a fresh Fisher-Yates permutation; without
/// one rows come in storage order.
class BatchStream {
public:
    BatchStream(const DenseCorpus& corpus, std::size_t batch_size,
                std::optional<std::uint64_t> shuffle_seed = std::nullopt,
                std::optional<std::size_t> limit = std::nullopt);

    /// Row ids of the next batch. The last batch of an epoch may be short.
    const std::vector<std::size_t>& next_ids();
    RowMatrixXf next();

    /// Zero-based epoch of the most recent batch.
    std::size_t epoch() const { return epoch_; }
    std::size_t batches_per_epoch() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

private:
    void start_epoch();

    const DenseCorpus* corpus_;
    std::size_t batch_size_;
    std::optional<std::mt19937_64> rng_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> current_;
    std::size_t cursor_ = 0;
    std::size_t epoch_ = 0;
};

/// One epoch of batches, sizes in order.
std::vector<RowMatrixXf> stream_batches(const DenseCorpus& corpus, std::size_t batch_size,
                                        std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// Unit rows scattered around `n_clusters` random unit centers. Each row is
/// normalize(center + perturbation * g / sqrt(d)) with g standard normal, so
/// `perturbation` is roughly the norm of the offset.
DenseCorpus generate_synthetic(std::size_t n, std::size_t d, std::size_t n_clusters,
                               std::uint64_t seed, double perturbation = 0.3);

}  // namespace compressae
