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

#include "compressae/corpus.hpp"

#include <cmath>
#include <numeric>
#include <span>
#include <string>

#include "compressae/binary_io.hpp"
#include "compressae/errors.hpp"

namespace compressae {

namespace {

void write_header(std::ostream& out, const CorpusHeader& h) {
    binary::write_magic(out, CorpusHeader::kMagic);
    binary::write_scalar<std::uint32_t>(out, h.version);
    binary::write_scalar<std::uint32_t>(out, h.dtype);
    binary::write_scalar<std::uint64_t>(out, h.n_items);
    binary::write_scalar<std::uint32_t>(out, h.dim);
}

void check_finite(std::span<const float> values, std::uint64_t first_row, std::size_t dim) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw FormatError("non-finite value at row " + std::to_string(first_row + i / dim) +
                              ", column " + std::to_string(i % dim));
        }
    }
}

}  // namespace

void validate_corpus(const DenseCorpus& corpus) {
    if (corpus.n_items() == 0 || corpus.dim() == 0) throw InvalidArgument("corpus must be non-empty");
    if (!corpus.data.allFinite()) throw InvalidArgument("corpus contains non-finite entries");
}

std::size_t write_corpus(const DenseCorpus& corpus, std::ostream& out) {
    validate_corpus(corpus);
    CorpusHeader header;
    header.n_items = corpus.n_items();
    header.dim = static_cast<std::uint32_t>(corpus.dim());
    write_header(out, header);
    binary::write_array<float>(out, std::span<const float>(corpus.data.data(), corpus.data.size()));
    return CorpusHeader::kSize + header.payload_bytes();
}

CorpusHeader read_corpus_header(std::istream& in) {
    binary::expect_magic(in, CorpusHeader::kMagic);
    CorpusHeader h;
    h.version = binary::read_scalar<std::uint32_t>(in, "version");
    if (h.version != CorpusHeader::kVersion) {
        throw FormatError("unsupported corpus version " + std::to_string(h.version));
    }
    h.dtype = binary::read_scalar<std::uint32_t>(in, "dtype");
    if (h.dtype != CorpusHeader::kFloat32) throw FormatError("unsupported dtype " + std::to_string(h.dtype));
    h.n_items = binary::read_scalar<std::uint64_t>(in, "n_items");
    h.dim = binary::read_scalar<std::uint32_t>(in, "dim");
    if (h.n_items == 0 || h.dim == 0) throw FormatError("corpus header declares an empty corpus");
    return h;
}

DenseCorpus read_corpus(std::istream& in) {
    const CorpusHeader h = read_corpus_header(in);
    DenseCorpus corpus;
    corpus.data.resize(static_cast<Eigen::Index>(h.n_items), static_cast<Eigen::Index>(h.dim));
    std::span<float> payload(corpus.data.data(), static_cast<std::size_t>(corpus.data.size()));
    binary::read_array<float>(in, payload, "corpus payload");
    check_finite(payload, 0, h.dim);
    return corpus;
}

void save_corpus(const DenseCorpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_corpus(corpus, out);
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

DenseCorpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_corpus(in);
}

CorpusReader::CorpusReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
    header_ = read_corpus_header(in_);
}

RowMatrixXf CorpusReader::read_rows(std::size_t max_rows) {
    const std::size_t rows = std::min<std::uint64_t>(max_rows, rows_remaining());
    RowMatrixXf block(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(header_.dim));
    std::span<float> payload(block.data(), static_cast<std::size_t>(block.size()));
    binary::read_array<float>(in_, payload, "corpus payload");
    check_finite(payload, rows_read_, header_.dim);
    rows_read_ += rows;
    return block;
}

BatchStream::BatchStream(const DenseCorpus& corpus, std::size_t batch_size,
                         std::optional<std::uint64_t> shuffle_seed, std::optional<std::size_t> limit)
    : corpus_(&corpus), batch_size_(batch_size) {
    if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
    const std::size_t n = std::min(limit.value_or(corpus.n_items()), corpus.n_items());
    if (n == 0) throw InvalidArgument("no rows to stream");
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (shuffle_seed) rng_.emplace(*shuffle_seed);
    start_epoch();
    epoch_ = 0;
}

void BatchStream::start_epoch() {
    if (rng_) {
        // Fisher-Yates
        for (std::size_t i = order_.size() - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order_[i], order_[pick(*rng_)]);
        }
    }
    cursor_ = 0;
    ++epoch_;
}

const std::vector<std::size_t>& BatchStream::next_ids() {
    if (cursor_ == order_.size()) start_epoch();
    const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
    current_.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                    order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return current_;
}

RowMatrixXf BatchStream::next() {
    const auto& ids = next_ids();
    RowMatrixXf batch(static_cast<Eigen::Index>(ids.size()), corpus_->data.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        batch.row(static_cast<Eigen::Index>(r)) = corpus_->row(ids[r]);
    }
    return batch;
}

std::vector<RowMatrixXf> stream_batches(const DenseCorpus& corpus, std::size_t batch_size,
                                        std::optional<std::uint64_t> shuffle_seed) {
    BatchStream stream(corpus, batch_size, shuffle_seed);
    std::vector<RowMatrixXf> batches;
    const std::size_t count = stream.batches_per_epoch();
    batches.reserve(count);
    for (std::size_t b = 0; b < count; ++b) batches.push_back(stream.next());
    return batches;
}

DenseCorpus generate_synthetic(std::size_t n, std::size_t d, std::size_t n_clusters, std::uint64_t seed,
                               double perturbation) {
    if (n == 0 || d == 0) throw InvalidArgument("n and d must be positive");
    if (n_clusters == 0 || n_clusters > n) throw InvalidArgument("need 1 <= n_clusters <= n");
    if (!(perturbation >= 0)) throw InvalidArgument("perturbation must be non-negative");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto dim = static_cast<Eigen::Index>(d);

    auto unit_gaussian = [&] {
        Eigen::VectorXd v(dim);
        do {
            for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
        } while (v.norm() == 0.0);
        return Eigen::VectorXd(v.normalized());
    };

    std::vector<Eigen::VectorXd> centers;
    centers.reserve(n_clusters);
    for (std::size_t c = 0; c < n_clusters; ++c) centers.push_back(unit_gaussian());

    std::uniform_int_distribution<std::size_t> pick_cluster(0, n_clusters - 1);
    const double sigma = perturbation / std::sqrt(static_cast<double>(d));
    DenseCorpus corpus;
    corpus.data.resize(static_cast<Eigen::Index>(n), dim);
    Eigen::VectorXd row(dim);
    for (std::size_t i = 0; i < n; ++i) {
        // The first n_clusters rows cover every cluster once.
        const std::size_t c = i < n_clusters ? i : pick_cluster(rng);
        do {
            for (Eigen::Index j = 0; j < dim; ++j) row(j) = centers[c](j) + sigma * normal(rng);
        } while (row.norm() == 0.0);
        corpus.data.row(static_cast<Eigen::Index>(i)) = row.normalized().cast<float>().transpose();
    }
    return corpus;
}

}  // namespace compressae
