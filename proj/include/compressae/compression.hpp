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
#include <filesystem>
#include <vector>

#include "compressae/corpus.hpp"
#include "compressae/sae.hpp"
#include "compressae/sparse_index.hpp"

namespace compressae {

struct CompressionReport {
    std::size_t n_items = 0;
    // Rows with zero norm, emitted as empty sparse rows.
    std::vector<std::size_t> zero_rows;
    std::uint64_t bytes_in = 0;
    std::uint64_t bytes_out = 0;
    double seconds = 0;
    double items_per_second = 0;
    StorageStats storage;
};

/// Encodes every row of `corpus`. Row i of the result is encode(params, row i).
SparseIndex compress_corpus(const SaeParams<float>& params, const DenseCorpus& corpus, std::size_t batch_size,
                            CompressionReport* report = nullptr, std::size_t threads = 1);

/// Streams a corpus file through the encoder one batch at a time and writes
/// the index file.
CompressionReport compress_file(const SaeParams<float>& params, const std::filesystem::path& corpus_path,
                                const std::filesystem::path& index_path, std::size_t batch_size,
                                std::size_t threads = 1);

}  // namespace compressae
