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

#include "compressae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <unordered_set>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "compressae/errors.hpp"
#include "compressae/parallel.hpp"
#include "compressae/training.hpp"

namespace compressae {

namespace {

// |T_n & R_n| / |T_n| over the first n entries of each list.
double overlap_at(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& retrieved, std::size_t n) {
    const std::size_t nt = std::min(n, truth.size());
    if (nt == 0) return 1.0;
    const std::size_t nr = std::min(n, retrieved.size());
    std::unordered_set<std::size_t> wanted(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(nt));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < nr; ++i) hits += wanted.count(retrieved[i]);
    return static_cast<double>(hits) / static_cast<double>(nt);
}

std::vector<std::size_t> drop_self(const SearchResult& result, std::size_t self, std::size_t n) {
    std::vector<std::size_t> ids;
    ids.reserve(n);
    for (const auto& hit : result.entries) {
        if (hit.item_id == self) continue;
        if (ids.size() == n) break;
        ids.push_back(hit.item_id);
    }
    return ids;
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double sum = 0;
    for (const double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

// Mean recall per n of `retrieve(query position)` against `truth`.
template <typename Retrieve>
std::map<std::size_t, double> recall_table(const std::vector<SearchResult>& truth, std::span<const std::size_t> n_values,
                                           std::size_t threads, Retrieve&& retrieve) {
    std::vector<std::vector<double>> per_query(truth.size());
    parallel_for(truth.size(), threads, [&](std::size_t q) {
        const std::optional<std::vector<std::size_t>> retrieved = retrieve(q);
        const auto truth_ids = truth[q].ids();
        per_query[q].reserve(n_values.size());
        for (const std::size_t n : n_values) {
            per_query[q].push_back(retrieved ? overlap_at(truth_ids, *retrieved, n) : 0.0);
        }
    });
    std::map<std::size_t, double> table;
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        double sum = 0;
        for (const auto& row : per_query) sum += row[i];
        table[n_values[i]] = truth.empty() ? 0.0 : sum / static_cast<double>(truth.size());
    }
    return table;
}

std::map<std::size_t, double> dense_recall(const DenseCorpus& reduced, const std::vector<SearchResult>& truth,
                                           std::span<const std::size_t> queries, std::span<const std::size_t> n_values,
                                           std::size_t n_max, std::size_t threads) {
    const auto norms = dense_row_norms(reduced);
    return recall_table(truth, n_values, threads, [&](std::size_t q) -> std::optional<std::vector<std::size_t>> {
        if (!(norms[queries[q]] > 0)) return std::nullopt;
        return dense_search(reduced, norms, queries[q], n_max).ids();
    });
}

void flag_and_normalize(DenseCorpus& corpus, std::vector<std::size_t>& zero_rows) {
    for (Eigen::Index i = 0; i < corpus.data.rows(); ++i) {
        const float norm = corpus.data.row(i).norm();
        if (norm > 0) {
            corpus.data.row(i) /= norm;
        } else {
            zero_rows.push_back(static_cast<std::size_t>(i));
        }
    }
}

}  // namespace

std::vector<float> dense_row_norms(const DenseCorpus& corpus) {
    std::vector<float> norms(corpus.n_items());
    for (std::size_t i = 0; i < norms.size(); ++i) norms[i] = corpus.row(i).norm();
    return norms;
}

SearchResult dense_search(const DenseCorpus& corpus, std::span<const float> row_norms, std::size_t query,
                          std::size_t n) {
    if (query >= corpus.n_items()) throw InvalidArgument("query row out of range");
    const float qn = row_norms[query];
    if (!(qn > 0)) throw DegenerateInputError("zero-norm query", query);
    const Eigen::VectorXf dots = corpus.data * corpus.row(query).transpose();
    TopN top(n);
    for (std::size_t i = 0; i < corpus.n_items(); ++i) {
        if (i == query || !(row_norms[i] > 0)) continue;
        top.push(i, dots(static_cast<Eigen::Index>(i)) / (qn * row_norms[i]));
    }
    return top.take();
}

std::vector<SearchResult> dense_ground_truth(const DenseCorpus& corpus, std::span<const std::size_t> queries,
                                             std::size_t n, std::size_t threads) {
    const auto norms = dense_row_norms(corpus);
    std::vector<SearchResult> out(queries.size());
    parallel_for(queries.size(), resolve_threads(threads),
                 [&](std::size_t q) { out[q] = dense_search(corpus, norms, queries[q], n); });
    return out;
}

double recall_overlap(std::span<const std::size_t> truth, std::span<const std::size_t> retrieved) {
    if (truth.size() != retrieved.size()) {
        throw InvalidArgument("recall_overlap needs equal-size lists, got " + std::to_string(truth.size()) + " and " +
                              std::to_string(retrieved.size()));
    }
    if (truth.empty()) return 1.0;
    std::unordered_set<std::size_t> wanted(truth.begin(), truth.end());
    std::size_t hits = 0;
    for (const auto id : retrieved) hits += wanted.count(id);
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

TruncationBaseline truncation_baseline(const DenseCorpus& corpus, std::size_t r) {
    if (r == 0 || r > corpus.dim()) throw InvalidArgument("truncation needs 1 <= r <= d");
    TruncationBaseline out;
    out.corpus.data = corpus.data.leftCols(static_cast<Eigen::Index>(r));
    flag_and_normalize(out.corpus, out.zero_rows);
    return out;
}

PcaBaseline pca_baseline(const DenseCorpus& corpus, std::size_t r, std::uint64_t seed) {
    const std::size_t d = corpus.dim();
    if (r == 0 || r > std::min(corpus.n_items(), d)) throw InvalidArgument("PCA needs 1 <= r <= min(n, d)");

    const Eigen::MatrixXd x = corpus.data.cast<double>();
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(corpus.n_items());

    // Columns: candidate directions, eigenvalues descending.
    Eigen::MatrixXd directions;
    Eigen::VectorXd variances;
    if (d <= 2048) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
        directions = solver.eigenvectors().rowwise().reverse();
        variances = solver.eigenvalues().reverse();
    } else {
        const auto width = static_cast<Eigen::Index>(std::min(d, r + 10));
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::MatrixXd basis(static_cast<Eigen::Index>(d), width);
        for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = normal(rng);
        for (int iter = 0; iter < 30; ++iter) {
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(cov * basis);
            basis = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), width);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(basis.transpose() * cov * basis);
        directions = basis * solver.eigenvectors().rowwise().reverse();
        variances = solver.eigenvalues().reverse();
    }

    const double top = std::max(variances(0), 0.0);
    std::size_t rank = 0;
    while (rank < r && rank < static_cast<std::size_t>(variances.size()) &&
           variances(static_cast<Eigen::Index>(rank)) > 1e-10 * top && top > 0) {
        ++rank;
    }
    if (rank == 0) rank = 1;

    PcaBaseline out;
    out.requested_rank = r;
    out.mean = mean.transpose().cast<float>();
    Eigen::MatrixXd projection = directions.leftCols(static_cast<Eigen::Index>(rank)).transpose();
    for (Eigen::Index i = 0; i < projection.rows(); ++i) {
        Eigen::Index pivot;
        projection.row(i).cwiseAbs().maxCoeff(&pivot);
        if (projection(i, pivot) < 0) projection.row(i) *= -1.0;
        projection.row(i).normalize();
    }
    out.projection = projection.cast<float>();
    out.corpus.data = (centered * projection.transpose()).cast<float>();
    flag_and_normalize(out.corpus, out.zero_rows);
    return out;
}

std::vector<std::size_t> sample_queries(std::size_t n_items, std::size_t count, std::uint64_t seed) {
    count = std::min(count, n_items);
    std::vector<std::size_t> ids(n_items);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n_items - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

EvalReport evaluate(const DenseCorpus& corpus, const SaeParams<float>& params, const SparseIndex& index,
                    const KernelMatrix* kernel, std::span<const std::size_t> queries, const EvalOptions& options) {
    if (corpus.dim() != params.dim_in) {
        throw DimensionMismatch("corpus has d=" + std::to_string(corpus.dim()) + ", model has d=" +
                                std::to_string(params.dim_in));
    }
    if (index.n_items() != corpus.n_items() || index.dim_latent() != params.dim_latent) {
        throw DimensionMismatch("index was not built from this corpus and model");
    }
    if (options.n_values.empty()) throw InvalidArgument("need at least one n");
    const std::size_t n_max = *std::max_element(options.n_values.begin(), options.n_values.end());
    if (n_max == 0 || n_max >= corpus.n_items()) throw InvalidArgument("every n must satisfy 1 <= n < n_items");
    for (const auto q : queries) {
        if (q >= corpus.n_items()) throw InvalidArgument("query row " + std::to_string(q) + " out of range");
    }
    const std::size_t threads = resolve_threads(options.threads);
    const std::span<const std::size_t> n_values(options.n_values);

    EvalReport report;
    report.n_queries = queries.size();
    report.dim_latent = params.dim_latent;
    report.storage = storage_stats(index, corpus.dim());
    const auto truth = dense_ground_truth(corpus, queries, n_max, threads);

    report.recall_at_n[SearchMode::sparse] =
        recall_table(truth, n_values, threads, [&](std::size_t q) -> std::optional<std::vector<std::size_t>> {
            const auto query = index.activation(queries[q]);
            if (query.nnz() == 0) return std::nullopt;
            return drop_self(search_sparse(index, query, n_max + 1), queries[q], n_max);
        });

    if (kernel) {
        const ReconstructedIndex attached(index, *kernel);
        const auto quad = attached.quadratic_forms();
        report.recall_at_n[SearchMode::reconstructed] =
            recall_table(truth, n_values, threads, [&](std::size_t q) -> std::optional<std::vector<std::size_t>> {
                if (!(quad[queries[q]] > 0)) return std::nullopt;
                return drop_self(search_reconstructed(attached, index.activation(queries[q]), n_max + 1), queries[q],
                                 n_max);
            });
    }

    std::vector<double> cosines;
    for (const auto q : queries) {
        const auto x = corpus.row(q).transpose();
        if (!(x.norm() > 0)) continue;
        cosines.push_back(1.0 - cosine_loss(x, decode(params, index.activation(q))));
    }
    report.mean_reconstruction_cosine = mean_of(cosines);

    const std::size_t budget = std::min(2 * params.sparsity, corpus.dim());
    if (options.truncation) {
        const auto base = truncation_baseline(corpus, budget);
        BaselineResult result;
        result.name = "truncation";
        result.dims = budget;
        result.bytes_per_row = 4 * budget;
        result.recall_at_n = dense_recall(base.corpus, truth, queries, n_values, n_max, threads);
        std::vector<double> kept;
        for (const auto q : queries) {
            const float full = corpus.row(q).norm();
            if (full > 0) kept.push_back(corpus.row(q).head(static_cast<Eigen::Index>(budget)).norm() / full);
        }
        result.mean_reconstruction_cosine = mean_of(kept);
        report.baselines.push_back(std::move(result));
    }
    if (options.pca) {
        const auto base = pca_baseline(corpus, std::min(budget, corpus.n_items()), options.seed);
        BaselineResult result;
        result.name = "pca";
        result.dims = static_cast<std::size_t>(base.projection.rows());
        result.bytes_per_row = 4 * result.dims;
        result.recall_at_n = dense_recall(base.corpus, truth, queries, n_values, n_max, threads);
        std::vector<double> kept;
        for (const auto q : queries) {
            const Eigen::VectorXf x = corpus.row(q).transpose();
            if (!(x.norm() > 0)) continue;
            const Eigen::VectorXf centered = x - base.mean;
            const Eigen::VectorXf recon = base.mean + base.projection.transpose() * (base.projection * centered);
            kept.push_back(1.0 - cosine_loss(x, recon));
        }
        result.mean_reconstruction_cosine = mean_of(kept);
        report.baselines.push_back(std::move(result));
    }
    return report;
}

void write_eval_table(const EvalReport& report, std::ostream& out) {
    out << "method\tmode\tdims\tbytes_per_row\tn\trecall\n";
    out << std::fixed << std::setprecision(6);
    const std::uint64_t sae_bytes =
        report.storage.n_items ? (report.storage.bytes_values + report.storage.bytes_indices) / report.storage.n_items
                               : 0;
    for (const auto& [mode, table] : report.recall_at_n) {
        for (const auto& [n, recall] : table) {
            out << "compressae\t" << to_string(mode) << '\t' << report.dim_latent << '\t' << sae_bytes << '\t' << n << '\t'
                << recall << '\n';
        }
    }
    for (const auto& base : report.baselines) {
        for (const auto& [n, recall] : base.recall_at_n) {
            out << base.name << "\tdense\t" << base.dims << '\t' << base.bytes_per_row << '\t' << n << '\t' << recall
                << '\n';
        }
    }
    out << std::defaultfloat;
}

void write_eval_report(const EvalReport& report, std::ostream& out,
                       const std::map<std::string, std::string>& metadata) {
    const auto& s = report.storage;
    out << std::setprecision(9);
    out << "n_queries = " << report.n_queries << '\n';
    out << "mean_reconstruction_cosine = " << report.mean_reconstruction_cosine << '\n';
    out << "storage.n_items = " << s.n_items << '\n';
    out << "storage.nnz = " << s.nnz << '\n';
    out << "storage.bytes_values = " << s.bytes_values << '\n';
    out << "storage.bytes_indices = " << s.bytes_indices << '\n';
    out << "storage.bytes_total = " << s.bytes_total << '\n';
    out << "storage.dense_bytes_equivalent = " << s.dense_bytes_equivalent << '\n';
    out << "storage.compression_ratio = " << s.compression_ratio << '\n';
    for (const auto& base : report.baselines) {
        out << "baseline." << base.name << ".dims = " << base.dims << '\n';
        out << "baseline." << base.name << ".bytes_per_row = " << base.bytes_per_row << '\n';
        out << "baseline." << base.name << ".mean_reconstruction_cosine = " << base.mean_reconstruction_cosine << '\n';
    }
    out << '\n';
    write_eval_table(report, out);
    for (const auto& [key, value] : metadata) out << "# " << key << " = " << value << '\n';
}

}  // namespace compressae
