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

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "compressae/compression.hpp"
#include "compressae/corpus.hpp"
#include "compressae/evaluation.hpp"
#include "compressae/retrieval.hpp"
#include "compressae/sae.hpp"
#include "compressae/sparse_index.hpp"
#include "compressae/training.hpp"

namespace {

using namespace compressae;

// Usage problems detected after parsing; exit code 2 like parse errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::size_t threads = 0;
    bool verbose = false;
};

template <typename T>
std::string str(const T& value) {
    std::ostringstream out;
    out << std::setprecision(17) << value;
    return out.str();
}

std::string join(const std::vector<std::size_t>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

std::ofstream open_text(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

struct GenerateArgs {
    std::size_t n = 20000;
    std::size_t d = 64;
    std::size_t clusters = 100;
    std::uint64_t seed = 0;
    double perturbation = 0.3;
    std::string out;
};

int run_generate(const GenerateArgs& a, const GlobalOptions& g) {
    const DenseCorpus corpus = generate_synthetic(a.n, a.d, a.clusters, a.seed, a.perturbation);
    save_corpus(corpus, a.out);
    if (g.verbose) std::cerr << "wrote " << a.n << " x " << a.d << " corpus to " << a.out << '\n';
    return 0;
}

struct TrainArgs {
    std::string corpus;
    std::size_t h = 512;
    std::size_t k = 8;
    TrainConfig config;
    std::string model_out;
    std::string report_out;
};

int run_train(TrainArgs a, const GlobalOptions& g) {
    try {
        check_dims(1, a.h, a.k);
        validate_config(a.config);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    a.config.threads = g.threads;
    const DenseCorpus corpus = load_corpus(a.corpus);
    const auto result = train(corpus, corpus.dim(), a.h, a.k, a.config);
    save_model(result.params, a.model_out);

    const auto& c = a.config;
    const std::map<std::string, std::string> metadata{
        {"corpus", a.corpus},        {"d", str(corpus.dim())},
        {"h", str(a.h)},             {"k", str(a.k)},
        {"batch_size", str(c.batch_size)}, {"steps", str(c.steps)},
        {"learning_rate", str(c.learning_rate)}, {"adam_beta1", str(c.adam_beta1)},
        {"adam_beta2", str(c.adam_beta2)}, {"adam_epsilon", str(c.adam_epsilon)},
        {"aux_weight", str(c.aux_weight)}, {"holdout_fraction", str(c.holdout_fraction)},
        {"dead_window", str(c.dead_window)}, {"seed", str(c.seed)},
    };
    if (!a.report_out.empty()) {
        auto out = open_text(a.report_out);
        write_train_report(result.report, out, metadata);
    }
    const auto& r = result.report;
    std::cout << "steps = " << r.steps.size() << '\n';
    if (!r.steps.empty()) {
        std::cout << "first_combined_loss = " << r.steps.front().combined << '\n';
        std::cout << "final_combined_loss = " << r.steps.back().combined << '\n';
        std::cout << "final_dead_latents = " << r.steps.back().dead_latents << '\n';
    }
    if (r.initial_holdout_loss) std::cout << "initial_holdout_loss = " << *r.initial_holdout_loss << '\n';
    if (r.final_holdout_loss) std::cout << "final_holdout_loss = " << *r.final_holdout_loss << '\n';
    if (r.final_holdout_cosine) std::cout << "final_holdout_cosine = " << *r.final_holdout_cosine << '\n';
    if (g.verbose) {
        for (const auto& s : r.steps) {
            if (s.step % 50 == 0 || s.step == 1) {
                std::cerr << "step " << s.step << " combined " << s.combined << " dead " << s.dead_latents << '\n';
            }
        }
    }
    return 0;
}

struct CompressArgs {
    std::string model;
    std::string corpus;
    std::string out;
    std::size_t batch_size = 4096;
};

int run_compress(const CompressArgs& a, const GlobalOptions& g) {
    const auto params = load_model(a.model);
    const auto report = compress_file(params, a.corpus, a.out, a.batch_size, g.threads);
    const auto& s = report.storage;
    std::cout << "items = " << report.n_items << '\n';
    std::cout << "zero_rows = " << report.zero_rows.size() << '\n';
    std::cout << "nnz = " << s.nnz << '\n';
    std::cout << "bytes_values = " << s.bytes_values << '\n';
    std::cout << "bytes_indices = " << s.bytes_indices << '\n';
    std::cout << "bytes_per_row = "
              << (s.n_items ? static_cast<double>(s.bytes_values + s.bytes_indices) / static_cast<double>(s.n_items) : 0.0)
              << '\n';
    std::cout << "bytes_total = " << s.bytes_total << '\n';
    std::cout << "dense_bytes_equivalent = " << s.dense_bytes_equivalent << '\n';
    std::cout << std::fixed << std::setprecision(3) << "compression_ratio = " << s.compression_ratio << '\n';
    std::cout << std::setprecision(1) << "nominal_ratio = "
              << static_cast<double>(params.dim_in) / (2.0 * static_cast<double>(params.sparsity)) << '\n';
    std::cout << std::setprecision(1) << "items_per_second = " << report.items_per_second << '\n';
    if (g.verbose) {
        for (const auto row : report.zero_rows) std::cerr << "zero row " << row << " stored empty\n";
    }
    return 0;
}

struct SearchArgs {
    std::string index;
    std::string model;
    std::string mode = "sparse";
    std::size_t n = 10;
    std::string corpus;
    std::vector<std::size_t> query_rows;
    std::string query_file;
    std::vector<std::size_t> query_items;
};

int run_search(const SearchArgs& a, const GlobalOptions& g) {
    const SearchMode mode = parse_search_mode(a.mode);
    if (mode == SearchMode::reconstructed && a.model.empty()) {
        throw UsageError("reconstructed mode needs --model: the kernel K = W_dec^T W_dec is built from the decoder "
                         "weights");
    }
    const int sources = !a.query_rows.empty() + !a.query_file.empty() + !a.query_items.empty();
    if (sources != 1) throw UsageError("give exactly one of --query-row, --query-file or --query-item");
    if (!a.query_rows.empty() && a.corpus.empty()) throw UsageError("--query-row needs --corpus");
    if ((!a.query_rows.empty() || !a.query_file.empty()) && a.model.empty()) {
        throw UsageError("dense queries need --model to be encoded");
    }

    const SparseIndex index = load_index(a.index);
    std::optional<SaeParams<float>> params;
    if (!a.model.empty()) params = load_model(a.model);

    std::vector<SparseActivation<float>> queries;
    auto encode_rows = [&](const DenseCorpus& corpus, const std::vector<std::size_t>& rows) {
        for (const auto r : rows) {
            if (r >= corpus.n_items()) throw InvalidArgument("query row " + std::to_string(r) + " out of range");
            queries.push_back(encode(*params, corpus.row(r).transpose()));
        }
    };
    if (!a.query_rows.empty()) {
        encode_rows(load_corpus(a.corpus), a.query_rows);
    } else if (!a.query_file.empty()) {
        const DenseCorpus dense = load_corpus(a.query_file);
        std::vector<std::size_t> all(dense.n_items());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        encode_rows(dense, all);
    } else {
        for (const auto item : a.query_items) {
            if (item >= index.n_items()) throw InvalidArgument("item " + std::to_string(item) + " out of range");
            queries.push_back(index.activation(item));
        }
    }

    std::optional<ReconstructedIndex> attached;
    if (mode == SearchMode::reconstructed) attached.emplace(index, kernel_from_params(*params));
    const auto results = batch_search(index, attached ? &*attached : nullptr, queries, a.n, mode, g.threads);
    std::cout << std::fixed << std::setprecision(6);
    for (std::size_t q = 0; q < results.size(); ++q) {
        for (std::size_t rank = 0; rank < results[q].entries.size(); ++rank) {
            const auto& hit = results[q].entries[rank];
            std::cout << q << '\t' << rank + 1 << '\t' << hit.item_id << '\t' << hit.score << '\n';
        }
    }
    return 0;
}

struct EvalArgs {
    std::string corpus;
    std::string model;
    std::string index;
    std::vector<std::size_t> n_values{1, 10, 100};
    std::vector<std::string> baselines;
    std::size_t queries = 1000;
    std::uint64_t seed = 0;
    std::string report_out;
    std::string table_out;
};

int run_eval(const EvalArgs& a, const GlobalOptions& g) {
    const DenseCorpus corpus = load_corpus(a.corpus);
    const auto params = load_model(a.model);
    const SparseIndex index = load_index(a.index);
    const KernelMatrix kernel = kernel_from_params(params);
    const auto queries = sample_queries(corpus.n_items(), a.queries, a.seed);

    EvalOptions options;
    options.n_values = a.n_values;
    options.seed = a.seed;
    options.threads = g.threads;
    for (const auto& b : a.baselines) {
        if (b == "truncation") options.truncation = true;
        if (b == "pca") options.pca = true;
    }
    const EvalReport report = evaluate(corpus, params, index, &kernel, queries, options);

    std::string baselines;
    for (const auto& b : a.baselines) baselines += (baselines.empty() ? "" : ",") + b;
    const std::map<std::string, std::string> metadata{
        {"corpus", a.corpus},   {"model", a.model},           {"index", a.index},
        {"d", str(params.dim_in)}, {"h", str(params.dim_latent)}, {"k", str(params.sparsity)},
        {"n_values", join(a.n_values)}, {"queries", str(a.queries)}, {"seed", str(a.seed)},
        {"baselines", baselines},
    };
    if (!a.report_out.empty()) {
        auto out = open_text(a.report_out);
        write_eval_report(report, out, metadata);
    }
    if (!a.table_out.empty()) {
        auto out = open_text(a.table_out);
        write_eval_table(report, out);
    }
    std::cout << "mean_reconstruction_cosine = " << report.mean_reconstruction_cosine << '\n';
    std::cout << "compression_ratio = " << report.storage.compression_ratio << '\n';
    write_eval_table(report, std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CompresSAE: sparse embedding compression and exact retrieval"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
    GlobalOptions global;
    app.add_option("--threads", global.threads, "Worker threads (0 = COMPRESSAE_THREADS or 1)")
        ->envname("COMPRESSAE_THREADS");
    app.add_flag("-v,--verbose", global.verbose, "Log progress to stderr");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic clustered unit-vector corpus");
    generate->add_option("--n", gen.n, "Number of rows")->check(CLI::PositiveNumber);
    generate->add_option("--d", gen.d, "Dimension")->check(CLI::PositiveNumber);
    generate->add_option("--clusters", gen.clusters, "Number of clusters")->check(CLI::PositiveNumber);
    generate->add_option("--perturbation", gen.perturbation, "Offset scale around the cluster centers");
    generate->add_option("--seed", gen.seed, "Random seed");
    generate->add_option("--out", gen.out, "Output corpus file")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a sparse autoencoder on a corpus");
    train_cmd->add_option("--corpus", tr.corpus, "Input corpus file")->required();
    train_cmd->add_option("--latent-dim", tr.h, "Latent dimension h");
    train_cmd->add_option("--k", tr.k, "Nonzeros per code");
    train_cmd->add_option("--batch-size", tr.config.batch_size, "Rows per step");
    train_cmd->add_option("--steps", tr.config.steps, "Optimizer steps");
    train_cmd->add_option("--lr", tr.config.learning_rate, "Adam learning rate");
    train_cmd->add_option("--beta1", tr.config.adam_beta1);
    train_cmd->add_option("--beta2", tr.config.adam_beta2);
    train_cmd->add_option("--epsilon", tr.config.adam_epsilon);
    train_cmd->add_option("--aux-weight", tr.config.aux_weight, "Weight of the 4k loss term");
    train_cmd->add_option("--holdout", tr.config.holdout_fraction, "Trailing fraction held out");
    train_cmd->add_option("--dead-window", tr.config.dead_window, "Steps without firing before a latent is dead");
    train_cmd->add_option("--seed", tr.config.seed, "Random seed");
    train_cmd->add_option("--model-out", tr.model_out, "Output model file")->required();
    train_cmd->add_option("--report-out", tr.report_out, "Per-step training report");

    CompressArgs cmp;
    auto* compress = app.add_subcommand("compress", "Encode a corpus into a sparse index");
    compress->add_option("--model", cmp.model)->required();
    compress->add_option("--corpus", cmp.corpus)->required();
    compress->add_option("--out", cmp.out, "Output index file")->required();
    compress->add_option("--batch-size", cmp.batch_size)->check(CLI::PositiveNumber);

    SearchArgs sr;
    auto* search = app.add_subcommand("search", "Exact top-n retrieval over an index");
    search->add_option("--index", sr.index)->required();
    search->add_option("--model", sr.model, "Model file (needed for dense queries and reconstructed mode)");
    search->add_option("--mode", sr.mode)->check(CLI::IsMember({"sparse", "reconstructed"}));
    search->add_option("--n", sr.n, "Results per query");
    search->add_option("--corpus", sr.corpus, "Corpus holding --query-row rows");
    search->add_option("--query-row", sr.query_rows, "Corpus row(s) to encode and search");
    search->add_option("--query-file", sr.query_file, "Corpus-format file of dense query vectors");
    search->add_option("--query-item", sr.query_items, "Index row(s) to use directly as queries");

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Recall against dense ground truth, with optional baselines");
    eval->add_option("--corpus", ev.corpus)->required();
    eval->add_option("--model", ev.model)->required();
    eval->add_option("--index", ev.index)->required();
    eval->add_option("--n", ev.n_values, "Cutoffs, e.g. --n 1,10,100")->delimiter(',');
    eval->add_option("--baseline", ev.baselines, "Equal-budget baselines")
        ->check(CLI::IsMember({"truncation", "pca"}))
        ->delimiter(',');
    eval->add_option("--queries", ev.queries, "Number of sampled query rows");
    eval->add_option("--seed", ev.seed, "Query sampling seed");
    eval->add_option("--report", ev.report_out, "Key-value report with table and config");
    eval->add_option("--table", ev.table_out, "Tab-separated table for plotting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*generate) return run_generate(gen, global);
        if (*train_cmd) return run_train(tr, global);
        if (*compress) return run_compress(cmp, global);
        if (*search) return run_search(sr, global);
        if (*eval) return run_eval(ev, global);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
