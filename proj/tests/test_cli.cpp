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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <tuple>

#include "compressae/corpus.hpp"
#include "compressae/sae.hpp"
#include "compressae/sparse_index.hpp"

using namespace compressae;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Captures stdout, or only stderr when `stderr_only` is set.
Run run(const std::string& args, bool stderr_only = false) {
    const std::string cmd =
        std::string(COMPRESSAE_CLI) + " " + args + (stderr_only ? " 2>&1 >/dev/null" : " 2>/dev/null");
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string value_of(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + " = ", 0) == 0) return line.substr(key.size() + 3);
    }
    return {};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("compressae_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("generate --n 10").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("search --index x --mode dense --query-item 0").code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, DataErrorsExitOne) {
    EXPECT_EQ(run("compress --model /nonexistent --corpus /nonexistent --out " + path("i")).code, 1);
    std::ofstream(path("junk")) << "not a corpus";
    EXPECT_EQ(run("train --corpus " + path("junk") + " --model-out " + path("m")).code, 1);
}

TEST_F(Cli, GenerateIsDeterministic) {
    ASSERT_EQ(run("generate --n 300 --d 8 --clusters 5 --seed 3 --out " + path("a")).code, 0);
    ASSERT_EQ(run("generate --n 300 --d 8 --clusters 5 --seed 3 --out " + path("b")).code, 0);
    EXPECT_EQ(slurp(path("a")), slurp(path("b")));
    const auto c = load_corpus(path("a"));
    EXPECT_EQ(c.n_items(), 300u);
    EXPECT_EQ(c.dim(), 8u);
}

TEST_F(Cli, TrainRejectsBadSparsity) {
    ASSERT_EQ(run("generate --n 100 --d 8 --clusters 4 --out " + path("c")).code, 0);
    const auto r = run("train --corpus " + path("c") + " --latent-dim 16 --k 5 --model-out " + path("m"),
                       true);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("4k <= h"), std::string::npos) << r.out;
}

TEST_F(Cli, ZeroStepsWritesInitialization) {
    ASSERT_EQ(run("generate --n 100 --d 8 --clusters 4 --out " + path("c")).code, 0);
    ASSERT_EQ(run("train --corpus " + path("c") + " --latent-dim 32 --k 2 --steps 0 --seed 9 --model-out " +
                  path("m")).code,
              0);
    std::ostringstream want(std::ios::binary);
    write_model(init_params(8, 32, 2, 9), want);
    EXPECT_EQ(slurp(path("m")), want.str());
}

TEST_F(Cli, PipelineRunsAndIsDeterministic) {
    ASSERT_EQ(run("generate --n 2000 --d 16 --clusters 20 --seed 1 --out " + path("c")).code, 0);
    const std::string train_args = "train --corpus " + path("c") +
                                   " --latent-dim 64 --k 4 --batch-size 256 --steps 40 --lr 1e-2 --seed 2";
    const auto t1 = run(train_args + " --model-out " + path("m1") + " --report-out " + path("r1"));
    ASSERT_EQ(t1.code, 0);
    ASSERT_EQ(run("--threads 2 " + train_args + " --model-out " + path("m2") + " --report-out " + path("r2")).code, 0);
    EXPECT_EQ(slurp(path("m1")), slurp(path("m2")));
    EXPECT_LT(std::stod(value_of(t1.out, "final_holdout_loss")), std::stod(value_of(t1.out, "initial_holdout_loss")));
    const auto report = slurp(path("r1"));
    EXPECT_EQ(report.rfind("step\tloss_k\tloss_4k\tcombined\tdead_count\tms\n", 0), 0u);
    EXPECT_NE(report.find("# learning_rate = 0.01"), std::string::npos);
    EXPECT_NE(report.find("# seed = 2"), std::string::npos);

    const auto c1 = run("compress --model " + path("m1") + " --corpus " + path("c") + " --out " + path("i1"));
    ASSERT_EQ(c1.code, 0);
    ASSERT_EQ(run("compress --batch-size 7 --model " + path("m1") + " --corpus " + path("c") + " --out " + path("i2"))
                  .code,
              0);
    EXPECT_EQ(slurp(path("i1")), slurp(path("i2")));
    EXPECT_EQ(value_of(c1.out, "nominal_ratio"), "2.0");
    EXPECT_EQ(value_of(c1.out, "items"), "2000");

    const auto s1 = run("search --index " + path("i1") + " --query-item 5 --n 3");
    ASSERT_EQ(s1.code, 0);
    EXPECT_EQ(s1.out.rfind("0\t1\t5\t1.000000\n", 0), 0u) << s1.out;
    const auto row = run("search --index " + path("i1") + " --model " + path("m1") + " --corpus " + path("c") +
                         " --query-row 5 --n 3");
    EXPECT_EQ(row.out, s1.out);
    const auto rec = run("search --mode reconstructed --index " + path("i1") + " --model " + path("m1") +
                         " --query-item 5 --query-item 9 --n 4");
    ASSERT_EQ(rec.code, 0);
    EXPECT_EQ(std::count(rec.out.begin(), rec.out.end(), '\n'), 8);
    EXPECT_EQ(rec.out, run("search --mode reconstructed --index " + path("i1") + " --model " + path("m1") +
                           " --query-item 5 --query-item 9 --n 4").out);

    const auto ev = run("eval --corpus " + path("c") + " --model " + path("m1") + " --index " + path("i1") +
                        " --n 1,10 --baseline truncation,pca --queries 200 --report " + path("e") + " --table " +
                        path("t"));
    ASSERT_EQ(ev.code, 0);
    std::istringstream table(slurp(path("t")));
    std::string line;
    std::getline(table, line);
    EXPECT_EQ(line, "method\tmode\tdims\tbytes_per_row\tn\trecall");
    int rows = 0;
    bool equal_budget = false;
    while (std::getline(table, line)) {
        ++rows;
        const double recall = std::stod(line.substr(line.rfind('\t') + 1));
        EXPECT_GE(recall, 0.0);
        EXPECT_LE(recall, 1.0);
        equal_budget = equal_budget || line.rfind("truncation\tdense\t8\t32\t", 0) == 0;
    }
    EXPECT_EQ(rows, 8);
    EXPECT_TRUE(equal_budget);
    EXPECT_NE(slurp(path("e")).find("# baselines = truncation,pca"), std::string::npos);
}

TEST_F(Cli, SearchNeedsModelForReconstructedMode) {
    SparseIndex index(8);
    index.push_back({{1}, {1.0f}, 8});
    save_index(index, path("i"));
    const auto r = run("search --mode reconstructed --index " + path("i") + " --query-item 0", true);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("decoder weights"), std::string::npos) << r.out;
    EXPECT_EQ(run("search --index " + path("i") + " --query-item 0 --query-row 1").code, 2);
    EXPECT_EQ(run("search --index " + path("i") + " --query-item 3").code, 1);
}

TEST_F(Cli, NominalRatioTwelve) {
    save_model(init_params(768, 4096, 32, 1), path("m"));
    save_corpus(generate_synthetic(50, 768, 5, 2), path("c"));
    const auto r = run("compress --model " + path("m") + " --corpus " + path("c") + " --out " + path("i"));
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(value_of(r.out, "nominal_ratio"), "12.0");
    EXPECT_EQ(value_of(r.out, "compression_ratio"), "12.000");
    EXPECT_EQ(value_of(r.out, "bytes_per_row"), "256");
}

TEST_F(Cli, CompressNamesBothDims) {
    save_model(init_params(12, 48, 4, 1), path("m"));
    save_corpus(generate_synthetic(10, 8, 2, 2), path("c"));
    const auto r = run("compress --model " + path("m") + " --corpus " + path("c") + " --out " + path("i"),
                       true);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("d=8"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("d=12"), std::string::npos) << r.out;
}

TEST_F(Cli, ModesAgreeOnOrthonormalToyModel) {
    // d = h = 8 with identity encoder and decoder, so K = I.
    SaeParams<float> p;
    p.dim_in = p.dim_latent = 8;
    p.sparsity = 2;
    p.w_enc = SaeParams<float>::EncoderMatrix::Identity(8, 8);
    p.b_enc = Eigen::VectorXf::Zero(8);
    p.w_dec = SaeParams<float>::DecoderMatrix::Identity(8, 8);
    save_model(p, path("m"));
    save_corpus(generate_synthetic(200, 8, 10, 4), path("c"));
    ASSERT_EQ(run("compress --model " + path("m") + " --corpus " + path("c") + " --out " + path("i")).code, 0);
    const std::string common = " --index " + path("i") + " --model " + path("m") + " --corpus " + path("c") +
                               " --query-row 0 --query-row 17 --query-row 150 --n 10";
    const auto sparse = run("search --mode sparse" + common);
    const auto recon = run("search --mode reconstructed" + common);
    ASSERT_EQ(sparse.code, 0);
    ASSERT_EQ(recon.code, 0);
    // Same ranks and items; scores agree to float rounding.
    std::istringstream a(sparse.out), b(recon.out);
    std::size_t qa, ra, ia, qb, rb, ib;
    double sa, sb;
    int lines = 0;
    while (a >> qa >> ra >> ia >> sa) {
        ASSERT_TRUE(b >> qb >> rb >> ib >> sb);
        EXPECT_EQ(std::tie(qa, ra, ia), std::tie(qb, rb, ib));
        EXPECT_NEAR(sa, sb, 1e-5);
        ++lines;
    }
    EXPECT_FALSE(b >> qb);
    EXPECT_EQ(lines, 30);
}

TEST_F(Cli, ConfigFileSuppliesDefaults) {
    std::ofstream(path("cfg.toml")) << "[generate]\nn = 64\nd = 4\nclusters = 2\nseed = 5\n";
    ASSERT_EQ(run("--config " + path("cfg.toml") + " generate --out " + path("a")).code, 0);
    ASSERT_EQ(run("--config " + path("cfg.toml") + " generate --n 32 --out " + path("b")).code, 0);
    EXPECT_EQ(load_corpus(path("a")).data, generate_synthetic(64, 4, 2, 5).data);
    EXPECT_EQ(load_corpus(path("b")).n_items(), 32u);
}
