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

#include <random>
#include <sstream>

#include "compressae/errors.hpp"
#include "compressae/sae.hpp"
#include "oracles.hpp"

using namespace compressae;

namespace {

Eigen::VectorXf random_vector(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<float> normal(0.0f, 1.0f);
    Eigen::VectorXf v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
    return v;
}

SaeParams<float> perturbed_params(std::size_t d, std::size_t h, std::size_t k, std::uint64_t seed) {
    auto p = init_params(d, h, k, seed);
    std::mt19937_64 rng(seed ^ 0x5eed);
    std::normal_distribution<float> noise(0.0f, 0.2f);
    for (Eigen::Index i = 0; i < p.w_enc.size(); ++i) p.w_enc.data()[i] += noise(rng);
    for (Eigen::Index i = 0; i < p.b_enc.size(); ++i) p.b_enc(i) = 0.1f * noise(rng);
    return p;
}

}  // namespace

TEST(NormalizeInput, Basics) {
    const auto y = normalize_input(Eigen::Vector2f(3, 4));
    EXPECT_FLOAT_EQ(y(0), 0.6f);
    EXPECT_FLOAT_EQ(y(1), 0.8f);
    const Eigen::Vector3d u = Eigen::Vector3d(1, -2, 2) / 3.0;
    EXPECT_TRUE(normalize_input(u).isApprox(u, 1e-15));
    EXPECT_THROW(normalize_input(Eigen::Vector2f::Zero().eval()), DegenerateInputError);
}

TEST(TopkAbs, ReferenceExamples) {
    const std::vector<float> z{0.5f, -2.0f, 1.0f, -0.1f};
    const auto s = topk_abs(std::span<const float>(z), 2);
    EXPECT_EQ(s.indices, (std::vector<std::uint32_t>{1, 2}));
    EXPECT_EQ(s.values, (std::vector<float>{-2.0f, 1.0f}));
    EXPECT_EQ(s.dim_latent, 4u);

    const std::vector<float> tie{1.0f, 1.0f, 0.5f};
    const auto t = topk_abs(std::span<const float>(tie), 1);
    EXPECT_EQ(t.indices, std::vector<std::uint32_t>{0});
    EXPECT_EQ(t.values, std::vector<float>{1.0f});

    const std::vector<float> signed_tie{0.0f, -3.0f, 3.0f};
    EXPECT_EQ(topk_abs(std::span<const float>(signed_tie), 1).indices, std::vector<std::uint32_t>{1});
}

TEST(TopkAbs, FullKeepsNonzerosOnly) {
    const std::vector<float> z{0.0f, 2.0f, 0.0f, -1.0f, 3.0f};
    const auto s = topk_abs(std::span<const float>(z), 5);
    EXPECT_EQ(s.indices, (std::vector<std::uint32_t>{1, 3, 4}));
    EXPECT_EQ(s.values, (std::vector<float>{2.0f, -1.0f, 3.0f}));
    EXPECT_THROW(topk_abs(std::span<const float>(z), 0), InvalidArgument);
    EXPECT_THROW(topk_abs(std::span<const float>(z), 6), InvalidArgument);
}

TEST(TopkAbs, MatchesFullSortOracle) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> level(-4, 4);
    for (int trial = 0; trial < 200; ++trial) {
        // Coarse levels force plenty of ties and zeros.
        Eigen::VectorXd z(40);
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = 0.5 * level(rng);
        const std::size_t k = 1 + static_cast<std::size_t>(trial % 20);
        const auto s = topk_abs(z, k);
        EXPECT_TRUE(s.to_dense() == oracle::masked_topk(z, k)) << "trial " << trial;
    }
}

TEST(Encode, IdentitySelectorsPickLargestCoordinates) {
    const std::size_t d = 6, h = 24, k = 2;
    SaeParams<float> p;
    p.dim_in = d;
    p.dim_latent = h;
    p.sparsity = k;
    p.w_enc = SaeParams<float>::EncoderMatrix::Zero(h, d);
    p.w_enc.topRows(d).setIdentity();
    p.b_enc = Eigen::VectorXf::Zero(h);
    p.w_dec = SaeParams<float>::DecoderMatrix::Zero(d, h);
    for (std::size_t j = 0; j < h; ++j) p.w_dec(j % d, j) = 1.0f;
    Eigen::VectorXf x(6);
    x << 1.0f, -5.0f, 2.0f, 0.5f, 4.0f, -0.25f;
    const auto s = encode(p, x);
    EXPECT_EQ(s.indices, (std::vector<std::uint32_t>{1, 4}));
    const float n = x.norm();
    EXPECT_FLOAT_EQ(s.values[0], -5.0f / n);
    EXPECT_FLOAT_EQ(s.values[1], 4.0f / n);
}

TEST(Encode, MatchesDenseOracle) {
    std::mt19937_64 rng(2);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = perturbed_params(12, 64, 5, seed);
        const Eigen::VectorXf x = random_vector(12, rng);
        const auto s = encode(p, x);
        const Eigen::VectorXf z = p.w_enc * (x / x.norm()) + p.b_enc;
        const auto model = oracle::to_dense(p);
        EXPECT_TRUE(s.to_dense() == oracle::masked_topk(z.cast<double>(), 5).cast<float>());
        // decode vs dense product on the scattered code
        const Eigen::VectorXd dense = model.w_dec * oracle::scatter(s);
        EXPECT_LT((decode(p, s).cast<double>() - dense).norm(), 1e-6 * std::max(1.0, dense.norm()));
    }
}

TEST(Encode, RejectsBadInput) {
    const auto p = init_params(8, 32, 4, 1);
    EXPECT_THROW(encode(p, Eigen::VectorXf::Zero(8).eval()), DegenerateInputError);
    EXPECT_THROW(encode(p, Eigen::VectorXf::Ones(7).eval()), DimensionMismatch);
    SparseActivation<float> wrong;
    wrong.dim_latent = 16;
    EXPECT_THROW(decode(p, wrong), DimensionMismatch);
}

TEST(Decode, EmptyAndSingleAtom) {
    const auto p = init_params(10, 40, 3, 7);
    SparseActivation<float> empty;
    empty.dim_latent = 40;
    EXPECT_EQ(decode(p, empty), Eigen::VectorXf::Zero(10));
    SparseActivation<float> one{{17}, {1.0f}, 40};
    const auto v = decode(p, one);
    EXPECT_EQ(v, p.w_dec.col(17));
    EXPECT_NEAR(v.norm(), 1.0f, 1e-5f);
}

TEST(Forward, OrthonormalFullRankIsIdentity) {
    // h = 4d: atoms are the standard basis, each repeated four times, but the
    // encoder only routes through the first copy.
    const std::size_t d = 5, h = 20;
    SaeParams<double> p;
    p.dim_in = d;
    p.dim_latent = h;
    p.sparsity = 1;
    p.w_dec = Eigen::MatrixXd::Zero(d, h);
    for (std::size_t j = 0; j < h; ++j) p.w_dec(j % d, j) = 1.0;
    p.w_enc = Eigen::MatrixXd::Zero(h, d);
    p.w_enc.topRows(d).setIdentity();
    p.b_enc = Eigen::VectorXd::Zero(h);
    Eigen::VectorXd x(5);
    x << 0.3, -1.0, 2.0, 0.0, 4.0;
    const auto out = forward(p, x, h);
    EXPECT_LT((out.reconstruction - x.normalized()).norm(), 1e-15);
    EXPECT_EQ(out.activation.nnz(), 4u);
}

TEST(Forward, WiderCutoffKeepsSuperset) {
    std::mt19937_64 rng(3);
    const auto p = perturbed_params(16, 128, 6, 3);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::VectorXf x = random_vector(16, rng);
        const auto narrow = forward(p, x);
        const auto wide = forward(p, x, 24);
        EXPECT_EQ(narrow.activation.nnz(), 6u);
        for (auto i : narrow.activation.indices) {
            EXPECT_TRUE(std::binary_search(wide.activation.indices.begin(), wide.activation.indices.end(), i));
        }
    }
}

TEST(Invariants, SignDominanceAndScale) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<float> scale(1e-3f, 1e3f);
    const auto p = perturbed_params(16, 128, 8, 4);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::VectorXf x = random_vector(16, rng);
        const auto s = encode(p, x);
        const Eigen::VectorXf z = pre_activation(p, x);
        float min_kept = INFINITY;
        for (std::size_t j = 0; j < s.nnz(); ++j) {
            EXPECT_EQ(s.values[j], z(s.indices[j]));
            min_kept = std::min(min_kept, std::abs(s.values[j]));
        }
        const auto dense = s.to_dense();
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            if (dense(i) == 0.0f) EXPECT_LE(std::abs(z(i)), min_kept);
        }
        // powers of two keep the normalized input bit-identical
        EXPECT_EQ(encode(p, Eigen::VectorXf(x * 8.0f)), s);
        const Eigen::VectorXf scaled = x * scale(rng);
        const auto rescaled = encode(p, scaled);
        EXPECT_EQ(rescaled.indices, s.indices);
        for (std::size_t j = 0; j < s.nnz(); ++j) EXPECT_NEAR(rescaled.values[j], s.values[j], 1e-5f);
    }
}

TEST(Init, UnitAtomsTiedEncoderZeroBias) {
    const auto p = init_params(24, 96, 8, 99);
    EXPECT_EQ(p, init_params(24, 96, 8, 99));
    EXPECT_FALSE(p == init_params(24, 96, 8, 100));
    for (Eigen::Index j = 0; j < 96; ++j) EXPECT_NEAR(p.w_dec.col(j).norm(), 1.0f, 1e-6f);
    EXPECT_EQ(Eigen::MatrixXf(p.w_enc), Eigen::MatrixXf(p.w_dec.transpose()));
    EXPECT_TRUE(p.b_enc.isZero(0));
    EXPECT_NO_THROW(validate_params(p));
}

TEST(Init, RejectsBadDims) {
    try {
        init_params(8, 12, 4, 0);
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("4k <= h"), std::string::npos);
    }
    EXPECT_THROW(init_params(8, 32, 0, 0), InvalidArgument);
    EXPECT_THROW(init_params(0, 32, 2, 0), InvalidArgument);
}

TEST(ModelIo, RoundTripBitExact) {
    const auto p = perturbed_params(12, 48, 3, 5);
    std::ostringstream out(std::ios::binary);
    const auto bytes = write_model(p, out);
    EXPECT_EQ(bytes, 20u + 4 * (2 * 48 * 12 + 48));
    EXPECT_EQ(out.str().size(), bytes);
    std::istringstream in(out.str(), std::ios::binary);
    const auto back = read_model(in);
    EXPECT_EQ(back, p);
    std::ostringstream again(std::ios::binary);
    write_model(back, again);
    EXPECT_EQ(again.str(), out.str());
}

TEST(ModelIo, DecoderStoredColumnMajor) {
    auto p = init_params(3, 8, 2, 1);
    std::ostringstream out(std::ios::binary);
    write_model(p, out);
    const std::string bytes = out.str();
    const std::size_t offset = 20 + 4 * (8 * 3 + 8);
    float first_atom[3];
    std::memcpy(first_atom, bytes.data() + offset, sizeof first_atom);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(first_atom[i], p.w_dec(i, 0));
}

TEST(ModelIo, RejectsCorruptFiles) {
    const auto p = init_params(4, 16, 2, 1);
    std::ostringstream out(std::ios::binary);
    write_model(p, out);
    const std::string good = out.str();

    auto bad_magic = good;
    bad_magic[0] = 'X';
    std::istringstream a(bad_magic, std::ios::binary);
    EXPECT_THROW(read_model(a), FormatError);

    std::istringstream b(good.substr(0, good.size() - 1), std::ios::binary);
    EXPECT_THROW(read_model(b), FormatError);

    // inflate one decoder entry so its atom is no longer unit norm
    auto bad_atom = good;
    const float big = 5.0f;
    std::memcpy(bad_atom.data() + good.size() - 4, &big, 4);
    std::istringstream c(bad_atom, std::ios::binary);
    EXPECT_THROW(read_model(c), FormatError);

    auto bad_k = good;
    bad_k[16] = 5;  // 4k > h
    std::istringstream d(bad_k, std::ios::binary);
    EXPECT_THROW(read_model(d), FormatError);
}

TEST(Params, NormalizeAtomsAndCast) {
    auto p = perturbed_params(6, 24, 2, 8);
    p.w_dec *= 3.0f;
    EXPECT_THROW(validate_params(p), InvalidArgument);
    normalize_atoms(p);
    EXPECT_NO_THROW(validate_params(p));
    const auto dp = p.cast<double>();
    EXPECT_EQ(dp.cast<float>(), p);
}
