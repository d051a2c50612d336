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

#include <chrono>
#include <cmath>
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
#include "compressae/errors.hpp"
#include "compressae/parallel.hpp"
#include "compressae/sae.hpp"

namespace compressae {

struct TrainConfig {
    std::size_t batch_size = 4096;
    std::size_t steps = 300;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    // Weight of the 4k reconstruction term.
    double aux_weight = 1.0;
    // Trailing fraction of the corpus kept out of training batches.
    double holdout_fraction = 0.05;
    std::size_t dead_window = 100;
    // 0 = COMPRESSAE_THREADS or 1. Results do not depend on it.
    std::size_t threads = 0;
};

void validate_config(const TrainConfig& config);

struct StepRecord {
    std::size_t step = 0;
    double loss_k = 0;
    double loss_4k = 0;
    double combined = 0;
    std::size_t dead_latents = 0;
    double elapsed_ms = 0;
};

struct TrainReport {
    std::vector<StepRecord> steps;
    std::size_t holdout_rows = 0;
    std::optional<double> initial_holdout_loss;
    std::optional<double> final_holdout_loss;
    // Mean cosine(x, f(x; k)) over the held-out rows after training.
    std::optional<double> final_holdout_cosine;
};

/// Writes "step loss_k loss_4k combined dead_count ms" rows (tab separated),
/// then held-out summaries and `metadata` as "# key = value" lines.
void write_train_report(const TrainReport& report, std::ostream& out,
                        const std::map<std::string, std::string>& metadata = {});

/// Reconstructions this close to zero count as "no information": loss 1 and
/// no gradient.
inline constexpr double kZeroReconstruction = 1e-12;

/// 1 - cos(x, x_hat); 1 when x_hat vanishes.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_loss(const Eigen::MatrixBase<DerivedA>& x,
                                      const Eigen::MatrixBase<DerivedB>& x_hat) {
    using Scalar = typename DerivedA::Scalar;
    const Scalar nx = x.norm();
    if (!(nx > Scalar(0))) throw DegenerateInputError("cosine loss of a zero input");
    const Scalar nh = x_hat.norm();
    if (!(static_cast<double>(nh) >= kZeroReconstruction)) return Scalar(1);
    return Scalar(1) - x.dot(x_hat) / (nx * nh);
}

template <typename Scalar>
struct LossBreakdown {
    Scalar combined = 0;
    Scalar loss_k = 0;
    Scalar loss_4k = 0;
};

template <typename Scalar>
struct Gradients {
    typename SaeParams<Scalar>::EncoderMatrix w_enc;
    Vector<Scalar> b_enc;
    typename SaeParams<Scalar>::DecoderMatrix w_dec;

    static Gradients zeros_like(const SaeParams<Scalar>& p) {
        Gradients g;
        g.w_enc.setZero(p.w_enc.rows(), p.w_enc.cols());
        g.b_enc.setZero(p.b_enc.size());
        g.w_dec.setZero(p.w_dec.rows(), p.w_dec.cols());
        return g;
    }

    Gradients& operator+=(const Gradients& other) {
        w_enc += other.w_enc;
        b_enc += other.b_enc;
        w_dec += other.w_dec;
        return *this;
    }
};

template <typename Scalar>
struct BackwardResult {
    LossBreakdown<Scalar> loss;
    Gradients<Scalar> grads;
    // Latents selected by the k-branch for at least one row.
    std::vector<bool> fired;
};

namespace detail {

inline constexpr std::size_t kChunkRows = 256;

template <typename Scalar>
struct ChunkResult {
    Scalar sum_k = 0;
    Scalar sum_4k = 0;
    std::optional<Gradients<Scalar>> grads;
    std::vector<bool> fired;
};

// Loss sums (and optionally gradients) for rows [begin, end) of `batch`.
// Gradients are already scaled by 1/B and the branch weight.
template <typename Scalar, typename Derived>
ChunkResult<Scalar> process_chunk(const SaeParams<Scalar>& p, const Eigen::MatrixBase<Derived>& batch,
                                  Eigen::Index begin, Eigen::Index end, Scalar aux_weight,
                                  bool want_grads) {
    using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Index rows = end - begin;
    const Eigen::Index total_rows = batch.rows();
    const std::size_t k = p.sparsity;
    const std::size_t k_aux = 4 * p.sparsity;

    ChunkResult<Scalar> out;
    out.fired.assign(p.dim_latent, false);
    if (want_grads) out.grads = Gradients<Scalar>::zeros_like(p);

    RowMatrix xbar = batch.middleRows(begin, rows).template cast<Scalar>();
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Scalar norm = xbar.row(r).norm();
        if (!(norm > Scalar(0))) {
            throw DegenerateInputError("zero row in training batch", static_cast<std::size_t>(begin + r));
        }
        xbar.row(r) /= norm;
    }
    RowMatrix z = xbar * p.w_enc.transpose();
    z.rowwise() += p.b_enc.transpose();

    const Scalar weights[2] = {Scalar(1) / Scalar(total_rows), aux_weight / Scalar(total_rows)};
    const std::size_t branch_k[2] = {k, k_aux};
    Vector<Scalar> x_hat(static_cast<Eigen::Index>(p.dim_in));
    Vector<Scalar> g(static_cast<Eigen::Index>(p.dim_in));

    for (Eigen::Index r = 0; r < rows; ++r) {
        const Scalar* zr = z.row(r).data();
        const auto ranked = rank_by_magnitude(std::span<const Scalar>(zr, p.dim_latent), k_aux);
        const auto u = xbar.row(r).transpose();
        for (std::size_t t = 0; t < std::min(k, ranked.size()); ++t) out.fired[ranked[t]] = true;

        for (int branch = 0; branch < 2; ++branch) {
            const std::size_t m = std::min(branch_k[branch], ranked.size());
            x_hat.setZero();
            for (std::size_t t = 0; t < m; ++t) x_hat.noalias() += zr[ranked[t]] * p.w_dec.col(ranked[t]);
            const Scalar nh = x_hat.norm();
            Scalar loss = Scalar(1);
            const bool live = static_cast<double>(nh) >= kZeroReconstruction;
            Scalar cosine = 0;
            if (live) {
                cosine = u.dot(x_hat) / nh;
                loss = Scalar(1) - cosine;
            }
            (branch == 0 ? out.sum_k : out.sum_4k) += loss;

            if (!want_grads || !live || weights[branch] == Scalar(0)) continue;
            // d/dx_hat of 1 - u.x_hat/|x_hat|
            g = -(u - (cosine / nh) * x_hat) / nh;
            g *= weights[branch];
            auto& grads = *out.grads;
            for (std::size_t t = 0; t < m; ++t) {
                const auto j = static_cast<Eigen::Index>(ranked[t]);
                const Scalar dz = p.w_dec.col(j).dot(g);
                grads.w_dec.col(j).noalias() += zr[j] * g;
                grads.b_enc(j) += dz;
                grads.w_enc.row(j).noalias() += dz * u.transpose();
            }
        }
    }
    return out;
}

template <typename Scalar, typename Derived>
BackwardResult<Scalar> run_batch(const SaeParams<Scalar>& p, const Eigen::MatrixBase<Derived>& batch,
                                 double aux_weight, bool want_grads, std::size_t threads) {
    if (static_cast<std::size_t>(batch.cols()) != p.dim_in) {
        throw DimensionMismatch("batch has dim " + std::to_string(batch.cols()) + ", model expects " +
                                std::to_string(p.dim_in));
    }
    if (batch.rows() == 0) throw InvalidArgument("empty batch");
    check_dims(p.dim_in, p.dim_latent, p.sparsity);

    const auto rows = static_cast<std::size_t>(batch.rows());
    const std::size_t n_chunks = (rows + kChunkRows - 1) / kChunkRows;
    std::vector<ChunkResult<Scalar>> chunks(n_chunks);
    parallel_for(n_chunks, resolve_threads(threads), [&](std::size_t c) {
        const auto begin = static_cast<Eigen::Index>(c * kChunkRows);
        const auto end = static_cast<Eigen::Index>(std::min(rows, (c + 1) * kChunkRows));
        chunks[c] = process_chunk(p, batch, begin, end, static_cast<Scalar>(aux_weight), want_grads);
    });

    BackwardResult<Scalar> result;
    result.fired.assign(p.dim_latent, false);
    Scalar sum_k = 0, sum_4k = 0;
    for (auto& chunk : chunks) {
        sum_k += chunk.sum_k;
        sum_4k += chunk.sum_4k;
        for (std::size_t j = 0; j < p.dim_latent; ++j) {
            if (chunk.fired[j]) result.fired[j] = true;
        }
        if (want_grads) {
            if (&chunk == &chunks.front()) {
                result.grads = std::move(*chunk.grads);
            } else {
                result.grads += *chunk.grads;
            }
        }
    }
    const Scalar b = static_cast<Scalar>(rows);
    result.loss.loss_k = sum_k / b;
    result.loss.loss_4k = sum_4k / b;
    result.loss.combined = result.loss.loss_k + static_cast<Scalar>(aux_weight) * result.loss.loss_4k;
    return result;
}

}  // namespace detail

/// mean_k + aux_weight * mean_4k of the cosine losses over batch rows.
template <typename Scalar, typename Derived>
LossBreakdown<Scalar> combined_loss(const SaeParams<Scalar>& p, const Eigen::MatrixBase<Derived>& batch,
                                    double aux_weight, std::size_t threads = 1) {
    return detail::run_batch(p, batch, aux_weight, false, threads).loss;
}

/// Gradients of combined_loss. The top-k selections are held fixed, so only
/// kept latents receive gradient.
template <typename Scalar, typename Derived>
BackwardResult<Scalar> backward(const SaeParams<Scalar>& p, const Eigen::MatrixBase<Derived>& batch,
                                double aux_weight, std::size_t threads = 1) {
    return detail::run_batch(p, batch, aux_weight, true, threads);
}

/// Adam with bias correction over the three parameter blocks.
template <typename Scalar>
class Adam {
public:
    Adam(const SaeParams<Scalar>& p, double lr, double beta1, double beta2, double epsilon)
        : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
          m_(Gradients<Scalar>::zeros_like(p)), v_(Gradients<Scalar>::zeros_like(p)) {}

    void step(SaeParams<Scalar>& p, const Gradients<Scalar>& g) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        update(p.w_enc, g.w_enc, m_.w_enc, v_.w_enc, c1, c2);
        update(p.b_enc, g.b_enc, m_.b_enc, v_.b_enc, c1, c2);
        update(p.w_dec, g.w_dec, m_.w_dec, v_.w_dec, c1, c2);
    }

    std::size_t steps_taken() const { return t_; }

private:
    template <typename Param, typename Grad>
    void update(Param& x, const Grad& g, Grad& m, Grad& v, double c1, double c2) const {
        const auto b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
        m = b1 * m + (Scalar(1) - b1) * g;
        v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
        const auto step = static_cast<Scalar>(lr_ / c1);
        const auto root_c2 = static_cast<Scalar>(std::sqrt(c2));
        x.array() -= step * m.array() / (v.array().sqrt() / root_c2 + static_cast<Scalar>(epsilon_));
    }

    double lr_, beta1_, beta2_, epsilon_;
    std::size_t t_ = 0;
    Gradients<Scalar> m_, v_;
};

/// Number of latents whose last k-branch firing is at least `window` steps
/// old. `last_fired[j] < 0` means the latent never fired.
std::size_t dead_latent_count(std::span<const std::int64_t> last_fired, std::int64_t current_step,
                              std::size_t window);

struct TrainResult {
    SaeParams<float> params;
    TrainReport report;
};

/// Adam on the dual-k cosine loss over seeded shuffled batches of the
/// non-held-out rows. Decoder atoms are projected back to unit norm after
/// every step.
TrainResult train(const DenseCorpus& corpus, std::size_t d, std::size_t h, std::size_t k,
                  const TrainConfig& config);

/// Same, starting from given parameters.
TrainResult train(const DenseCorpus& corpus, SaeParams<float> initial, const TrainConfig& config);

}  // namespace compressae
