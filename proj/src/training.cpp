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

#include "compressae/training.hpp"

#include <iomanip>

namespace compressae {

void validate_config(const TrainConfig& c) {
    if (c.batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
    if (!(c.learning_rate > 0)) throw InvalidArgument("learning_rate must be positive");
    if (!(c.adam_beta1 >= 0 && c.adam_beta1 < 1)) throw InvalidArgument("beta1 must be in [0, 1)");
    if (!(c.adam_beta2 >= 0 && c.adam_beta2 < 1)) throw InvalidArgument("beta2 must be in [0, 1)");
    if (!(c.adam_epsilon > 0)) throw InvalidArgument("epsilon must be positive");
    if (!(c.aux_weight >= 0)) throw InvalidArgument("aux_weight must be non-negative");
    if (!(c.holdout_fraction >= 0 && c.holdout_fraction < 1)) {
        throw InvalidArgument("holdout_fraction must be in [0, 1)");
    }
}

std::size_t dead_latent_count(std::span<const std::int64_t> last_fired, std::int64_t current_step,
                              std::size_t window) {
    std::size_t dead = 0;
    for (const std::int64_t fired : last_fired) {
        if (fired < 0 || current_step - fired >= static_cast<std::int64_t>(window)) ++dead;
    }
    return dead;
}

namespace {

void check_finite(const LossBreakdown<float>& loss, std::size_t step) {
    if (!std::isfinite(loss.combined) || !std::isfinite(loss.loss_k) || !std::isfinite(loss.loss_4k)) {
        throw NumericalError("non-finite loss at step " + std::to_string(step) + " (loss_k=" +
                             std::to_string(loss.loss_k) + ", loss_4k=" + std::to_string(loss.loss_4k) + ")");
    }
}

}  // namespace

TrainResult train(const DenseCorpus& corpus, std::size_t d, std::size_t h, std::size_t k,
                  const TrainConfig& config) {
    check_dims(d, h, k);
    if (corpus.dim() != d) {
        throw DimensionMismatch("corpus has dim " + std::to_string(corpus.dim()) + ", expected d=" +
                                std::to_string(d));
    }
    return train(corpus, init_params<float>(d, h, k, config.seed), config);
}

TrainResult train(const DenseCorpus& corpus, SaeParams<float> initial, const TrainConfig& config) {
    validate_config(config);
    validate_params(initial);
    if (corpus.dim() != initial.dim_in) {
        throw DimensionMismatch("corpus has dim " + std::to_string(corpus.dim()) + ", model expects d=" +
                                std::to_string(initial.dim_in));
    }
    const std::size_t n = corpus.n_items();
    const auto holdout = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(n)));
    if (holdout >= n) throw InvalidArgument("holdout leaves no training rows");
    const std::size_t threads = resolve_threads(config.threads);

    TrainResult result{std::move(initial), {}};
    SaeParams<float>& params = result.params;
    TrainReport& report = result.report;
    report.holdout_rows = holdout;
    const auto holdout_rows = corpus.data.bottomRows(static_cast<Eigen::Index>(holdout));
    if (holdout > 0) {
        report.initial_holdout_loss = combined_loss(params, holdout_rows, config.aux_weight, threads).combined;
    }

    BatchStream batches(corpus, config.batch_size, config.seed * 0x9E3779B97F4A7C15ULL + 1, n - holdout);
    Adam<float> adam(params, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    std::vector<std::int64_t> last_fired(params.dim_latent, -1);
    report.steps.reserve(config.steps);

    for (std::size_t step = 1; step <= config.steps; ++step) {
        const auto started = std::chrono::steady_clock::now();
        const RowMatrixXf batch = batches.next();
        auto pass = backward(params, batch, config.aux_weight, threads);
        check_finite(pass.loss, step);
        adam.step(params, pass.grads);
        normalize_atoms(params);
        if (!params.w_enc.allFinite() || !params.b_enc.allFinite() || !params.w_dec.allFinite()) {
            throw NumericalError("non-finite parameters after step " + std::to_string(step));
        }
        for (std::size_t j = 0; j < params.dim_latent; ++j) {
            if (pass.fired[j]) last_fired[j] = static_cast<std::int64_t>(step);
        }
        StepRecord record;
        record.step = step;
        record.loss_k = pass.loss.loss_k;
        record.loss_4k = pass.loss.loss_4k;
        record.combined = pass.loss.combined;
        record.dead_latents = dead_latent_count(last_fired, static_cast<std::int64_t>(step), config.dead_window);
        record.elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        report.steps.push_back(record);
    }

    if (holdout > 0) {
        const auto final_loss = combined_loss(params, holdout_rows, config.aux_weight, threads);
        report.final_holdout_loss = final_loss.combined;
        report.final_holdout_cosine = 1.0 - static_cast<double>(final_loss.loss_k);
    }
    return result;
}

void write_train_report(const TrainReport& report, std::ostream& out,
                        const std::map<std::string, std::string>& metadata) {
    out << "step\tloss_k\tloss_4k\tcombined\tdead_count\tms\n";
    out << std::setprecision(9);
    for (const auto& r : report.steps) {
        out << r.step << '\t' << r.loss_k << '\t' << r.loss_4k << '\t' << r.combined << '\t' << r.dead_latents
            << '\t' << std::fixed << std::setprecision(3) << r.elapsed_ms << std::defaultfloat
            << std::setprecision(9) << '\n';
    }
    out << "# holdout_rows = " << report.holdout_rows << '\n';
    if (report.initial_holdout_loss) out << "# initial_holdout_loss = " << *report.initial_holdout_loss << '\n';
    if (report.final_holdout_loss) out << "# final_holdout_loss = " << *report.final_holdout_loss << '\n';
    if (report.final_holdout_cosine) out << "# final_holdout_cosine = " << *report.final_holdout_cosine << '\n';
    for (const auto& [key, value] : metadata) out << "# " << key << " = " << value << '\n';
}

}  // namespace compressae
