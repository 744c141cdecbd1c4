#include <algorithm>
#include <cmath>
#include <numeric>

#include "procsight/error.hpp"
#include "procsight/kernels.hpp"
#include "procsight/rng.hpp"
#include "procsight/rnn.hpp"

namespace procsight {

void TrainConfig::validate() const {
    require(learning_rate > 0 && std::isfinite(learning_rate), ErrorKind::precondition, "learning_rate must be > 0");
    require(epochs >= 1, ErrorKind::precondition, "epochs must be >= 1");
    require(batch_size >= 1, ErrorKind::precondition, "batch_size must be >= 1");
    require(hidden_width >= 1, ErrorKind::precondition, "hidden_width must be >= 1");
    require(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1, ErrorKind::precondition,
            "adam betas must lie in (0, 1)");
    require(epsilon > 0, ErrorKind::precondition, "adam epsilon must be > 0");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, std::uint64_t t,
               const TrainConfig& config) {
    require(t >= 1, ErrorKind::precondition, "adam step index must be >= 1");
    require(grads.size() == params.size() && state.m.size() == params.size() && state.v.size() == params.size(),
            ErrorKind::shape, "adam: parameter, gradient and moment sizes differ");
    const kernels::AdamCoeffs coeffs{
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
        1.0 - std::pow(config.beta1, static_cast<double>(t)),
        1.0 - std::pow(config.beta2, static_cast<double>(t)),
    };
    kernels::active().adam_update(params.data(), state.m.data(), state.v.data(), grads.data(), params.size(), coeffs);
    state.step = t;
}

void initialize_params(RnnParams& params, std::uint64_t seed) {
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(params.hidden_width()));
    for (double& w : params.all()) w = rng.uniform(-bound, bound);
}

namespace {

// Power-of-two length buckets keep padding within a factor of two.
std::size_t length_bucket(std::size_t steps) {
    std::size_t b = 0;
    while ((std::size_t{1} << (b + 1)) <= steps) ++b;
    return b;
}

} // namespace

TrainResult train(std::span<const FeatureSequence> dataset, const TrainConfig& config) {
    config.validate();
    require(!dataset.empty(), ErrorKind::precondition, "training set is empty");
    const SchemaId schema = dataset.front().schema;
    std::size_t positives = 0;
    for (const FeatureSequence& s : dataset) {
        require(s.schema == schema, ErrorKind::schema, "training set mixes feature schemas");
        require(!s.empty(), ErrorKind::precondition, "training sequence '" + s.source_id + "' is empty");
        positives += label_target(s.label) > 0.5 ? 1 : 0;
    }
    if (positives == 0 || positives == dataset.size())
        fail(ErrorKind::precondition, "training set contains a single class");

    Rng rng(config.seed);
    TrainResult result;
    result.model = make_model(config.cell, schema, config.hidden_width);
    initialize_params(result.model.params, rng.next_u64());

    RnnParams& params = result.model.params;
    AdamState adam(params.size());
    std::uint64_t step = 0;

    std::vector<std::size_t> order(dataset.size());
    std::vector<const FeatureSequence*> members;
    std::vector<double> targets;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return length_bucket(dataset[a].steps()) < length_bucket(dataset[b].steps());
        });

        // Cut batches inside each bucket, then visit batches in random order.
        std::vector<std::pair<std::size_t, std::size_t>> batches;
        for (std::size_t begin = 0; begin < order.size();) {
            const std::size_t bucket = length_bucket(dataset[order[begin]].steps());
            std::size_t end = begin;
            while (end < order.size() && end - begin < config.batch_size &&
                   length_bucket(dataset[order[end]].steps()) == bucket)
                ++end;
            batches.emplace_back(begin, end);
            begin = end;
        }
        rng.shuffle(std::span<std::pair<std::size_t, std::size_t>>(batches));

        double epoch_loss = 0.0;
        for (const auto& [begin, end] : batches) {
            members.clear();
            targets.clear();
            for (std::size_t i = begin; i < end; ++i) {
                members.push_back(&dataset[order[i]]);
                targets.push_back(label_target(dataset[order[i]].label));
            }
            const PaddedBatch batch = pad_batch(members);
            LossAndGradients lg;
            try {
                lg = backward(result.model, batch, targets);
            } catch (const NumericError& e) {
                throw NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what(),
                                   static_cast<long>(epoch));
            }
            epoch_loss += lg.loss * static_cast<double>(end - begin);
            adam_step(params.all(), lg.grads.all(), adam, ++step, config);
        }
        epoch_loss /= static_cast<double>(dataset.size());
        if (!std::isfinite(epoch_loss))
            throw NumericError("training loss is non-finite in epoch " + std::to_string(epoch),
                               static_cast<long>(epoch));
        result.loss_trace.push_back(epoch_loss);
    }
    validate_model(result.model);
    return result;
}

} // namespace procsight
