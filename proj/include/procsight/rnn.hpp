#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "procsight/featurize.hpp"
#include "procsight/stamp.hpp"

namespace procsight {

enum class CellKind { lstm, gru };

const char* to_string(CellKind cell) noexcept;
CellKind parse_cell_kind(std::string_view text);

/// Gate count: LSTM 4 (input, forget, candidate, output), GRU 3 (update, reset, candidate).
constexpr std::size_t gate_count(CellKind cell) noexcept { return cell == CellKind::lstm ? 4 : 3; }

/// All trainable parameters in one contiguous buffer:
///   W     [G*H x I]   input -> gates, gate-major rows
///   U     [G*H x H]   hidden -> gates
///   b     [G*H]
///   out_w [H]
///   out_b [1]
/// The same layout holds gradients and optimizer moments.
class RnnParams {
public:
    RnnParams() = default;
    RnnParams(CellKind cell, std::size_t input_width, std::size_t hidden_width);

    CellKind cell() const noexcept { return cell_; }
    std::size_t input_width() const noexcept { return input_; }
    std::size_t hidden_width() const noexcept { return hidden_; }
    std::size_t gates() const noexcept { return gate_count(cell_); }

    std::span<double> all() noexcept { return data_; }
    std::span<const double> all() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> W() noexcept { return slice(0, w_size()); }
    std::span<double> U() noexcept { return slice(w_size(), u_size()); }
    std::span<double> b() noexcept { return slice(w_size() + u_size(), gates() * hidden_); }
    std::span<double> out_w() noexcept { return slice(w_size() + u_size() + gates() * hidden_, hidden_); }
    double& out_b() noexcept { return data_.back(); }

    std::span<const double> W() const noexcept { return cslice(0, w_size()); }
    std::span<const double> U() const noexcept { return cslice(w_size(), u_size()); }
    std::span<const double> b() const noexcept { return cslice(w_size() + u_size(), gates() * hidden_); }
    std::span<const double> out_w() const noexcept {
        return cslice(w_size() + u_size() + gates() * hidden_, hidden_);
    }
    double out_b() const noexcept { return data_.back(); }

    /// Named tensors for serialization: {name, rows, cols, data}.
    struct TensorView {
        std::string_view name;
        std::size_t rows;
        std::size_t cols;
        std::span<const double> data;
    };
    std::vector<TensorView> tensors() const;

    bool same_shape(const RnnParams& other) const noexcept {
        return cell_ == other.cell_ && input_ == other.input_ && hidden_ == other.hidden_;
    }

    bool operator==(const RnnParams&) const = default;

private:
    std::size_t w_size() const noexcept { return gates() * hidden_ * input_; }
    std::size_t u_size() const noexcept { return gates() * hidden_ * hidden_; }
    std::span<double> slice(std::size_t off, std::size_t n) noexcept { return {data_.data() + off, n}; }
    std::span<const double> cslice(std::size_t off, std::size_t n) const noexcept {
        return {data_.data() + off, n};
    }

    CellKind cell_ = CellKind::gru;
    std::size_t input_ = 0;
    std::size_t hidden_ = 0;
    std::vector<double> data_;
};

using Gradients = RnnParams;

inline constexpr int kModelFormatVersion = 1;

struct RnnModel {
    RnnParams params;
    SchemaId schema = SchemaId::event_only_5;
    NormalizationStats normalization; // machine schema only
    int format_version = kModelFormatVersion;
    ArtifactStamp stamp;

    bool operator==(const RnnModel&) const = default;
};

/// Builds an all-zero model whose input width matches the schema.
RnnModel make_model(CellKind cell, SchemaId schema, std::size_t hidden_width);

/// Throws Error(shape) if dimensions are inconsistent or Error(numeric) if any
/// parameter is non-finite.
void validate_model(const RnnModel& model);

// ---------------------------------------------------------------------------
// Single-step cells

/// GRU: z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
/// n = tanh(Wn x + Un (r*h) + bn), h' = (1 - z)*h + z*n.
std::vector<double> gru_forward(std::span<const double> x, std::span<const double> h_prev, const RnnParams& params);

/// LSTM: i, f, o = s(.), g = tanh(.), c' = f*c + i*g, h' = o*tanh(c').
/// Returns (h', c').
std::pair<std::vector<double>, std::vector<double>> lstm_forward(std::span<const double> x,
                                                                 std::span<const double> h_prev,
                                                                 std::span<const double> c_prev,
                                                                 const RnnParams& params);

// ---------------------------------------------------------------------------
// Sequence model

/// sigma(out_w . h_T + out_b) after running the cell from a zero state over
/// every row. Throws Error(schema) on schema mismatch, Error(precondition) on
/// an empty sequence and NumericError naming the step on non-finite state.
double predict(const RnnModel& model, const FeatureSequence& seq);

inline constexpr double kDecisionThreshold = 0.5;

/// Malicious iff p strictly exceeds 0.5.
constexpr Label classify_probability(double p) noexcept {
    return p > kDecisionThreshold ? Label::malicious : Label::benign;
}
Label classify(const RnnModel& model, const FeatureSequence& seq);

/// Length-padded batch; mask[b*steps + t] is 1 for real rows, 0 for padding.
struct PaddedBatch {
    std::size_t batch = 0;
    std::size_t steps = 0;
    std::size_t width = 0;
    SchemaId schema = SchemaId::event_only_5;
    std::vector<double> values; // [batch][steps][width]
    std::vector<std::uint8_t> mask;

    std::span<const double> row(std::size_t b, std::size_t t) const {
        return {values.data() + (b * steps + t) * width, width};
    }
};

/// Pads to the longest member (or min_steps, whichever is larger).
PaddedBatch pad_batch(std::span<const FeatureSequence* const> seqs, std::size_t min_steps = 0);

/// Batched inference; masked steps carry state through unchanged, so each
/// output is bitwise equal to predict() on the unpadded sequence.
std::vector<double> predict_batch(const RnnModel& model, const PaddedBatch& batch);

inline constexpr double kProbabilityClamp = 1e-12;

/// Binary cross-entropy with p clamped to [1e-12, 1 - 1e-12].
double bce_loss(double p, double y);

double label_target(Label label);

struct LossAndGradients {
    double loss = 0.0; // mean BCE over the batch
    Gradients grads;   // mean over the batch
};

/// Backpropagation through time. Targets come from labels (malicious = 1).
/// Throws Error(precondition) for an empty batch.
LossAndGradients backward(const RnnModel& model, std::span<const FeatureSequence* const> batch);
LossAndGradients backward(const RnnModel& model, const PaddedBatch& batch, std::span<const double> targets);

/// Mean BCE over the batch without gradients (finite-difference oracle support).
double batch_loss(const RnnModel& model, std::span<const FeatureSequence* const> batch);

// ---------------------------------------------------------------------------
// Optimizer and training

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t hidden_width = 64;
    CellKind cell = CellKind::gru;

    /// Throws Error(precondition) when out of range.
    void validate() const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update at step index t (>= 1); advances state.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, std::uint64_t t,
               const TrainConfig& config);

/// Seeded uniform initialization in [-1/sqrt(H), 1/sqrt(H)].
void initialize_params(RnnParams& params, std::uint64_t seed);

struct TrainResult {
    RnnModel model;
    std::vector<double> loss_trace; // mean training loss per epoch
};

/// Trains on sequences sharing one schema with both classes present.
/// Batches are drawn from length buckets, padded and masked.
TrainResult train(std::span<const FeatureSequence> dataset, const TrainConfig& config);

} // namespace procsight
