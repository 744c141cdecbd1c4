#include <cmath>

#include "cell_engine.hpp"
#include "procsight/error.hpp"
#include "procsight/rnn.hpp"

namespace procsight {

const char* to_string(CellKind cell) noexcept { return cell == CellKind::lstm ? "lstm" : "gru"; }

CellKind parse_cell_kind(std::string_view text) {
    if (text == "lstm") return CellKind::lstm;
    if (text == "gru") return CellKind::gru;
    fail(ErrorKind::config, "unknown cell kind '" + std::string(text) + "'");
}

RnnParams::RnnParams(CellKind cell, std::size_t input_width, std::size_t hidden_width)
    : cell_(cell), input_(input_width), hidden_(hidden_width) {
    const std::size_t G = gate_count(cell);
    data_.assign(G * hidden_ * input_ + G * hidden_ * hidden_ + G * hidden_ + hidden_ + 1, 0.0);
}

std::vector<RnnParams::TensorView> RnnParams::tensors() const {
    const std::size_t GH = gates() * hidden_;
    return {
        {"W", GH, input_, W()},
        {"U", GH, hidden_, U()},
        {"b", GH, 1, b()},
        {"out_w", 1, hidden_, out_w()},
        {"out_b", 1, 1, cslice(data_.size() - 1, 1)},
    };
}

RnnModel make_model(CellKind cell, SchemaId schema, std::size_t hidden_width) {
    require(hidden_width >= 1, ErrorKind::precondition, "hidden width must be >= 1");
    RnnModel m;
    m.params = RnnParams(cell, schema_width(schema), hidden_width);
    m.schema = schema;
    return m;
}

void validate_model(const RnnModel& model) {
    const RnnParams& p = model.params;
    if (p.input_width() != schema_width(model.schema))
        fail(ErrorKind::shape, "model input width " + std::to_string(p.input_width()) + " does not match schema " +
                                   to_string(model.schema));
    if (p.hidden_width() == 0) fail(ErrorKind::shape, "model hidden width is 0");
    const RnnParams expected(p.cell(), p.input_width(), p.hidden_width());
    if (expected.size() != p.size()) fail(ErrorKind::shape, "parameter buffer size is inconsistent");
    if (!detail::all_finite(p.all().data(), p.size())) fail(ErrorKind::numeric, "model has non-finite parameters");
    if (!model.normalization.empty() && (model.normalization.mean.size() != p.input_width() ||
                                         model.normalization.stddev.size() != p.input_width()))
        fail(ErrorKind::shape, "normalization statistics do not match input width");
}

std::vector<double> gru_forward(std::span<const double> x, std::span<const double> h_prev, const RnnParams& params) {
    require(params.cell() == CellKind::gru, ErrorKind::shape, "gru_forward on non-GRU parameters");
    require(x.size() == params.input_width() && h_prev.size() == params.hidden_width(), ErrorKind::shape,
            "gru_forward: input or hidden size does not match parameters");
    const std::size_t H = params.hidden_width();
    std::vector<double> act(3 * H), rh(H), h(H);
    detail::cell_step(params, kernels::active(), x.data(), h_prev.data(), nullptr, {act.data(), nullptr, rh.data()},
                      h.data(), nullptr);
    return h;
}

std::pair<std::vector<double>, std::vector<double>> lstm_forward(std::span<const double> x,
                                                                 std::span<const double> h_prev,
                                                                 std::span<const double> c_prev,
                                                                 const RnnParams& params) {
    require(params.cell() == CellKind::lstm, ErrorKind::shape, "lstm_forward on non-LSTM parameters");
    const std::size_t H = params.hidden_width();
    require(x.size() == params.input_width() && h_prev.size() == H && c_prev.size() == H, ErrorKind::shape,
            "lstm_forward: input, hidden or cell size does not match parameters");
    std::vector<double> act(4 * H), tanh_c(H), h(H), c(H);
    detail::cell_step(params, kernels::active(), x.data(), h_prev.data(), c_prev.data(),
                      {act.data(), tanh_c.data(), nullptr}, h.data(), c.data());
    return {std::move(h), std::move(c)};
}

namespace {

void check_schema(const RnnModel& model, SchemaId schema, std::size_t width) {
    if (schema != model.schema || width != model.params.input_width())
        fail(ErrorKind::schema, std::string("sequence schema ") + to_string(schema) + " does not match model schema " +
                                    to_string(model.schema));
}

// Runs one sequence from a zero state. Row t is read only if `present(t)`.
template <typename RowFn, typename PresentFn>
double run_sequence(const RnnModel& model, std::size_t steps, RowFn row, PresentFn present) {
    const RnnParams& p = model.params;
    const auto& k = kernels::active();
    const std::size_t H = p.hidden_width();
    std::vector<double> h(H, 0.0), c(H, 0.0), h_next(H), c_next(H), act(p.gates() * H), tanh_c(H), rh(H);
    for (std::size_t t = 0; t < steps; ++t) {
        if (!present(t)) continue;
        detail::cell_step(p, k, row(t), h.data(), c.data(), {act.data(), tanh_c.data(), rh.data()}, h_next.data(),
                          c_next.data());
        if (!detail::all_finite(h_next.data(), H) ||
            (p.cell() == CellKind::lstm && !detail::all_finite(c_next.data(), H)))
            throw NumericError("non-finite hidden state at step " + std::to_string(t), static_cast<long>(t));
        h.swap(h_next);
        if (p.cell() == CellKind::lstm) c.swap(c_next);
    }
    const double logit = p.out_b() + k.dot(p.out_w().data(), h.data(), H);
    const double prob = detail::sigmoid(logit);
    if (!std::isfinite(prob)) throw NumericError("non-finite output", static_cast<long>(steps));
    return prob;
}

} // namespace

double predict(const RnnModel& model, const FeatureSequence& seq) {
    check_schema(model, seq.schema, seq.width);
    require(!seq.empty(), ErrorKind::precondition, "predict on an empty sequence");
    return run_sequence(
        model, seq.steps(), [&](std::size_t t) { return seq.row(t).data(); }, [](std::size_t) { return true; });
}

Label classify(const RnnModel& model, const FeatureSequence& seq) {
    return classify_probability(predict(model, seq));
}

PaddedBatch pad_batch(std::span<const FeatureSequence* const> seqs, std::size_t min_steps) {
    PaddedBatch batch;
    require(!seqs.empty(), ErrorKind::precondition, "pad_batch on an empty batch");
    batch.batch = seqs.size();
    batch.schema = seqs.front()->schema;
    batch.width = seqs.front()->width;
    batch.steps = min_steps;
    for (const FeatureSequence* s : seqs) {
        require(s->schema == batch.schema && s->width == batch.width, ErrorKind::schema,
                "pad_batch over mixed schemas");
        batch.steps = std::max(batch.steps, s->steps());
    }
    batch.values.assign(batch.batch * batch.steps * batch.width, 0.0);
    batch.mask.assign(batch.batch * batch.steps, 0);
    for (std::size_t b = 0; b < seqs.size(); ++b) {
        const FeatureSequence& s = *seqs[b];
        std::copy(s.values.begin(), s.values.end(), batch.values.begin() + static_cast<std::ptrdiff_t>(
                                                                               b * batch.steps * batch.width));
        std::fill_n(batch.mask.begin() + static_cast<std::ptrdiff_t>(b * batch.steps), s.steps(), 1);
    }
    return batch;
}

std::vector<double> predict_batch(const RnnModel& model, const PaddedBatch& batch) {
    check_schema(model, batch.schema, batch.width);
    std::vector<double> out;
    out.reserve(batch.batch);
    for (std::size_t b = 0; b < batch.batch; ++b) {
        const std::uint8_t* mask = batch.mask.data() + b * batch.steps;
        require(std::find(mask, mask + batch.steps, 1) != mask + batch.steps, ErrorKind::precondition,
                "predict_batch: member " + std::to_string(b) + " has no unmasked steps");
        out.push_back(run_sequence(
            model, batch.steps, [&](std::size_t t) { return batch.row(b, t).data(); },
            [&](std::size_t t) { return mask[t] != 0; }));
    }
    return out;
}

double bce_loss(double p, double y) {
    const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double label_target(Label label) {
    switch (label) {
    case Label::malicious: return 1.0;
    case Label::benign: return 0.0;
    case Label::unknown: break;
    }
    fail(ErrorKind::precondition, "training sample has no label");
}

} // namespace procsight
