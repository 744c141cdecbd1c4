#include <algorithm>
#include <cmath>
#include <numeric>

#include "procsight/error.hpp"
#include "procsight/eval.hpp"
#include "procsight/rng.hpp"

namespace procsight {

ConfusionCounts tally(std::span<const Label> predicted, std::span<const Label> actual) {
    require(predicted.size() == actual.size(), ErrorKind::shape, "tally: prediction and label counts differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        require(predicted[i] != Label::unknown && actual[i] != Label::unknown, ErrorKind::precondition,
                "tally: unknown label");
        const bool pred = predicted[i] == Label::malicious;
        const bool truth = actual[i] == Label::malicious;
        if (pred && truth) ++c.tp;
        else if (!pred && !truth) ++c.tn;
        else if (pred) ++c.fp;
        else ++c.fn;
    }
    return c;
}

MetricRow metrics(const ConfusionCounts& c) {
    require(c.total() > 0, ErrorKind::precondition, "metrics on an empty confusion");
    const auto tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
    const auto fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    MetricRow row;
    row.n = c.total();
    row.accuracy = (tp + tn) / (tp + tn + fp + fn) * 100.0;
    row.precision_degenerate = c.tp + c.fp == 0;
    row.recall_degenerate = c.tp + c.fn == 0;
    row.fpr_degenerate = c.fp + c.tn == 0;
    row.precision = row.precision_degenerate ? 0.0 : tp / (tp + fp);
    row.recall = row.recall_degenerate ? 0.0 : tp / (tp + fn);
    row.fpr = row.fpr_degenerate ? 0.0 : fp / (fp + tn);
    const double pr = row.precision + row.recall;
    row.f1 = pr > 0 ? 2.0 * (row.precision * row.recall) / pr : 0.0;
    return row;
}

Partition split_undersample(std::span<const Label> labels, std::uint64_t seed, double train_fraction) {
    require(train_fraction > 0 && train_fraction < 1, ErrorKind::precondition, "train_fraction must lie in (0, 1)");
    std::vector<std::size_t> malicious, benign;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == Label::malicious) malicious.push_back(i);
        else if (labels[i] == Label::benign) benign.push_back(i);
    }
    if (malicious.empty() || benign.empty())
        fail(ErrorKind::partition, "split needs both classes (malicious " + std::to_string(malicious.size()) +
                                       ", benign " + std::to_string(benign.size()) + ")");

    const std::size_t m = malicious.size();
    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(m) * train_fraction));
    n_train = std::clamp<std::size_t>(n_train, m > 1 ? 1 : 0, m > 1 ? m - 1 : m);
    const std::size_t n_test = m - n_train;
    if (benign.size() < n_train + n_test)
        fail(ErrorKind::partition, "benign pool too small for balancing: need " + std::to_string(n_train) +
                                       " (train) + " + std::to_string(n_test) + " (test) = " +
                                       std::to_string(n_train + n_test) + ", have " + std::to_string(benign.size()));

    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(malicious));
    rng.shuffle(std::span<std::size_t>(benign));

    Partition p;
    p.train.assign(malicious.begin(), malicious.begin() + static_cast<std::ptrdiff_t>(n_train));
    p.train.insert(p.train.end(), benign.begin(), benign.begin() + static_cast<std::ptrdiff_t>(n_train));
    p.test.assign(malicious.begin() + static_cast<std::ptrdiff_t>(n_train), malicious.end());
    p.test.insert(p.test.end(), benign.begin() + static_cast<std::ptrdiff_t>(n_train),
                  benign.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
    p.leftover_benign.assign(benign.begin() + static_cast<std::ptrdiff_t>(n_train + n_test), benign.end());
    std::sort(p.train.begin(), p.train.end());
    std::sort(p.test.begin(), p.test.end());
    std::sort(p.leftover_benign.begin(), p.leftover_benign.end());
    return p;
}

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
    require(k >= 2, ErrorKind::precondition, "kfold needs k >= 2");
    if (n < k)
        fail(ErrorKind::partition, "kfold: " + std::to_string(n) + " samples cannot fill " + std::to_string(k) +
                                       " folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    std::vector<Fold> folds(k);
    std::size_t begin = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].validate.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order.begin() + static_cast<std::ptrdiff_t>(begin + size));
        std::sort(folds[f].validate.begin(), folds[f].validate.end());
        begin += size;
    }
    for (std::size_t f = 0; f < k; ++f) {
        for (std::size_t g = 0; g < k; ++g)
            if (g != f) folds[f].fit.insert(folds[f].fit.end(), folds[g].validate.begin(), folds[g].validate.end());
        std::sort(folds[f].fit.begin(), folds[f].fit.end());
    }
    return folds;
}

} // namespace procsight
