// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/metrics.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace wsim::metrics {

double mse_metric(const std::vector<double>& x, const std::vector<double>& x_hat) {
    if (x.size() != x_hat.size() || x.empty())
        throw std::invalid_argument("mse: size mismatch or empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x_hat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

double psnr(const std::vector<double>& x, const std::vector<double>& x_hat, double max_value) {
    const double m = mse_metric(x, x_hat);
    if (m == 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(max_value * max_value / m));
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw std::invalid_argument("accuracy: size mismatch or empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

static std::map<std::vector<int>, int> ngram_counts(const std::vector<int>& tokens, std::size_t n) {
    std::map<std::vector<int>, int> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        counts[std::vector<int>(tokens.begin() + i, tokens.begin() + i + n)] += 1;
    return counts;
}

double bleu(const std::vector<int>& candidate, const std::vector<int>& reference) {
    if (candidate.empty() || reference.empty())
        throw std::invalid_argument("bleu: empty token sequence");
    const std::size_t max_order = std::min<std::size_t>(4, candidate.size());
    double log_precision_sum = 0.0;
    for (std::size_t n = 1; n <= max_order; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        long clipped = 0, total = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            auto it = ref.find(gram);
            if (it != ref.end()) clipped += std::min(count, it->second);
        }
        if (total == 0 || clipped == 0) return 0.0;
        log_precision_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
    return brevity * std::exp(log_precision_sum / static_cast<double>(max_order));
}

double auc_roc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores) {
    if (positive_scores.empty() || negative_scores.empty())
        throw std::invalid_argument("auc_roc: both score sets must be nonempty");
    double credit = 0.0;
    for (double p : positive_scores)
        for (double n : negative_scores) {
            if (p > n)
                credit += 1.0;
            else if (p == n)
                credit += 0.5;
        }
    return credit / (static_cast<double>(positive_scores.size()) * static_cast<double>(negative_scores.size()));
}

} // namespace wsim::metrics
