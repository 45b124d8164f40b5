// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_METRICS_HPP
#define WSIM_METRICS_HPP

#include <cstddef>
#include <vector>

namespace wsim::metrics {

// 10 log10(max^2 / MSE); identical inputs report the 99 dB cap.
double psnr(const std::vector<double>& x, const std::vector<double>& x_hat, double max_value = 1.0);

double mse_metric(const std::vector<double>& x, const std::vector<double>& x_hat);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// Sentence BLEU: geometric mean of modified 1..4-gram precisions times the
// brevity penalty. No smoothing: any zero-count order yields 0. Candidates
// shorter than four tokens use the available orders only.
double bleu(const std::vector<int>& candidate, const std::vector<int>& reference);

// Mann-Whitney pair statistic with half credit for ties.
double auc_roc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores);

} // namespace wsim::metrics

#endif
