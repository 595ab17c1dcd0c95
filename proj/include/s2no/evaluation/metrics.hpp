#pragma once

#include "s2no/oracle/dataset.hpp"

#include <functional>

namespace s2no::evaluation {

/// The three error measures for one sample, physical units on absolute
/// coordinates: relative L2 in percent, component-wise mean absolute error in
/// mm, and the maximum per-point Euclidean error in mm.
struct SampleMetrics {
  double l2_pct = 0.0;
  double mae = 0.0;
  double mmax = 0.0;
};

SampleMetrics sample_metrics(const Mat& predicted, const Mat& reference);

/// Test-set report. Every aggregate is the arithmetic mean of the per-sample
/// values; in particular the M-Max aggregate is the mean over samples of the
/// per-sample maximum error.
struct MetricReport {
  std::string model_id;
  std::string dataset_id;
  std::vector<SampleMetrics> per_sample;
  double l2_pct = 0.0;
  double mae = 0.0;
  double mmax = 0.0;

  int samples() const { return static_cast<int>(per_sample.size()); }
};

using Predictor = std::function<Mat(const oracle::Sample&)>;

MetricReport evaluate_predictor(const oracle::Dataset& test, const Predictor& predict,
                                const std::string& model_id = "model");

/// Errors if any test-set material layout also appears in the training set.
void require_disjoint(const oracle::Dataset& train, const oracle::Dataset& test);

/// Header line plus one row per sample (sample, l2_pct, mae_mm, mmax_mm).
std::string report_csv(const MetricReport& r);

std::string report_summary(const MetricReport& r);

}  // namespace s2no::evaluation
