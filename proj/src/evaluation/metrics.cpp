#include "s2no/evaluation/metrics.hpp"

#include <set>
#include <sstream>

namespace s2no::evaluation {

SampleMetrics sample_metrics(const Mat& predicted, const Mat& reference) {
  require(predicted.rows() == reference.rows() && predicted.cols() == reference.cols(),
          "metrics: prediction and reference shapes differ");
  require(reference.rows() > 0 && reference.cols() == 3,
          "metrics: fields must be n x 3 with n > 0");
  const Mat err = predicted - reference;
  const double denom = reference.norm();
  require(denom > 0.0, "metrics: reference field has zero norm");
  SampleMetrics m;
  m.l2_pct = 100.0 * err.norm() / denom;
  m.mae = err.cwiseAbs().mean();
  m.mmax = err.rowwise().norm().maxCoeff();
  return m;
}

MetricReport evaluate_predictor(const oracle::Dataset& test, const Predictor& predict,
                                const std::string& model_id) {
  require(!test.samples.empty(), "metrics: empty test set");
  MetricReport report;
  report.model_id = model_id;
  report.dataset_id = test.geometry_id;
  report.per_sample.reserve(test.samples.size());
  for (const auto& sample : test.samples) {
    const Mat predicted = predict(sample);
    const Mat reference = sample.u.cast<double>();
    report.per_sample.push_back(sample_metrics(predicted, reference));
  }
  const double inv = 1.0 / static_cast<double>(report.per_sample.size());
  for (const auto& m : report.per_sample) {
    report.l2_pct += m.l2_pct * inv;
    report.mae += m.mae * inv;
    report.mmax += m.mmax * inv;
  }
  return report;
}

void require_disjoint(const oracle::Dataset& train, const oracle::Dataset& test) {
  std::set<std::uint64_t> seen;
  for (const auto& s : train.samples) seen.insert(oracle::omega_hash(s.omega));
  for (const auto& s : test.samples) {
    if (seen.count(oracle::omega_hash(s.omega)) != 0) {
      fail("metrics: test sample shares a material layout with the training set");
    }
  }
}

std::string report_csv(const MetricReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "sample,l2_pct,mae_mm,mmax_mm\n";
  for (std::size_t i = 0; i < r.per_sample.size(); ++i) {
    const auto& m = r.per_sample[i];
    out << i << "," << m.l2_pct << "," << m.mae << "," << m.mmax << "\n";
  }
  return out.str();
}

std::string report_summary(const MetricReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << r.model_id << " on " << r.dataset_id << " (" << r.samples() << " samples): "
      << "L2 " << r.l2_pct << "%, MAE " << r.mae << " mm, M-Max " << r.mmax << " mm";
  return out.str();
}

}  // namespace s2no::evaluation
