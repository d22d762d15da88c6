#include "ffgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ffgan/errors.hpp"

namespace ffgan {
namespace {

constexpr double kEigenClamp = 1e-10;

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd roots = es.eigenvalues().unaryExpr([](double v) { return v > kEigenClamp ? std::sqrt(v) : 0.0; });
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

bool finite(const GaussianStats& s) { return s.mean.allFinite() && s.cov.allFinite(); }

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double denom = a.norm() * b.norm();
  return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

}  // namespace

FeatureMatrix to_feature_matrix(const torch::Tensor& features) {
  auto t = features.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  if (t.dim() != 2) throw ConfigurationError("to_feature_matrix: expected [count,F]");
  FeatureMatrix m(t.size(0), t.size(1));
  std::copy_n(t.data_ptr<double>(), t.numel(), m.data());
  return m;
}

FeatureMatrix extract_features(const torch::Tensor& images, ImageEncoder& extractor, int64_t chunk) {
  torch::NoGradGuard no_grad;
  const bool was_training = extractor->is_training();
  extractor->eval();
  std::vector<torch::Tensor> parts;
  for (int64_t start = 0; start < images.size(0); start += chunk) {
    parts.push_back(extractor->forward(images.narrow(0, start, std::min(chunk, images.size(0) - start))));
  }
  extractor->train(was_training);
  if (parts.empty()) return FeatureMatrix(0, extractor->d_feature());
  return to_feature_matrix(torch::cat(parts, 0));
}

GaussianStats gaussian_stats(const FeatureMatrix& features) {
  const auto n = features.rows();
  if (n < 2) throw PreconditionError("gaussian_stats: need at least two samples");
  GaussianStats s;
  s.count = n;
  s.mean = features.colwise().mean().transpose();
  Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  s.cov = 0.5 * (cov + cov.transpose());
  return s;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
    throw ConfigurationError("frechet_distance: feature dimensions differ");
  }
  if (!finite(a) || !finite(b)) throw NumericalError("frechet_distance: non-finite statistics");
  const Eigen::MatrixXd root_a = psd_sqrt(a.cov);
  Eigen::MatrixXd inner = root_a * b.cov * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double v = es.eigenvalues()(i);
    if (v > kEigenClamp) trace_root += std::sqrt(v);
  }
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * trace_root;
  return std::max(d, 0.0);
}

double r_precision(const std::vector<RetrievalPool>& pools, int r) {
  if (pools.empty()) throw PreconditionError("r_precision: no pools");
  int64_t hits = 0;
  for (const auto& pool : pools) {
    if (static_cast<int>(pool.matched.size()) < r) throw ConfigurationError("r_precision: fewer matched texts than R");
    std::vector<double> matched;
    for (const auto& m : pool.matched) matched.push_back(cosine(pool.query, m));
    std::sort(matched.begin(), matched.end(), std::greater<>());
    const double weakest_match = matched[static_cast<size_t>(r - 1)];
    double strongest_miss = -std::numeric_limits<double>::infinity();
    for (const auto& m : pool.mismatched) strongest_miss = std::max(strongest_miss, cosine(pool.query, m));
    if (weakest_match > strongest_miss) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pools.size());
}

}  // namespace ffgan
