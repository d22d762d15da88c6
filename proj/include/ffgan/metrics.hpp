#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "ffgan/discriminator.hpp"

namespace ffgan {

// Row-per-sample feature matrix.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int64_t count = 0;
};

// Runs the frozen encoder in eval mode without gradients, in chunks.
FeatureMatrix extract_features(const torch::Tensor& images, ImageEncoder& extractor, int64_t chunk = 64);

FeatureMatrix to_feature_matrix(const torch::Tensor& features);

// Sample mean and unbiased covariance (divisor count - 1), symmetrized.
GaussianStats gaussian_stats(const FeatureMatrix& features);

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}). The trace of the root
// is taken from the eigenvalues of S_a^{1/2} S_b S_a^{1/2}, clamped at zero.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

struct RetrievalPool {
  Eigen::VectorXd query;
  std::vector<Eigen::VectorXd> matched;
  std::vector<Eigen::VectorXd> mismatched;
};

// Fraction of pools whose R matched candidates strictly outrank every
// mismatched one by cosine similarity (mismatched candidates win ties).
double r_precision(const std::vector<RetrievalPool>& pools, int r = 1);

}  // namespace ffgan
