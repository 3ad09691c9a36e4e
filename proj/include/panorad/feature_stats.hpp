#pragma once

#include <Eigen/Core>

namespace panorad {

/// Gaussian summary of pooled latent feature vectors.
struct FeatureStats {
    long count = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    Eigen::Index dim() const { return mean.size(); }
};

}  // namespace panorad
