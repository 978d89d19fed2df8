#pragma once

#include <Eigen/Core>
#include <vector>

namespace uvcloth::model {

using Latent = Eigen::VectorXd;

/// Principal subspace of a latent set. Rows of `basis` are orthonormal and
/// ordered by decreasing variance; each row's largest-magnitude component is
/// positive so fits are reproducible.
struct PCASubspace {
  Latent mean;
  Eigen::MatrixXd basis;  // n × N
  Eigen::VectorXd sigma;  // n, sample standard deviation of the projections
  int rank = 0;           // numerical rank of the centered latents

  int dims() const { return static_cast<int>(basis.rows()); }
  int latent_dim() const { return static_cast<int>(mean.size()); }
};

/// Throws DomainError when fewer than n+1 latents are given, n exceeds the
/// latent dimension, or the latents disagree in size. Directions beyond the
/// rank get sigma 0.
PCASubspace fit_pca(const std::vector<Latent>& latents, int n);

Eigen::VectorXd to_params(const PCASubspace& pca, const Latent& z);
Latent from_params(const PCASubspace& pca, const Eigen::VectorXd& s);

/// Mean squared norm of z − from_params(to_params(z)).
double reconstruction_error(const PCASubspace& pca, const std::vector<Latent>& latents);

/// (1 − t)·a + t·b; t outside [0, 1] throws DomainError.
Eigen::VectorXd interpolate(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t);

/// c·sigma_j·e_j. Throws DomainError for j ≥ n or |c| > 1.
Eigen::VectorXd sample_variation(const PCASubspace& pca, int j, double c);

}  // namespace uvcloth::model
