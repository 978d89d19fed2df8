#include "uvcloth/model/pca.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "uvcloth/error.hpp"

namespace uvcloth::model {

PCASubspace fit_pca(const std::vector<Latent>& latents, int n) {
  if (n < 0) throw DomainError("PCA dimension must be non-negative");
  if (latents.size() < static_cast<std::size_t>(n) + 1) {
    throw DomainError("PCA with " + std::to_string(n) + " dimensions needs at least " +
                      std::to_string(n + 1) + " latents, got " + std::to_string(latents.size()));
  }
  const int N = static_cast<int>(latents.front().size());
  if (n > N) throw DomainError("PCA dimension exceeds the latent dimension");
  const int m = static_cast<int>(latents.size());
  Eigen::MatrixXd X(m, N);
  for (int i = 0; i < m; ++i) {
    if (latents[i].size() != N) throw DimensionError("latents differ in size");
    X.row(i) = latents[i].transpose();
  }
  PCASubspace pca;
  pca.mean = X.colwise().mean().transpose();
  X.rowwise() -= pca.mean.transpose();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = std::max(m, N) * 1e-12 * (sv.size() ? sv(0) : 0.0);
  pca.rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++pca.rank;

  pca.basis = Eigen::MatrixXd::Zero(n, N);
  pca.sigma = Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd& V = svd.matrixV();
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd dir;
    if (j < V.cols()) {
      dir = V.col(j);
    } else {
      // More dimensions than latents: complete with an arbitrary orthonormal
      // direction (Gram-Schmidt against the previous rows).
      dir = Eigen::VectorXd::Zero(N);
      for (int e = 0; e < N && dir.norm() < 0.5; ++e) {
        dir = Eigen::VectorXd::Unit(N, e);
        for (int k = 0; k < j; ++k) dir -= pca.basis.row(k).dot(dir) * pca.basis.row(k).transpose();
      }
      dir.normalize();
    }
    Eigen::Index big;
    dir.cwiseAbs().maxCoeff(&big);
    if (dir(big) < 0) dir = -dir;
    pca.basis.row(j) = dir.transpose();
    if (j < pca.rank && m > 1) pca.sigma(j) = sv(j) / std::sqrt(static_cast<double>(m - 1));
  }
  return pca;
}

Eigen::VectorXd to_params(const PCASubspace& pca, const Latent& z) {
  if (z.size() != pca.latent_dim()) throw DimensionError("latent size does not match the PCA");
  return pca.basis * (z - pca.mean);
}

Latent from_params(const PCASubspace& pca, const Eigen::VectorXd& s) {
  if (s.size() != pca.dims()) throw DimensionError("shape parameter count does not match the PCA");
  return pca.mean + pca.basis.transpose() * s;
}

double reconstruction_error(const PCASubspace& pca, const std::vector<Latent>& latents) {
  if (latents.empty()) return 0.0;
  double sum = 0.0;
  for (const Latent& z : latents) sum += (z - from_params(pca, to_params(pca, z))).squaredNorm();
  return sum / static_cast<double>(latents.size());
}

Eigen::VectorXd interpolate(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolation parameter must lie in [0, 1]");
  if (a.size() != b.size()) throw DimensionError("interpolated parameters differ in size");
  return (1.0 - t) * a + t * b;
}

Eigen::VectorXd sample_variation(const PCASubspace& pca, int j, double c) {
  if (j < 0 || j >= pca.dims()) throw DomainError("variation dimension out of range");
  if (!(std::abs(c) <= 1.0)) throw DomainError("variation is limited to one standard deviation");
  Eigen::VectorXd s = Eigen::VectorXd::Zero(pca.dims());
  s(j) = c * pca.sigma(j);
  return s;
}

}  // namespace uvcloth::model
