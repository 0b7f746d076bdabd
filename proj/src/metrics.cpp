#include "lang2face/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "lang2face/errors.hpp"

namespace lang2face {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (0.01 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_kernel() {
  static const std::vector<double> kKernel = [] {
    std::vector<double> k(kWin);
    double sum = 0;
    for (int i = 0; i < kWin; ++i) {
      double d = i - (kWin - 1) / 2.0;
      k[size_t(i)] = std::exp(-d * d / (2 * kSigma * kSigma));
      sum += k[size_t(i)];
    }
    for (double& v : k) v /= sum;
    return k;
  }();
  return kKernel;
}

}  // namespace

double ssim(const Tensor<float>& x, const Tensor<float>& y) {
  if (!x.same_shape(y)) throw ShapeMismatch("ssim: shape mismatch");
  if (x.rank() != 3 || x.shape[0] != 3)
    throw ShapeMismatch("ssim expects {3,H,W}");
  int H = x.shape[1], W = x.shape[2];
  if (H < kWin || W < kWin)
    throw ShapeMismatch("ssim: image smaller than the 11-tap window");
  const auto& k = gaussian_kernel();

  double total = 0;
  int count = 0;
  std::vector<double> xw(kWin * kWin), yw(kWin * kWin), wgt(kWin * kWin);
  for (int a = 0; a < kWin; ++a)
    for (int b = 0; b < kWin; ++b) wgt[size_t(a * kWin + b)] = k[size_t(a)] * k[size_t(b)];

  for (int c = 0; c < 3; ++c)
    for (int oy = 0; oy + kWin <= H; ++oy)
      for (int ox = 0; ox + kWin <= W; ++ox) {
        double mx = 0, my = 0;
        for (int a = 0; a < kWin; ++a)
          for (int b = 0; b < kWin; ++b) {
            double w = wgt[size_t(a * kWin + b)];
            double xv = (double(x.at(c, oy + a, ox + b)) + 1.0) / 2.0;
            double yv = (double(y.at(c, oy + a, ox + b)) + 1.0) / 2.0;
            xw[size_t(a * kWin + b)] = xv;
            yw[size_t(a * kWin + b)] = yv;
            mx += w * xv;
            my += w * yv;
          }
        double vx = 0, vy = 0, cov = 0;
        for (int i = 0; i < kWin * kWin; ++i) {
          double w = wgt[size_t(i)];
          vx += w * (xw[size_t(i)] - mx) * (xw[size_t(i)] - mx);
          vy += w * (yw[size_t(i)] - my) * (yw[size_t(i)] - my);
          cov += w * (xw[size_t(i)] - mx) * (yw[size_t(i)] - my);
        }
        double num = (2 * mx * my + kC1) * (2 * cov + kC2);
        double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
        total += num / den;
        ++count;
      }
  return total / count;
}

namespace {

Eigen::MatrixXd covariance(const std::vector<std::vector<double>>& f,
                           Eigen::VectorXd& mean) {
  int n = int(f.size());
  int d = int(f[0].size());
  mean = Eigen::VectorXd::Zero(d);
  for (const auto& row : f)
    for (int j = 0; j < d; ++j) mean[j] += row[size_t(j)];
  mean /= double(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& row : f) {
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v[j] = row[size_t(j)] - mean[j];
    cov.noalias() += v * v.transpose();
  }
  cov /= double(n - 1);
  return cov;
}

// symmetric PSD square root with eigenvalue clipping
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  double max_ev = ev.cwiseAbs().maxCoeff();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-6 * std::max(max_ev, 1.0))
      throw DegenerateCovariance("covariance spectrum significantly negative");
    ev[i] = ev[i] < 1e-10 ? 0.0 : std::sqrt(ev[i]);
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const std::vector<std::vector<double>>& fa,
           const std::vector<std::vector<double>>& fb) {
  if (fa.size() < 2 || fb.size() < 2)
    throw BatchTooSmall("fid needs at least 2 samples per side");
  size_t d = fa[0].size();
  for (const auto& r : fa)
    if (r.size() != d) throw ShapeMismatch("fid: ragged features");
  for (const auto& r : fb)
    if (r.size() != d) throw ShapeMismatch("fid: ragged features");

  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a = covariance(fa, mu_a);
  Eigen::MatrixXd cov_b = covariance(fb, mu_b);

  double mean_term = (mu_a - mu_b).squaredNorm();
  // Tr((Sa Sb)^{1/2}) via the symmetric form sqrt(Sa) Sb sqrt(Sa)
  Eigen::MatrixXd root_a = sqrtm_psd(cov_a);
  Eigen::MatrixXd inner = root_a * cov_b * root_a;
  inner = 0.5 * (inner + inner.transpose());  // enforce symmetry
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  double tr_sqrt = 0;
  double max_ev = es.eigenvalues().cwiseAbs().maxCoeff();
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()[i];
    if (ev < -1e-6 * std::max(max_ev, 1.0))
      throw DegenerateCovariance("product spectrum significantly negative");
    tr_sqrt += ev < 1e-10 ? 0.0 : std::sqrt(ev);
  }
  return mean_term + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
}

}  // namespace lang2face
