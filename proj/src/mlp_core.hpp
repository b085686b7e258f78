#pragma once

// Shared layer arithmetic for forward evaluation and jets, so both paths
// produce identical bits.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <Eigen/Core>

#include "hjinr/network.hpp"
#include "hjinr/tape.hpp"

namespace hjinr::detail {

Eigen::MatrixXd affine(const MlpParams& params, std::size_t layer, const Eigen::MatrixXd& in);

/// Throws NumericalError naming the layer.
void check_finite(const Eigen::MatrixXd& m, std::size_t layer, const char* what);

struct ActivationJet {
  double value;
  double slope;
  double curvature;
};

inline ActivationJet activation_jet(Activation a, double beta, double v) {
  if (a == Activation::Identity) {
    return {v, 1.0, 0.0};
  }
  const double z = beta * v;
  const double e = std::exp(-std::abs(z));
  const double s = z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  return {(std::max(z, 0.0) + std::log1p(e)) / beta, s, beta * s * (1.0 - s)};
}

/// Elementwise activation of a pre-activation block. slope and curvature
/// are filled when non-null. Forward evaluation and jets both call this
/// routine, so their values agree bit for bit.
inline void activate(Activation a, double beta, const Eigen::MatrixXd& pre, Eigen::MatrixXd& value,
                     Eigen::MatrixXd* slope = nullptr, Eigen::MatrixXd* curvature = nullptr) {
  if (a == Activation::Identity) {
    value = pre;
    if (slope != nullptr) slope->setOnes(pre.rows(), pre.cols());
    if (curvature != nullptr) curvature->setZero(pre.rows(), pre.cols());
    return;
  }
  value.resize(pre.rows(), pre.cols());
  if (slope != nullptr) slope->resize(pre.rows(), pre.cols());
  if (curvature != nullptr) curvature->resize(pre.rows(), pre.cols());
  using Map = Eigen::Map<Eigen::ArrayXd>;
  using ConstMap = Eigen::Map<const Eigen::ArrayXd>;
  // Cache-sized blocks keep the temporaries small.
  constexpr Eigen::Index kBlock = 1024;
  const Eigen::Index n = pre.size();
  const double inv_beta = 1.0 / beta;
  for (Eigen::Index off = 0; off < n; off += kBlock) {
    const Eigen::Index len = std::min(kBlock, n - off);
    const Eigen::ArrayXd z = beta * ConstMap(pre.data() + off, len);
    const Eigen::ArrayXd pos = z.max(0.0);
    const Eigen::ArrayXd en = z.min(0.0).exp();  // exp(min(z, 0))
    const Eigen::ArrayXd e = en * (-pos).exp();  // exp(-|z|)
    const Eigen::ArrayXd u = 1.0 + e;
    const Eigen::ArrayXd r = u.inverse();
    // log1p(e) = log(u) - ((u - 1) - e) / u to within rounding.
    Map(value.data() + off, len) = (pos + u.log() - ((u - 1.0) - e) * r) * inv_beta;
    if (slope != nullptr) Map(slope->data() + off, len) = en * r;
    if (curvature != nullptr) Map(curvature->data() + off, len) = beta * e * r.square();
  }
}

}  // namespace hjinr::detail
