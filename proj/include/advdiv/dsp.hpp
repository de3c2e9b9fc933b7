#pragma once

// Pilot-trained gain control and affine MMSE equalization of symbol vectors.

#include <cmath>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "advdiv/error.hpp"
#include "advdiv/frontend.hpp"

namespace advdiv {

struct AgcResult {
  SymbolVectors vectors;
  double gain = 1.0;
};

/// Least-squares scalar gain g = sum|a_k|^2 / sum<w_k, a_k> over the pilots,
/// applied to every symbol vector.
inline AgcResult agc(const SymbolVectors& vectors, const SymbolVectors& pilot_truth, std::size_t n_pilot) {
  if (n_pilot > vectors.size() || n_pilot > pilot_truth.size()) throw BoundsError("AGC pilot span out of range");
  if (vectors.dim() != pilot_truth.dim()) throw ConfigError("AGC dimension mismatch");
  double truth_energy = 0.0;
  double cross = 0.0;
  double received_energy = 0.0;
  for (std::size_t k = 0; k < n_pilot; ++k) {
    for (std::size_t d = 0; d < vectors.dim(); ++d) {
      truth_energy += pilot_truth[k][d] * pilot_truth[k][d];
      cross += vectors[k][d] * pilot_truth[k][d];
      received_energy += vectors[k][d] * vectors[k][d];
    }
  }
  if (!(truth_energy > 0.0) || !(received_energy > 0.0)) {
    throw NumericalError("AGC needs nonzero pilot energy");
  }
  if (cross == 0.0 || !std::isfinite(cross)) throw NumericalError("AGC gain degenerate: zero pilot correlation");

  AgcResult out{vectors, truth_energy / cross};
  for (double& v : out.vectors.flat()) v *= out.gain;
  return out;
}

/// Affine map w -> A w + b.
struct Equalizer {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd bias;
  double training_mse = 0.0;

  static Equalizer identity(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return {Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n), 0.0};
  }
};

inline SymbolVectors apply_equalizer(const Equalizer& eq, const SymbolVectors& vectors) {
  if (static_cast<std::size_t>(eq.matrix.cols()) != vectors.dim()) throw ConfigError("equalizer dimension mismatch");
  const auto out_dim = static_cast<std::size_t>(eq.matrix.rows());
  SymbolVectors out(vectors.size(), out_dim);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const Eigen::Map<const Eigen::VectorXd> w(vectors[k].data(), eq.matrix.cols());
    Eigen::Map<Eigen::VectorXd> y(out[k].data(), eq.matrix.rows());
    y.noalias() = eq.matrix * w + eq.bias;
  }
  return out;
}

/// outer(inner(w)).
inline Equalizer compose(const Equalizer& outer, const Equalizer& inner) {
  return {outer.matrix * inner.matrix, outer.matrix * inner.bias + outer.bias, 0.0};
}

/// Regularized affine least squares on the pilots:
///   min_{A,b} sum_k |A w_k + b - a_k|^2 + ridge |A|_F^2
/// solved through the normal equations on augmented vectors [w_k; 1].
/// Without a ridge value, ridge = 1e-6 * trace(sum w w^T) / N.
inline Equalizer train_mmse(const SymbolVectors& pilot_vectors, const SymbolVectors& pilot_truth,
                            std::optional<double> ridge = std::nullopt, bool with_bias = true) {
  const std::size_t n_pilot = pilot_vectors.size();
  const std::size_t dim = pilot_vectors.dim();
  if (pilot_truth.size() != n_pilot || pilot_truth.dim() != dim) throw ConfigError("MMSE training shape mismatch");
  if (n_pilot < dim + 1) throw ConfigError("MMSE training needs at least N + 1 pilots");

  const auto n = static_cast<Eigen::Index>(dim);
  const Eigen::Index cols = with_bias ? n + 1 : n;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n_pilot), cols);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n_pilot), n);
  for (std::size_t k = 0; k < n_pilot; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    for (Eigen::Index d = 0; d < n; ++d) {
      x(row, d) = pilot_vectors[k][static_cast<std::size_t>(d)];
      a(row, d) = pilot_truth[k][static_cast<std::size_t>(d)];
    }
    if (with_bias) x(row, n) = 1.0;
  }

  Eigen::MatrixXd normal = x.transpose() * x;
  const double lambda = ridge.value_or(1e-6 * normal.topLeftCorner(n, n).trace() / static_cast<double>(dim));
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge must be finite and >= 0");
  normal.topLeftCorner(n, n).diagonal().array() += lambda;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    throw NumericalError("MMSE normal matrix is singular; use a nonzero ridge or more diverse pilots");
  }
  const Eigen::MatrixXd theta = lu.solve(x.transpose() * a);  // cols x N

  Equalizer eq;
  eq.matrix = theta.topRows(n).transpose();
  eq.bias = with_bias ? Eigen::VectorXd(theta.row(n).transpose()) : Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd residual = x * theta - a;
  eq.training_mse = residual.squaredNorm() / static_cast<double>(n_pilot);
  if (!eq.matrix.allFinite() || !eq.bias.allFinite()) throw NumericalError("MMSE solution is not finite");
  return eq;
}

/// Regularized training objective for a given (A, b); used to check stationarity.
inline double mmse_objective(const Equalizer& eq, const SymbolVectors& pilot_vectors,
                             const SymbolVectors& pilot_truth, double ridge) {
  const SymbolVectors y = apply_equalizer(eq, pilot_vectors);
  double sum = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    for (std::size_t d = 0; d < y.dim(); ++d) {
      const double r = y[k][d] - pilot_truth[k][d];
      sum += r * r;
    }
  }
  return sum + ridge * eq.matrix.squaredNorm();
}

}  // namespace advdiv
