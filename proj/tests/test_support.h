#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "sdcert/certify.h"

namespace sdcert::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }

  Eigen::MatrixXd matrix(int rows, int cols, double scale = 1.0) {
    Eigen::MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) M(i, j) = scale * normal();
    }
    return M;
  }

  Eigen::VectorXd vector(int dim, double scale = 1.0) { return matrix(dim, 1, scale); }

  Eigen::MatrixXd spd(int dim) {
    const Eigen::MatrixXd M = matrix(dim, dim);
    return M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
  }

  /// Matrix with 2-norm equal to norm.
  Eigen::MatrixXd with_norm(int rows, int cols, double norm) {
    const Eigen::MatrixXd M = matrix(rows, cols);
    return M * (norm / M.operatorNorm());
  }

  /// Constants satisfying the small-gain test with margin at least 1e-3.
  GainConstants small_gain_constants() {
    GainConstants g;
    g.xi = -uniform(0.05, 5.0);
    g.lip_z_G = uniform(0.0, 0.95);
    g.lip_x_f = uniform(0.0, 5.0);
    const double budget = -g.xi * (1.0 - g.lip_z_G);
    const double product = budget * uniform(0.0, 0.999);
    g.lip_z_f = uniform(0.05, 3.0);
    g.lip_x_G = product / g.lip_z_f;
    return g;
  }

  /// Constants with a reduced-model rate and nonzero coupling.
  GainConstants rm_constants() {
    GainConstants g;
    g.xi = uniform(-3.0, 3.0);
    g.lip_z_G = uniform(0.0, 0.95);
    g.lip_x_f = std::abs(g.xi) + uniform(0.0, 3.0);
    g.lip_z_f = uniform(0.05, 3.0);
    g.lip_x_G = uniform(0.05, 3.0);
    g.rm_rate = uniform(0.05, 5.0);
    return g;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sdcert::testing
