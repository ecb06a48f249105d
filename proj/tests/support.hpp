#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "precomp/precomp.hpp"

namespace testing_support {

using precomp::SignalBuffer;
using precomp::SignalGeometry;

inline SignalBuffer random_signal(SignalGeometry g, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  SignalBuffer s(g);
  for (double& v : s.samples()) v = d(rng);
  return s;
}

inline Eigen::VectorXd to_vec(const SignalBuffer& s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) v(static_cast<Eigen::Index>(i)) = s[i];
  return v;
}

inline SignalBuffer from_vec(const Eigen::VectorXd& v, SignalGeometry g) {
  SignalBuffer s(g);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = v(static_cast<Eigen::Index>(i));
  return s;
}

// Dense matrix of an operator, probed column by column.
inline Eigen::MatrixXd dense_matrix(const precomp::LinearOperator& op, SignalGeometry g) {
  const auto n = static_cast<Eigen::Index>(g.total_samples());
  Eigen::MatrixXd m(n, n);
  SignalBuffer e(g, 0.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    e[static_cast<std::size_t>(j)] = 1.0;
    m.col(j) = to_vec(op.apply(e));
    e[static_cast<std::size_t>(j)] = 0.0;
  }
  return m;
}

// Minimizer of ||x - Hz||^2 + beta/2 ||z - v||^2 by a dense direct solve.
inline SignalBuffer dense_solve(const Eigen::MatrixXd& h, const SignalBuffer& x, const SignalBuffer& v, double beta) {
  const auto n = h.cols();
  const Eigen::MatrixXd a = h.transpose() * h + 0.5 * beta * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd b = h.transpose() * to_vec(x) + 0.5 * beta * to_vec(v);
  return from_vec(a.ldlt().solve(b), x.geometry());
}

inline double relative_error(const SignalBuffer& a, const SignalBuffer& ref) {
  return precomp::l2_norm((a - ref).samples()) / precomp::l2_norm(ref.samples());
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("precomp-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
