#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "kmse/linalg.hpp"

namespace kmse {

// A reproducible random stream identified by (seed, stream_id). Replication r
// of an experiment uses stream_id = r, so replications can run in any order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32), 0x6b6d7365U};
    engine_.seed(seq);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::size_t categorical(const Vector& probs) {
    std::discrete_distribution<std::size_t> dist(probs.data(), probs.data() + probs.size());
    return dist(engine_);
  }
  Vector normal_vector(Eigen::Index d) {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
    return v;
  }
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  std::mt19937_64& engine() noexcept { return engine_; }

  // A child stream derived deterministically from this one's identity.
  RngStream child(std::uint64_t tag) const {
    return RngStream(seed_ ^ (0x9e3779b97f4a7c15ULL * (tag + 1)), stream_id_);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace kmse
