#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "sottac/policy.hpp"
#include "sottac/rng.hpp"

namespace sottac::test {

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

inline double rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  std::vector<double> d(got.size());
  for (std::size_t i = 0; i < got.size(); ++i) d[i] = got[i] - want[i];
  return norm(d) / std::max(norm(want), 1e-300);
}

/// Softmax policy with random parameters and a batch of n random states with
/// actions drawn from the policy; uniform measure.
struct SoftmaxFixture {
  SoftmaxLinearPolicy policy;
  SampleBatch batch;
  SoftmaxFixture(std::size_t state_dim, int n_actions, std::size_t n, Rng& rng)
      : policy(state_dim, n_actions), batch(state_dim) {
    policy.set_params(random_vector(policy.dim(), rng, 0.5));
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = random_vector(state_dim, rng);
      batch.add(s, policy.sample(s, rng));
    }
    batch.set_uniform_measure();
  }
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(
                                                 std::filesystem::file_time_type::clock::now()
                                                     .time_since_epoch()
                                                     .count()));
    path_ = std::filesystem::temp_directory_path() /
            ("sottac_" + tag + "_" + std::to_string(rng.next_u64()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace sottac::test
