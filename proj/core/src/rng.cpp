#include "drokit/rng.hpp"

#include "drokit/errors.hpp"

namespace drokit {

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream * 0xd6e8feb86659fd93ull + 1));
}

Eigen::VectorXd sphere_uniform(rng_t& rng, int d) {
  if (d <= 0) throw empty_input("sphere_uniform: d must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(d);
  double norm = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = gauss(rng);
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

Eigen::VectorXd orthogonal_unit(rng_t& rng, const Eigen::VectorXd& u) {
  const double un = u.norm();
  if (un < 1e-12) throw empty_input("orthogonal_unit: reference vector is zero");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(u.size());
  for (;;) {
    for (int i = 0; i < u.size(); ++i) v[i] = gauss(rng);
    v -= (v.dot(u) / (un * un)) * u;
    const double vn = v.norm();
    if (vn > 1e-8) return v / vn;
  }
}

}  // namespace drokit
