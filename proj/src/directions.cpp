#include "psiland/directions.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/sobol.hpp>

#include <map>
#include <mutex>
#include <tuple>

namespace psiland {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over a combined key
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

DirectionSet::DirectionSet(int dim, std::uint64_t seed, int replicate, std::size_t count)
    : dim_(dim) {
  require(dim >= 3 && dim <= kMaxDim, "directions: dimension must be in [3, 8]");
  const std::size_t pairs = (count + 1) / 2;
  const int qdim = dim == 3 ? 2 : dim;
  boost::random::sobol sobol(qdim);
  boost::random::mt19937_64 rng(stream_seed(seed, std::uint64_t(replicate)));
  std::vector<std::uint64_t> shift(qdim);
  for (auto& s : shift) s = rng();
  data_.resize(2 * pairs * dim);
  std::vector<double> u(qdim);
  Eigen::VectorXd w(dim);
  for (std::size_t k = 0; k < pairs; ++k) {
    for (int i = 0; i < qdim; ++i)
      u[i] = (double((std::uint64_t(sobol()) ^ shift[i]) >> 11) + 0.5) / 9007199254740992.0;
    if (dim == 3) {
      // equal-area cylindrical map
      double z = 1.0 - 2.0 * u[0];
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double phi = 2.0 * std::numbers::pi * u[1];
      w << r * std::cos(phi), r * std::sin(phi), z;
    } else {
      for (int i = 0; i < dim; ++i)
        w(i) = std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u[i] - 1.0);
      w.normalize();
    }
    for (int i = 0; i < dim; ++i) {
      data_[(2 * k) * dim + i] = w(i);
      data_[(2 * k + 1) * dim + i] = -w(i);
    }
  }
}

std::shared_ptr<const DirectionSet> sphere_directions(int dim, std::uint64_t seed, int replicate,
                                                      std::size_t count) {
  using Key = std::tuple<int, std::uint64_t, int, std::size_t>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const DirectionSet>> cache;
  Key key{dim, seed, replicate, count};
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto set = std::make_shared<const DirectionSet>(dim, seed, replicate, count);
  std::lock_guard<std::mutex> lock(mutex);
  if (cache.size() > 256) cache.clear();
  return cache.emplace(key, set).first->second;
}

}  // namespace psiland
