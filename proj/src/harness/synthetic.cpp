#include <stdexcept>
#include <string>

#include "codh/harness.hpp"
#include "codh/rng.hpp"

namespace codh {

SyntheticBatch gen_synthetic(std::uint64_t seed, const SyntheticSizes& sizes) {
  auto positive = [](Index v, const std::string& what) {
    if (v <= 0) throw std::invalid_argument("synthetic sizes: " + what + " must be positive, got " + std::to_string(v));
  };
  positive(sizes.n, "N");
  positive(sizes.d, "d");
  positive(sizes.channels, "channels");
  positive(sizes.roi_size, "roi_size");
  for (std::size_t i = 0; i < sizes.levels.size(); ++i) {
    positive(sizes.levels[i], "p" + std::to_string(i + 2) + " extent");
    if (i > 0 && sizes.levels[i - 1] != 2 * sizes.levels[i]) {
      throw std::invalid_argument("synthetic sizes: pyramid extents must halve level to level (p" +
                                  std::to_string(i + 1) + " = " + std::to_string(sizes.levels[i - 1]) +
                                  ", p" + std::to_string(i + 2) + " = " + std::to_string(sizes.levels[i]) + ")");
    }
  }

  SyntheticBatch batch;
  for (std::size_t i = 0; i < sizes.levels.size(); ++i) {
    const Index s = sizes.levels[i];
    batch.pyramid.levels[i] =
        normal_tensor({sizes.channels, s, s}, CounterRng::stream(seed, "pyramid/p" + std::to_string(i + 2)));
  }
  batch.rois = normal_tensor({sizes.n, sizes.channels, sizes.roi_size, sizes.roi_size},
                             CounterRng::stream(seed, "rois"));
  return batch;
}

}  // namespace codh
