#include <cstddef>

#include "polymp/kernels.hpp"

namespace polymp::kernels {

SegmentIndex build_segment_index(std::span<const std::uint32_t> seg, std::size_t n_seg) {
  SegmentIndex idx;
  idx.offsets.assign(n_seg + 1, 0);
  for (std::uint32_t s : seg) ++idx.offsets[s + 1];
  for (std::size_t s = 0; s < n_seg; ++s) idx.offsets[s + 1] += idx.offsets[s];
  idx.order.resize(seg.size());
  std::vector<std::size_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
  for (std::size_t r = 0; r < seg.size(); ++r) {
    idx.order[cursor[seg[r]]++] = static_cast<std::uint32_t>(r);
  }
  return idx;
}

namespace serial {
#define POLYMP_FOR
#include "kernel_bodies.inc"
#undef POLYMP_FOR
}  // namespace serial

}  // namespace polymp::kernels
