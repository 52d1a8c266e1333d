#pragma once

// Dense numeric kernels behind the tensor ops. `serial` is the reference
// implementation; `parallel` splits the same loops across OpenMP threads over
// independent output rows, so every output element is accumulated in the same
// order and the two backends agree bitwise.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace polymp::kernels {

// Row ranges of a segment id vector after a stable counting sort: rows of
// segment s are order[offsets[s] .. offsets[s+1]), ascending.
struct SegmentIndex {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> order;
};

SegmentIndex build_segment_index(std::span<const std::uint32_t> seg, std::size_t n_seg);

namespace serial {
#include "polymp/kernel_decls.inc"
}  // namespace serial

namespace parallel {
#include "polymp/kernel_decls.inc"
}  // namespace parallel

}  // namespace polymp::kernels
