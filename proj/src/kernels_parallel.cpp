#include <cstddef>

#include "polymp/kernels.hpp"

namespace polymp::kernels::parallel {

#define POLYMP_FOR _Pragma("omp parallel for schedule(static)")
#include "kernel_bodies.inc"
#undef POLYMP_FOR

}  // namespace polymp::kernels::parallel
