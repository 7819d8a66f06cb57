#pragma once

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace healthwatch::detail {

/// Worker count for an OpenMP region; non-positive requests mean "runtime default".
inline int resolve_workers(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : std::max(1, omp_get_max_threads());
#else
    (void)requested;
    return 1;
#endif
}

} // namespace healthwatch::detail
