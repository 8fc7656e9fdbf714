#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace maflow {

// Every parallel kernel in this project also has a serial path, selected by
// ExecMode. Work items write to preassigned slots and reductions run in a
// fixed order afterwards, so both paths produce bit-identical results for
// any thread count. Tests assert that equality; the bench target times it.
enum class ExecMode { serial, parallel };

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <typename Fn>
void parallel_for(int64_t n, ExecMode mode, Fn&& fn) {
#ifdef _OPENMP
    if (mode == ExecMode::parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
#else
    (void)mode;
#endif
    for (int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace maflow
