#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cnoma {

// Every parallel kernel in this library has a serial twin that produces
// bit-identical results; tests compare the two and the bench tool times them.
enum class Execution { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace cnoma
