#ifndef GRANULATION_PARALLEL_HPP_
#define GRANULATION_PARALLEL_HPP_

#include <cstddef>
#include <exception>
#include <vector>

namespace granulation {

/// Selects the OpenMP kernel or the serial reference loop. Both paths compute
/// every element independently and reduce in index order, so they agree bit
/// for bit.
enum class Exec { serial, parallel };

/// Runs body(i) for i in [0, n). Exceptions are captured per index and the one
/// with the lowest index is rethrown after the loop.
template <typename Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  if (exec == Exec::parallel) {
    const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace granulation

#endif  // GRANULATION_PARALLEL_HPP_
