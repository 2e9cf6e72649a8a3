// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

namespace enlarge {

/// Which kernel runs a data-parallel loop. Results never depend on the choice.
enum class Exec { serial, openmp };

Exec parse_exec(std::string_view s);
std::string_view to_string(Exec e);
int max_threads();

/// Calls body(i) for i in [0, n). With Exec::openmp the iterations are spread over
/// threads; body must only write to slot i of its outputs.
template <class Body>
void parallel_for(Exec exec, std::size_t n, Body&& body) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

}  // namespace enlarge
