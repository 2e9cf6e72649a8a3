// SPDX-License-Identifier: Apache-2.0
#include "enlarge/parallel.hpp"

#include <omp.h>

#include <string>

#include "enlarge/error.hpp"

namespace enlarge {

Exec parse_exec(std::string_view s) {
  if (s == "serial") return Exec::serial;
  if (s == "openmp") return Exec::openmp;
  throw InvalidArgument("unknown execution policy '" + std::string(s) + "'");
}

std::string_view to_string(Exec e) { return e == Exec::serial ? "serial" : "openmp"; }

int max_threads() { return omp_get_max_threads(); }

}  // namespace enlarge
