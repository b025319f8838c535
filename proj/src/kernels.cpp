// Copyright 2026 The afde authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "afde/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace afde {
namespace kernels {
namespace {

const Kernels* g_active = nullptr;

const Kernels* pick_default() {
  const char* env = std::getenv("AFDE_KERNELS");
#if defined(__x86_64__) || defined(__i386__)
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_kernels;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return &avx2_kernels;
    // "auto" or anything unrecognized falls through to detection.
  }
  if (cpu_has_avx2()) return &avx2_kernels;
#else
  (void)env;
#endif
  return &scalar_kernels;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

const Kernels& active() {
  if (g_active == nullptr) g_active = pick_default();
  return *g_active;
}

bool set_backend(Backend b) {
  if (b == Backend::scalar) {
    g_active = &scalar_kernels;
    return true;
  }
#if defined(__x86_64__) || defined(__i386__)
  if (b == Backend::avx2 && cpu_has_avx2()) {
    g_active = &avx2_kernels;
    return true;
  }
#endif
  return false;
}

const char* backend_name() { return active().name; }

}  // namespace kernels
}  // namespace afde
