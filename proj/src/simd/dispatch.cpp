#include <cstdlib>
#include <string_view>

#include "pvvs/simd/kernels.hpp"

namespace pvvs::simd {

#ifndef PVVS_HAVE_AVX2
const KernelSet* avx2_kernels() { return nullptr; }
#endif

bool cpu_supports_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelSet& active_kernels() {
  static const KernelSet& chosen = []() -> const KernelSet& {
    const char* env = std::getenv("PVVS_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelSet* k = avx2_kernels(); k != nullptr && cpu_supports_avx2()) return *k;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace pvvs::simd
