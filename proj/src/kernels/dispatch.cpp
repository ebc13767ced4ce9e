#include <cstdlib>
#include <string_view>

#include "fsdp/kernels.hpp"

namespace fsdp::kernels {

#ifndef FSDP_HAVE_AVX2
const KernelSet* avx2_kernels() { return nullptr; }
#endif
#ifndef FSDP_HAVE_AVX512
const KernelSet* avx512_kernels() { return nullptr; }
#endif

bool cpu_supports(Isa isa) {
#if defined(__x86_64__) || defined(__i386__)
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::Avx512:
      return __builtin_cpu_supports("avx512f");
  }
  return false;
#else
  return isa == Isa::Scalar;
#endif
}

namespace {

const KernelSet* usable(Isa isa) {
  if (!cpu_supports(isa)) return nullptr;
  switch (isa) {
    case Isa::Scalar:
      return &scalar_kernels();
    case Isa::Avx2:
      return avx2_kernels();
    case Isa::Avx512:
      return avx512_kernels();
  }
  return nullptr;
}

const KernelSet& select() {
  if (const char* env = std::getenv("FSDP_SIMD")) {
    const std::string_view want(env);
    if (want == "scalar") return scalar_kernels();
    if (want == "avx2") {
      if (const KernelSet* k = usable(Isa::Avx2)) return *k;
    }
    if (want == "avx512") {
      if (const KernelSet* k = usable(Isa::Avx512)) return *k;
    }
  }
  return best_supported();
}

}  // namespace

const KernelSet& best_supported() {
  if (const KernelSet* k = usable(Isa::Avx512)) return *k;
  if (const KernelSet* k = usable(Isa::Avx2)) return *k;
  return scalar_kernels();
}

const KernelSet& active() {
  static const KernelSet& set = select();
  return set;
}

}  // namespace fsdp::kernels
