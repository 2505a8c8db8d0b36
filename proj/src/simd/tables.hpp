#pragma once

#include "dribble/simd/kernels.hpp"

namespace dribble::simd::detail {

template <typename T>
const KernelTable<T>& scalar_table();
template <typename T>
const KernelTable<T>& avx2_table();
template <typename T>
const KernelTable<T>& avx512_table();

/// Whether the variant was compiled into this build.
bool avx2_compiled();
bool avx512_compiled();

}  // namespace dribble::simd::detail
