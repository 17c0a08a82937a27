#pragma once

#include "sottac/kernels.hpp"

namespace sottac::kernels::detail {

extern const KernelTable kScalarTable;
#if defined(SOTTAC_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace sottac::kernels::detail
