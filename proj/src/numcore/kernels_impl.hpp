#pragma once

#include "synkbqa/numcore/kernels.hpp"

namespace synkbqa::num::kernels {

extern const Table kScalarTable;
#if defined(SYNKBQA_HAVE_AVX2)
extern const Table kAvx2Table;
#endif
#if defined(SYNKBQA_HAVE_NEON)
extern const Table kNeonTable;
#endif

}  // namespace synkbqa::num::kernels
