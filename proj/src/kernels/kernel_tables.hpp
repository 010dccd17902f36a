// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mxql/kernels.hpp"

namespace mxql::kernels {

const KernelTable& scalar_table();
#if defined(MXQL_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace mxql::kernels
