#pragma once

#include "dspgemm/matrix.hpp"
#include "dspgemm/microkernel.hpp"

namespace dspgemm {

// C_a += A_s * B_a with C held in the accumulator: every row starts from
// C_a and adds products in ascending k.
void exec_tgemm_kernel(ConstMatView a_s, ConstMatView b_a, MatView c_a);

// k_u zero-initialized partial sums per element, partial ku taking
// k = ku, ku + k_u, ...; partials are folded in ascending ku and the total
// is added to C_a once.
void exec_ftimm_kernel(ConstMatView a_s, ConstMatView b_a, MatView c_a, const MicroKernelSpec& spec);

}  // namespace dspgemm
