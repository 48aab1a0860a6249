#pragma once

#include "rgw/measures.hpp"

namespace rgw {

/// Exact vertex solution of the balanced transportation problem
///
///   min <cost, G>  s.t.  G 1 = supply, G' 1 = demand, G >= 0,
///
/// by the primal transportation simplex (u-v potentials on a spanning-tree
/// basis). Entering and leaving variables are chosen by lowest cell index, so
/// the result is deterministic and degenerate pivots cannot cycle. The
/// returned plan has at most m + n - 1 nonzero entries.
Matrix transport_lp(const Matrix& cost, const Vector& supply, const Vector& demand);

/// Linear minimization over partial couplings
///
///   { G >= 0 : G 1 <= p, G' 1 <= q, sum G = 1 - eps }.
///
/// Reduced to transport_lp by adding a dummy row with mass eps and a dummy
/// column with mass eps. Real-to-dummy cells cost 0; the dummy-dummy cell
/// costs margin + max|grad| so that it never carries mass, which makes the
/// real block carry exactly 1 - eps.
Matrix partial_lmo(const Matrix& grad, const Vector& p, const Vector& q, double eps, double margin = 1.0);

}  // namespace rgw
