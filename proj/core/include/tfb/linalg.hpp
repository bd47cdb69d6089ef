#pragma once

#include "tfb/types.hpp"

namespace tfb {

/// Symmetric PSD square root via eigendecomposition. Negative eigenvalues
/// are clipped to zero; an eigenvalue below -1e-8 * trace(V) is treated
/// as a genuinely indefinite input and throws NumericalError.
Matrix symmetric_psd_sqrt(const Matrix& V);

/// Thin factor R (rank x P) with ||R x|| = ||V^{1/2} x|| for all x,
/// keeping only eigenvalues above a relative cutoff.
Matrix psd_factor(const Matrix& V);

/// (A + A^T) / 2.
inline Matrix symmetrize(const Matrix& A) { return 0.5 * (A + A.transpose()); }

}  // namespace tfb
