#pragma once

namespace iuzawa {

/// Runs the full property suite (quadrature/transform inverses, adjoint
/// identities, prox oracle, firm nonexpansiveness, Q_S structure, gradient
/// checks, algorithm tracking, cross-solver agreement, sampling invariants),
/// printing one line per section. Returns false if any section fails.
bool run_verification(int threads);

}  // namespace iuzawa
