#ifndef FEEC_CONFIG_HPP
#define FEEC_CONFIG_HPP

namespace feec {

/// Central numerical tolerances. All rank decisions and residual gates in the
/// library read from one instance so cutoffs are declared, not scattered.
struct Tolerances {
  double rank_rel = 1e-9;        // singular values below rank_rel * sigma_max count as zero
  double spd_symmetry = 1e-12;   // allowed relative asymmetry before an SPD solve
  double solve_residual = 1e-10; // relative residual gate for linear solves
  double ortho = 1e-10;          // Gram-identity deviation after orthonormalization
  double exact_identity = 1e-10; // float-mode gate for identities that are exact in rational mode
  double suite = 1e-9;           // default gate for the verification suites
  double locality = 1e-12;       // perturbation-outside-the-patch gate
  double drift = 0.25;           // allowed relative drift of empirical constants across levels
  double poincare_drift = 0.20;  // allowed drift of the discrete Poincare constant
  double scaling_exponent = 0.10;// allowed mismatch of empirical scaling exponents
};

inline Tolerances& tolerances() {
  static Tolerances tol;
  return tol;
}

} // namespace feec

#endif
