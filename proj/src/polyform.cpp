#include "feec/polyform.hpp"

#include <cmath>

namespace feec {

std::vector<Mask> masks_of(int n, int k) {
  std::vector<Mask> out;
  if (k < 0 || k > n) return out;
  for (Mask m = 0; m < (1u << n); ++m) {
    if (mask_size(m) == k) out.push_back(m);
  }
  return out;
}

int wedge_sign(Mask a, Mask b) {
  if (a & b) return 0;
  // inversions between the ascending tuples of a and b
  int inv = 0;
  for (int j = 0; j < 31; ++j) {
    if (!(b & (1u << j))) continue;
    inv += __builtin_popcount(a & ~((2u << j) - 1u)); // bits of a strictly above j
  }
  return (inv % 2 == 0) ? 1 : -1;
}

int removal_sign(Mask m, int axis) {
  int pos = __builtin_popcount(m & ((1u << axis) - 1u));
  return (pos % 2 == 0) ? 1 : -1;
}

PolyFormD vol_form(const SimplicialComplex& cx, SimplexRef carrier) {
  Geom<double> g = make_geom<double>(cx, carrier);
  PolyFormD f = pf_zero<double>(carrier, carrier.dim);
  if (carrier.dim == 0) {
    f.comp[0u] = PolyD::constant(1.0);
    return f;
  }
  double norm = std::sqrt(g.gram_det); // = dim! * measure
  for (Mask m : masks_of(g.n, g.dim)) {
    double c = g.edge_minor(m) / norm;
    if (c != 0.0) f.comp[m] = PolyD::constant(c);
  }
  return f;
}

} // namespace feec
