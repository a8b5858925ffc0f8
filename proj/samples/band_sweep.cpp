// Sweeps the field ratio r = b_+/b_- at b_- = 1 and prints, for the first
// band, its window (delta at half its cap), the smallest derivative on the
// window preimage and the guaranteed lower bound.
//
//   ./sample_band_sweep [points]

#include <cstdio>
#include <cstdlib>

#include "iwatsuka/bands.hpp"
#include "iwatsuka/landau.hpp"

int main(int argc, char** argv) {
  using namespace iwatsuka;
  const std::size_t points = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 65;
  const auto constants = derivative_bound_constants(1);
  const int j = 1;

  std::printf("%6s %8s %10s %10s %10s %12s %12s\n", "r", "delta", "lo", "hi", "k_hi", "min omega'", "bound");
  for (double r : {1.1, 1.25, 1.5, 1.7}) {
    const auto p = FieldProfile::sharp(1.0, r);
    const double delta = 0.5 * delta_cap(j, r);
    BandOptions o;
    const auto w = make_window_unchecked(p, o, j, delta, -8.0, 8.0);
    const auto t = compute_bands(p, uniform_grid(w.k_lo, w.k_hi, points), j, o);
    double least = t.mode(j, 0).fh;
    for (std::size_t ik = 1; ik < t.size(); ++ik) least = std::min(least, t.mode(j, ik).fh);
    std::printf("%6.3g %8.4f %10.6f %10.6f %10.6f %12.6g %12.6g\n", r, delta, w.lo, w.hi, w.k_hi, least,
                derivative_lower_bound(w, constants));
  }
  return 0;
}
