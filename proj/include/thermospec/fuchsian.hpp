#pragma once

#include <complex>
#include <string>
#include <vector>

#include "thermospec/inducing.hpp"
#include "thermospec/maps.hpp"
#include "thermospec/spectra.hpp"

namespace thermospec {

using Cplx = std::complex<double>;

// 2x2 Mobius transformation z -> (az + b)/(cz + d), normalized to det = 1.
// Real entries describe the upper-half-plane model; disk-model elements are
// Cayley conjugates with complex entries.
struct Mobius {
  Cplx a{1}, b{0}, c{0}, d{1};

  enum class Class { kParabolic, kHyperbolic, kElliptic };

  static Mobius uhp(double a, double b, double c, double d);
  Mobius normalized() const;  // scale to det = 1
  Cplx det() const { return a * d - b * c; }
  Cplx trace() const { return a + d; }
  Cplx apply(Cplx z) const { return (a * z + b) / (c * z + d); }
  Cplx derivative(Cplx z) const;  // g'(z) = det / (cz + d)^2
  Mobius inverse() const { return Mobius{d, -b, -c, a}.normalized(); }
  Mobius compose(const Mobius& r) const;
  // Conjugate by the Cayley transform z -> (z - i)/(z + i): UHP -> disk.
  Mobius to_disk() const;
  Class classify(double tol = 1e-9) const;
  // Fixed point(s); for parabolic elements the double root.
  std::vector<Cplx> fixed_points() const;
};

struct IsometricCircleResult {
  Cplx center;
  double radius = 0.0;
};

// C_g = {z : |g'(z)| = 1}: center -d/c, radius 1/|c|; affine maps (c = 0)
// have no isometric circle.
IsometricCircleResult isometric_circle(const Mobius& g);

// Symmetric generator inventory in the disk model.
struct GeneratorSet {
  std::vector<Mobius> gens;           // disk-model, det 1
  std::vector<int> inverse_of;        // pairing: gens[inverse_of[i]] = gens[i]^{-1}
  std::vector<bool> parabolic;        // Gamma_0 membership
  std::vector<Cplx> fixed_point;      // parabolic fixed point (on S^1) or 0
  std::vector<int> cusp_of;           // cusp index per generator, -1 for hyperbolic
  int num_cusps = 0;

  void validate() const;
  static GeneratorSet from_json(const std::string& text);
  // Disk-model conjugates of the parabolic pair [[1,3],[0,1]], [[1,0],[3,1]]:
  // a free rank-2 group of the second kind with two cusps and H_0 empty.
  // (Translation length 2 degenerates: an extra cusp appears at the Cayley
  // images of +-1 that no generator fixes, and the block-coded induced map
  // picks up a neutral period-2 orbit.)
  static GeneratorSet default_example();
};

struct CircleArc {
  double lo = 0.0, hi = 0.0;  // radians, lo in [0, 2pi), hi > lo, hi - lo < 2pi
  double length() const { return hi - lo; }
};

struct BowenSeriesMap {
  GeneratorSet gens;
  std::vector<CircleArc> arcs;  // per generator, in generator order
  MarkovMapPtr facade;          // circle Markov map, symbol i = generator index
  std::vector<std::string> transcript;

  std::string arcs_csv() const;  // symbol, theta_lo, theta_hi
};

struct GeometryValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Arcs from isometric circles, partition validation (non-inverse arcs may
// touch only in measure zero, inverse parabolic pairs touch exactly at the
// cusp), and the Markov facade registration.
BowenSeriesMap build_bowen_series(const GeneratorSet& gens);

struct Block {
  int generator = -1;  // generator index of the block
  int run = 1;         // block length (1 for hyperbolic blocks)
  int cusp = -1;       // cusp index for parabolic blocks
  int winding = 0;     // a_{.,j} = run - 1 for parabolic blocks
};

struct BlockSequence {
  std::vector<Block> blocks;
  std::vector<int> concatenate() const;
};

// Maximal-run block decomposition of a reduced word of generator indices.
BlockSequence block_decompose(const std::vector<int>& word, const GeneratorSet& gens);

// Induced Markov map over the block alphabet {gamma^n g} u {h g}; the cusp
// winding counts a_{1,j} become depth-1 observables on the induced alphabet.
struct CuspInducedSystem {
  InducingScheme scheme;
  std::vector<Observable> windings;  // a_{1,j} per cusp j
  int winding_cutoff = 0;
};

CuspInducedSystem build_cusp_induced_map(const BowenSeriesMap& bs, int winding_cutoff = 64);

// dim_H B(alpha): conditional variational formula on the induced system with
// the (unbounded) winding observables; no beta floor applies.
SpectrumResult cusp_winding_spectrum(const BowenSeriesMap& bs,
                                     const std::vector<double>& alpha,
                                     const Schedule& schedule, int winding_cutoff = 64,
                                     unsigned seed = 0);

// Frequency vector over (winding count i >= 0, cusp j).
struct CuspFrequency {
  struct Entry {
    int winding = 0;
    int cusp = 0;
    double freq = 0.0;
  };
  std::vector<Entry> entries;
  double tail = 0.0;

  double total() const {
    double s = tail;
    for (const auto& e : entries) s += e.freq;
    return s;
  }
};

// dim_H BE(alpha) for the multi-cusp winding frequencies, with the exact 1/2
// answer when the declared total frequency is below 1, and the 1/2 floor
// otherwise (the induced system has beta_infinity = 1/2 from the n^-2 arc
// decay).
SpectrumResult cusp_frequency_spectrum(const BowenSeriesMap& bs, const CuspFrequency& freq,
                                       const Schedule& schedule, int winding_cutoff = 64,
                                       unsigned seed = 0);

// Log-log slope of the arc length of Delta_{gamma^n g} against n (expected
// close to -2; this underlies beta_infinity = 1/2 for the induced system).
struct ArcDecayFit {
  double slope = 0.0;
  double residual = 0.0;
  int samples = 0;
};

ArcDecayFit cusp_arc_decay(const BowenSeriesMap& bs, int gamma_index, int g_index, int n_max);

}  // namespace thermospec
