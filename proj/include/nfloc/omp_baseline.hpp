#ifndef NFLOC_OMP_BASELINE_HPP
#define NFLOC_OMP_BASELINE_HPP

#include "nfloc/aple.hpp"
#include "nfloc/channel.hpp"
#include "nfloc/geometry.hpp"

namespace nfloc {

// Polar sampling grid for the matched-correlation search. Candidate steering
// columns are generated on the fly; nothing the size of the grid is stored.
struct PolarGrid {
    double r_min = 0.0;
    double r_max = 0.0;
    double r_step = 0.1;      // [m]
    double omega_step = 0.02; // [rad] over [0, 2*pi)
    double phi_step = 0.02;   // [rad] over [0, pi/2)

    // Default range bracket [max(fresnel, 0.5 m), 1.5 * fraunhofer].
    static PolarGrid for_geometry(const ArrayGeometry& geom);

    int r_count() const;
    int omega_count() const;
    int phi_count() const;
    void validate() const;
};

// Single-atom matched correlation: returns the grid node maximizing
// |a(q)^H y|, ties broken by the lowest linear node index (r-major, then
// omega, then phi). The belief covariance is a grid-cell quantization
// surrogate.
LocationEstimate omp_estimate(const Snapshot& snapshot, const ArrayGeometry& geom,
                              const PolarGrid& grid);

} // namespace nfloc

#endif
