#ifndef NFLOC_GEOMETRY_HPP
#define NFLOC_GEOMETRY_HPP

#include <Eigen/Dense>
#include <vector>

namespace nfloc {

// Uniform planar array in the z=0 plane, centered at the origin.
// Antennas are indexed (i, j) with i in 1..n_x, j in 1..n_y.
struct ArrayGeometry {
    int n_x = 1;
    int n_y = 1;
    double d_x = 0.0;       // antenna spacing along x [m]
    double d_y = 0.0;       // antenna spacing along y [m]
    double wavelength = 0.0; // carrier wavelength [m]

    ArrayGeometry() = default;
    ArrayGeometry(int nx, int ny, double dx, double dy, double lambda);

    int antenna_count() const { return n_x * n_y; }
    double len_x() const { return n_x * d_x; }
    double len_y() const { return n_y * d_y; }
    // Largest dimension of the aperture (diagonal).
    double largest_dimension() const;
};

struct RegionBoundaries {
    double fresnel_m = 0.0;
    double fraunhofer_m = 0.0;
};

// Partition of the array into an m_x-by-m_y grid of contiguous equal blocks,
// numbered row-major: m = (g_x - 1) * m_y + g_y.
struct PartitionPlan {
    ArrayGeometry parent;
    int m_x = 1;
    int m_y = 1;
    int n_mx = 1; // antennas per subarray along x
    int n_my = 1; // antennas per subarray along y
    std::vector<Eigen::Vector3d> subarray_centers;        // size M
    std::vector<std::vector<int>> subarray_flat_indices;  // size M, 1-based flat indices

    int count() const { return m_x * m_y; }
    int antennas_per_subarray() const { return n_mx * n_my; }
    double subarray_largest_dimension() const;
    // Fraunhofer distance of one subarray.
    double subarray_fraunhofer_m() const;
};

// UE location with cached spherical coordinates. Requires z > 0.
struct UeLocation {
    Eigen::Vector3d cartesian = Eigen::Vector3d::Zero();
    double r = 0.0;     // range [m]
    double omega = 0.0; // azimuth in [0, 2*pi)
    double phi = 0.0;   // polar angle in [0, pi/2)

    static UeLocation from_cartesian(const Eigen::Vector3d& p);
    static UeLocation from_polar(double r, double omega, double phi);
};

// Position of the (i, j)-th antenna; grid is centered so positions sum to zero.
Eigen::Vector3d antenna_position(const ArrayGeometry& geom, int i, int j);

// Row-major flattening t = (i - 1) * n_y + j, t in 1..N_B.
int flat_index(const ArrayGeometry& geom, int i, int j);

// Fresnel distance (D^4 / 8 lambda)^(1/3) and Fraunhofer distance 2 D^2 / lambda.
double fresnel_distance(double largest_dim, double wavelength);
double fraunhofer_distance(double largest_dim, double wavelength);
RegionBoundaries region_boundaries(const ArrayGeometry& geom);

PartitionPlan partition(const ArrayGeometry& geom, int m_x, int m_y);

// Per-subarray far-field test: true when the subarray Fraunhofer distance is
// below the UE-to-subarray-center range.
std::vector<bool> sfa_check(const PartitionPlan& plan, const Eigen::Vector3d& p_u);

} // namespace nfloc

#endif
