#ifndef NFLOC_CHANNEL_HPP
#define NFLOC_CHANNEL_HPP

#include "nfloc/geometry.hpp"

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>

namespace nfloc {

// Equivalent complex channel gain alpha (path loss absorbed into the symbol).
struct ComplexGain {
    std::complex<double> value{0.0, 0.0};

    ComplexGain() = default;
    explicit ComplexGain(std::complex<double> v) : value(v) {}
    static ComplexGain from_polar(double magnitude, double phase);

    double magnitude() const { return std::abs(value); }
    // Phase in [-pi, pi).
    double phase() const;
};

struct SnapshotTruth {
    UeLocation location;
    ComplexGain gain;
    std::uint64_t seed = 0;
};

// One received snapshot over the whole array, row-major element order
// t = (i - 1) * n_y + j.
struct Snapshot {
    Eigen::VectorXcd y;
    double noise_variance = 1.0;
    std::optional<SnapshotTruth> truth;
};

// Exact near-field steering vector, element t: exp(-j 2 pi r_(i,j) / lambda).
// Throws when p_u coincides with an antenna.
Eigen::VectorXcd nearfield_steering(const ArrayGeometry& geom, const Eigen::Vector3d& p_u);

// Planar-wave steering vector of an n_mx-by-n_my block with symmetric element
// indexing: element (k, l) has phase +(2 pi / lambda)(k~ d_x theta_x + l~ d_y theta_y),
// k~ = k - (n_mx + 1)/2. theta are direction cosines toward the source, |theta| <= 1.
Eigen::VectorXcd farfield_steering(int n_mx, int n_my, double d_x, double d_y,
                                   double wavelength, double theta_x, double theta_y);

// y = alpha * a(p_u) + n, n ~ CN(0, sigma2 I). sigma2 == 0 produces the exact
// noiseless signal. Deterministic for a fixed seed.
Snapshot synthesize_snapshot(const ArrayGeometry& geom, const UeLocation& p_u,
                             const ComplexGain& alpha, double sigma2, std::uint64_t seed);

// |alpha|^2 / sigma2.
double snr(const ComplexGain& alpha, double sigma2);
double snr_db_to_sigma2(double snr_db, double alpha_magnitude);

// Extract subarray m (1-based) of the snapshot in subarray-local row-major
// (k, l) order, matching farfield_steering's element order.
Eigen::VectorXcd subarray_view(const Snapshot& snapshot, const PartitionPlan& plan, int m);

// Binary snapshot dump: 16-byte header (N_B as u64 LE, sigma2 as f64 LE)
// followed by interleaved re/im doubles, little-endian.
void write_snapshot(const std::string& path, const Snapshot& snapshot);
Snapshot read_snapshot(const std::string& path);

} // namespace nfloc

#endif
