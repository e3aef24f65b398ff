#include "nfloc/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nfloc {

ArrayGeometry::ArrayGeometry(int nx, int ny, double dx, double dy, double lambda)
    : n_x(nx), n_y(ny), d_x(dx), d_y(dy), wavelength(lambda) {
    if (nx <= 0 || ny <= 0) {
        throw std::invalid_argument("ArrayGeometry: antenna counts must be positive");
    }
    if (dx <= 0.0 || dy <= 0.0 || lambda <= 0.0) {
        throw std::invalid_argument("ArrayGeometry: spacings and wavelength must be positive");
    }
}

double ArrayGeometry::largest_dimension() const {
    return std::hypot(len_x(), len_y());
}

double PartitionPlan::subarray_largest_dimension() const {
    return std::hypot(n_mx * parent.d_x, n_my * parent.d_y);
}

double PartitionPlan::subarray_fraunhofer_m() const {
    return fraunhofer_distance(subarray_largest_dimension(), parent.wavelength);
}

UeLocation UeLocation::from_cartesian(const Eigen::Vector3d& p) {
    if (!(p.z() > 0.0)) {
        throw std::invalid_argument("UeLocation: z must be positive (UE in front of the array)");
    }
    UeLocation loc;
    loc.cartesian = p;
    loc.r = p.norm();
    loc.omega = std::atan2(p.y(), p.x());
    if (loc.omega < 0.0) loc.omega += 2.0 * M_PI;
    loc.phi = std::acos(std::min(1.0, std::max(-1.0, p.z() / loc.r)));
    return loc;
}

UeLocation UeLocation::from_polar(double r, double omega, double phi) {
    if (r <= 0.0) throw std::invalid_argument("UeLocation: r must be positive");
    if (phi < 0.0 || phi >= M_PI / 2.0) {
        throw std::invalid_argument("UeLocation: phi must lie in [0, pi/2)");
    }
    Eigen::Vector3d p(r * std::cos(omega) * std::sin(phi),
                      r * std::sin(omega) * std::sin(phi),
                      r * std::cos(phi));
    UeLocation loc = from_cartesian(p);
    loc.r = r;
    loc.phi = phi;
    loc.omega = omega - 2.0 * M_PI * std::floor(omega / (2.0 * M_PI));
    return loc;
}

Eigen::Vector3d antenna_position(const ArrayGeometry& geom, int i, int j) {
    if (i < 1 || i > geom.n_x || j < 1 || j > geom.n_y) {
        throw std::out_of_range("antenna_position: index (" + std::to_string(i) + ", " +
                                std::to_string(j) + ") out of range");
    }
    return {(i - 0.5 * (geom.n_x + 1)) * geom.d_x,
            (j - 0.5 * (geom.n_y + 1)) * geom.d_y,
            0.0};
}

int flat_index(const ArrayGeometry& geom, int i, int j) {
    if (i < 1 || i > geom.n_x || j < 1 || j > geom.n_y) {
        throw std::out_of_range("flat_index: index out of range");
    }
    return (i - 1) * geom.n_y + j;
}

double fresnel_distance(double largest_dim, double wavelength) {
    return std::cbrt(largest_dim * largest_dim * largest_dim * largest_dim / (8.0 * wavelength));
}

double fraunhofer_distance(double largest_dim, double wavelength) {
    return 2.0 * largest_dim * largest_dim / wavelength;
}

RegionBoundaries region_boundaries(const ArrayGeometry& geom) {
    const double d = geom.largest_dimension();
    return {fresnel_distance(d, geom.wavelength), fraunhofer_distance(d, geom.wavelength)};
}

PartitionPlan partition(const ArrayGeometry& geom, int m_x, int m_y) {
    if (m_x <= 0 || m_y <= 0) {
        throw std::invalid_argument("partition: subarray counts must be positive");
    }
    if (geom.n_x % m_x != 0 || geom.n_y % m_y != 0) {
        throw std::invalid_argument("partition: m_x, m_y must divide n_x, n_y exactly");
    }
    PartitionPlan plan;
    plan.parent = geom;
    plan.m_x = m_x;
    plan.m_y = m_y;
    plan.n_mx = geom.n_x / m_x;
    plan.n_my = geom.n_y / m_y;

    const int m_total = m_x * m_y;
    plan.subarray_centers.resize(m_total);
    plan.subarray_flat_indices.resize(m_total);
    for (int gx = 1; gx <= m_x; ++gx) {
        for (int gy = 1; gy <= m_y; ++gy) {
            const int m = (gx - 1) * m_y + gy;
            auto& idx = plan.subarray_flat_indices[m - 1];
            idx.reserve(plan.n_mx * plan.n_my);
            Eigen::Vector3d center = Eigen::Vector3d::Zero();
            for (int k = 1; k <= plan.n_mx; ++k) {
                for (int l = 1; l <= plan.n_my; ++l) {
                    const int i = (gx - 1) * plan.n_mx + k;
                    const int j = (gy - 1) * plan.n_my + l;
                    idx.push_back(flat_index(geom, i, j));
                    center += antenna_position(geom, i, j);
                }
            }
            plan.subarray_centers[m - 1] = center / static_cast<double>(idx.size());
        }
    }
    return plan;
}

std::vector<bool> sfa_check(const PartitionPlan& plan, const Eigen::Vector3d& p_u) {
    const double r_fh = plan.subarray_fraunhofer_m();
    std::vector<bool> ok(plan.count());
    for (int m = 0; m < plan.count(); ++m) {
        ok[m] = r_fh < (p_u - plan.subarray_centers[m]).norm();
    }
    return ok;
}

} // namespace nfloc
