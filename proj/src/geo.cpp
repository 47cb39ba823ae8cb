#include "tilefreq/geo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tilefreq {

namespace {

// GRS80
constexpr double kSemiMajor = 6378137.0;
constexpr double kInvFlattening = 298.257222101;
constexpr double kLat0Deg = 52.0;
constexpr double kLon0Deg = 10.0;
constexpr double kFalseEasting = 4321000.0;
constexpr double kFalseNorthing = 3210000.0;
constexpr double kMeanRadius = 6371008.8;
constexpr double kDegToRad = M_PI / 180.0;

struct LaeaConsts {
    double e;       // first eccentricity
    double e2;
    double qp;      // authalic q at the pole
    double sin_b0;  // authalic latitude of the natural origin
    double cos_b0;
    double rq;      // radius of the authalic sphere
    double d;       // scale balance factor between axes
};

double authalic_q(double sinphi, double e, double e2) {
    return (1.0 - e2) * (sinphi / (1.0 - e2 * sinphi * sinphi)
                         - (0.5 / e) * std::log((1.0 - e * sinphi) / (1.0 + e * sinphi)));
}

const LaeaConsts& laea() {
    static const LaeaConsts c = [] {
        LaeaConsts c{};
        double f = 1.0 / kInvFlattening;
        c.e2 = f * (2.0 - f);
        c.e = std::sqrt(c.e2);
        c.qp = authalic_q(1.0, c.e, c.e2);
        double lat0 = kLat0Deg * kDegToRad;
        double b0 = std::asin(authalic_q(std::sin(lat0), c.e, c.e2) / c.qp);
        c.sin_b0 = std::sin(b0);
        c.cos_b0 = std::cos(b0);
        c.rq = kSemiMajor * std::sqrt(0.5 * c.qp);
        c.d = kSemiMajor
              * (std::cos(lat0) / std::sqrt(1.0 - c.e2 * std::sin(lat0) * std::sin(lat0)))
              / (c.rq * c.cos_b0);
        return c;
    }();
    return c;
}

}  // namespace

PlanePoint project_to_laea(double lat_deg, double lon_deg) {
    if (!(lat_deg >= -90.0 && lat_deg <= 90.0)) {
        throw std::domain_error("project_to_laea: latitude out of [-90, 90]: " + std::to_string(lat_deg));
    }
    if (!(lon_deg >= -180.0 && lon_deg <= 180.0)) {
        throw std::domain_error("project_to_laea: longitude out of [-180, 180]: " + std::to_string(lon_deg));
    }
    const LaeaConsts& c = laea();
    double phi = lat_deg * kDegToRad;
    double dlam = (lon_deg - kLon0Deg) * kDegToRad;
    double beta = std::asin(std::clamp(authalic_q(std::sin(phi), c.e, c.e2) / c.qp, -1.0, 1.0));
    double sb = std::sin(beta);
    double cb = std::cos(beta);
    double denom = 1.0 + c.sin_b0 * sb + c.cos_b0 * cb * std::cos(dlam);
    if (denom < 1e-12) {
        throw std::domain_error("project_to_laea: point is antipodal to the projection origin");
    }
    double bfac = c.rq * std::sqrt(2.0 / denom);
    return {kFalseEasting + bfac * c.d * cb * std::sin(dlam),
            kFalseNorthing + (bfac / c.d) * (c.cos_b0 * sb - c.sin_b0 * cb * std::cos(dlam))};
}

GeoPoint inverse_laea(double easting, double northing) {
    // Local linearization is nearly isometric, so Newton with a finite
    // difference Jacobian converges in a handful of steps.
    double lat = kLat0Deg + (northing - kFalseNorthing) / 111000.0;
    double lon = kLon0Deg + (easting - kFalseEasting) / (111000.0 * std::max(0.2, std::cos(lat * kDegToRad)));
    lat = std::clamp(lat, -89.9, 89.9);
    lon = std::clamp(lon, -179.9, 179.9);
    const double h = 1e-7;  // degrees
    for (int iter = 0; iter < 50; ++iter) {
        PlanePoint p = project_to_laea(lat, lon);
        double rx = p.easting - easting;
        double ry = p.northing - northing;
        if (std::abs(rx) < 1e-6 && std::abs(ry) < 1e-6) {
            return {lat, lon};
        }
        PlanePoint plat = project_to_laea(std::min(lat + h, 90.0), lon);
        PlanePoint plon = project_to_laea(lat, std::min(lon + h, 180.0));
        double j11 = (plat.easting - p.easting) / h;   // de/dlat
        double j12 = (plon.easting - p.easting) / h;   // de/dlon
        double j21 = (plat.northing - p.northing) / h;
        double j22 = (plon.northing - p.northing) / h;
        double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-12) {
            break;
        }
        lat -= (j22 * rx - j12 * ry) / det;
        lon -= (-j21 * rx + j11 * ry) / det;
        lat = std::clamp(lat, -89.999, 89.999);
        lon = std::clamp(lon, -179.999, 179.999);
    }
    throw std::runtime_error("inverse_laea: Newton iteration did not converge");
}

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    double p1 = lat1 * kDegToRad;
    double p2 = lat2 * kDegToRad;
    double dp = (lat2 - lat1) * kDegToRad;
    double dl = (lon2 - lon1) * kDegToRad;
    double s1 = std::sin(0.5 * dp);
    double s2 = std::sin(0.5 * dl);
    double h = s1 * s1 + std::cos(p1) * std::cos(p2) * s2 * s2;
    return 2.0 * kMeanRadius * std::asin(std::min(1.0, std::sqrt(h)));
}

double planar_distance(const PlanePoint& a, const PlanePoint& b) {
    return std::hypot(a.easting - b.easting, a.northing - b.northing);
}

}  // namespace tilefreq
