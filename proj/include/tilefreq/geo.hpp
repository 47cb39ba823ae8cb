#pragma once

namespace tilefreq {

struct PlanePoint {
    double easting = 0.0;
    double northing = 0.0;
};

struct GeoPoint {
    double lat = 0.0;  // degrees
    double lon = 0.0;
};

// Forward ellipsoidal Lambert azimuthal equal-area mapping with the
// ETRS89-LAEA parameter set: GRS80 ellipsoid, natural origin 52N 10E,
// false easting 4 321 000 m, false northing 3 210 000 m.
// Throws std::domain_error when lat/lon are out of range.
PlanePoint project_to_laea(double lat_deg, double lon_deg);

// Inverse of project_to_laea, solved by Newton iteration on the forward map.
GeoPoint inverse_laea(double easting, double northing);

// Great-circle distance in meters on the mean-radius sphere.
double haversine_m(double lat1, double lon1, double lat2, double lon2);

double planar_distance(const PlanePoint& a, const PlanePoint& b);

}  // namespace tilefreq
