//! Great-circle propagation delays.

use serde::{Deserialize, Serialize};

/// Mean Earth radius used for all distance computations, in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Signals in fibre travel at two thirds of the vacuum speed of light.
pub const FIBRE_SPEED_M_S: f64 = SPEED_OF_LIGHT_M_S * 2.0 / 3.0;

/// Latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoord {
    pub lat: f64,
    pub lon: f64,
}

impl GeoCoord {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite() && self.lon.is_finite() && (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Haversine great-circle distance in metres.
pub fn haversine_m(a: GeoCoord, b: GeoCoord) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // clamp guards against h drifting above 1 for antipodal points
    let c = 2.0 * h.sqrt().min(1.0).asin();
    EARTH_RADIUS_KM * 1000.0 * c
}

/// One-way propagation delay over fibre between two coordinates, in seconds.
pub fn propagation_delay_s(a: GeoCoord, b: GeoCoord) -> f64 {
    haversine_m(a, b) / FIBRE_SPEED_M_S
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent spherical law-of-cosines distance (well conditioned for
    /// the ~250 km separations used below).
    fn law_of_cosines_m(a: GeoCoord, b: GeoCoord) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lon - a.lon).to_radians();
        let cos_c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_KM * 1000.0 * cos_c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn identical_coordinates_have_zero_delay() {
        let p = GeoCoord::new(52.2689, 10.5268);
        assert_eq!(propagation_delay_s(p, p), 0.0);
    }

    #[test]
    fn braunschweig_to_frankfurt_matches_independent_formula() {
        let bs = GeoCoord::new(52.2689, 10.5268);
        let fra = GeoCoord::new(50.1109, 8.6821);
        let oracle = law_of_cosines_m(bs, fra);
        let d = haversine_m(bs, fra);
        assert!((d - oracle).abs() < 1e-3, "{d} vs {oracle}");
        // frozen from the oracle: ~272.2 km
        assert!((d / 1000.0 - 272.205).abs() < 0.01, "{}", d / 1000.0);
        let delay = propagation_delay_s(bs, fra);
        assert!((delay - oracle / (2.0 * SPEED_OF_LIGHT_M_S / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn antipodal_points_take_half_circumference() {
        let a = GeoCoord::new(0.0, 0.0);
        let b = GeoCoord::new(0.0, 180.0);
        let expected = std::f64::consts::PI * 6_371_000.0 / (2.0 * 299_792_458.0 / 3.0);
        let d = propagation_delay_s(a, b);
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 0.1001).abs() < 1e-4);
    }

    #[test]
    fn delay_is_symmetric() {
        let a = GeoCoord::new(34.0, -81.0);
        let b = GeoCoord::new(39.04, -77.49);
        assert_eq!(propagation_delay_s(a, b), propagation_delay_s(b, a));
    }
}
