use serde::{Deserialize, Serialize};

use super::{Time, EPS};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// How travel times between locations are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TravelModel {
    /// Coordinates are (latitude, longitude) in degrees; distances are
    /// great-circle metres and speeds are metres per time unit.
    Geo {
        #[serde(default = "default_earth_radius")]
        earth_radius_m: f64,
    },
    /// Coordinates are abstract grid cells; distances use the taxicab metric
    /// and speeds are cells per time unit.
    Grid,
    /// Explicit agent-independent travel times indexed by location id.
    /// Agent speeds are ignored.
    Matrix { times: Vec<Vec<Time>> },
}

fn default_earth_radius() -> f64 {
    EARTH_RADIUS_M
}

impl Default for TravelModel {
    fn default() -> Self {
        TravelModel::Geo {
            earth_radius_m: EARTH_RADIUS_M,
        }
    }
}

impl TravelModel {
    /// Distance between two coordinate pairs, in the unit of this model.
    ///
    /// Returns `None` for [`TravelModel::Matrix`], which has no metric.
    pub fn distance(&self, from: [f64; 2], to: [f64; 2]) -> Option<f64> {
        match self {
            TravelModel::Geo { earth_radius_m } => Some(haversine(from, to, *earth_radius_m)),
            TravelModel::Grid => Some((from[0] - to[0]).abs() + (from[1] - to[1]).abs()),
            TravelModel::Matrix { .. } => None,
        }
    }

    /// Travel time in whole time units, rounded up.
    pub(crate) fn time(
        &self,
        speed: f64,
        from: (usize, [f64; 2]),
        to: (usize, [f64; 2]),
    ) -> Time {
        if from.0 == to.0 {
            return 0;
        }
        match self {
            TravelModel::Matrix { times } => times[from.0][to.0],
            _ => {
                let d = self.distance(from.1, to.1).unwrap_or(0.0);
                units_ceil(d / speed)
            }
        }
    }
}

/// `ceil(x)` on the time grid, ignoring floating noise just above an integer.
pub(crate) fn units_ceil(x: f64) -> Time {
    let c = (x - EPS).ceil();
    if c <= 0.0 {
        0
    } else {
        c as Time
    }
}

/// Great-circle distance in metres between two (lat, lon) points in degrees.
pub fn haversine(from: [f64; 2], to: [f64; 2], radius: f64) -> f64 {
    let (lat1, lon1) = (from[0].to_radians(), from[1].to_radians());
    let (lat2, lon2) = (to[0].to_radians(), to[1].to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let a = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * radius * a.sqrt().min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haversine_symmetric_and_zero() {
        let a = [51.5074, -0.1278];
        let b = [48.8566, 2.3522];
        assert_eq!(haversine(a, a, EARTH_RADIUS_M), 0.0);
        let ab = haversine(a, b, EARTH_RADIUS_M);
        let ba = haversine(b, a, EARTH_RADIUS_M);
        assert!((ab - ba).abs() < 1e-6);
        // London to Paris is roughly 343.5 km.
        assert!((ab - 343_500.0).abs() < 1_000.0, "{ab}");
    }

    #[test]
    fn ceil_absorbs_noise() {
        assert_eq!(units_ceil(5.0 + 1e-12), 5);
        assert_eq!(units_ceil(5.001), 6);
        assert_eq!(units_ceil(0.0), 0);
        assert_eq!(units_ceil(-3.0), 0);
    }
}
