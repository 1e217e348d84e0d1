//! Lateral guidance for cruise and loiter, plus the geofence.

use serde::{Deserialize, Serialize};

use crate::controller::LoiterCommand;
use crate::error::{Result, SoarError};
use crate::glider::{wrap_angle, GliderState};
use crate::thermal_env::WindVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub north: f64,
    pub east: f64,
}

impl Waypoint {
    pub fn new(north: f64, east: f64) -> Self {
        Self { north, east }
    }

    pub fn distance_to(&self, north: f64, east: f64) -> f64 {
        (self.north - north).hypot(self.east - east)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavConfig {
    /// Bank per radian of heading error, rad/rad.
    pub heading_gain: f64,
    pub cruise_bank_limit_deg: f64,
    pub acceptance_radius: f64,
    pub loiter_heading_gain: f64,
    pub loiter_bank_limit_deg: f64,
    /// Distance over which radial error is converted to a heading offset, m.
    pub loiter_lookahead: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            heading_gain: 1.0,
            cruise_bank_limit_deg: 40.0,
            acceptance_radius: 20.0,
            loiter_heading_gain: 1.5,
            loiter_bank_limit_deg: 45.0,
            loiter_lookahead: 8.0,
        }
    }
}

fn ground_course(state: &GliderState, wind: WindVector) -> (f64, f64) {
    let (vn, ve) = state.ground_velocity(wind);
    let speed = vn.hypot(ve);
    let course = if speed > 1e-6 { ve.atan2(vn) } else { state.heading };
    (course, speed)
}

/// Proportional steering of the ground course toward the active waypoint.
///
/// Returns the bank command and the (possibly advanced) waypoint index. The
/// course wraps back to the first waypoint after the last one.
pub fn cruise_navigation(
    state: &GliderState,
    wind: WindVector,
    waypoints: &[Waypoint],
    current_index: usize,
    nav: &NavConfig,
) -> (f64, usize) {
    if waypoints.is_empty() {
        return (0.0, 0);
    }
    let mut index = current_index % waypoints.len();
    if waypoints[index].distance_to(state.north, state.east) < nav.acceptance_radius {
        index = (index + 1) % waypoints.len();
    }
    let wp = waypoints[index];
    let bearing = (wp.east - state.east).atan2(wp.north - state.north);
    let (course, _) = ground_course(state, wind);
    let error = wrap_angle(bearing - course);
    let limit = nav.cruise_bank_limit_deg.to_radians();
    ((nav.heading_gain * error).clamp(-limit, limit), index)
}

/// Bank command that captures and holds the commanded circle.
///
/// Desired ground course is the circle tangent, rotated toward the centre in
/// proportion to the radial error. The coordinated-turn bank is fed forward
/// near the circle and fades out away from it.
pub fn loiter_tracking(
    state: &GliderState,
    wind: WindVector,
    cmd: &LoiterCommand,
    nav: &NavConfig,
    g: f64,
) -> f64 {
    let (course, ground_speed) = ground_course(state, wind);

    let rel_n = state.north - cmd.center_north;
    let rel_e = state.east - cmd.center_east;
    let dist = rel_n.hypot(rel_e);
    // At the centre every direction is outward; pick the current course.
    let bearing_out = if dist > 1e-6 { rel_e.atan2(rel_n) } else { course };

    let s = cmd.direction.sign();
    let radial_error = dist - cmd.radius;
    let tangent = bearing_out + s * std::f64::consts::FRAC_PI_2;
    let desired = tangent + s * (radial_error / nav.loiter_lookahead).atan();
    let heading_error = wrap_angle(desired - course);

    let fade = (1.0 - radial_error.abs() / cmd.radius).max(0.0);
    let feed_forward = s * (ground_speed * ground_speed / (g * cmd.radius)).atan() * fade;

    let limit = nav.loiter_bank_limit_deg.to_radians();
    (feed_forward + nav.loiter_heading_gain * heading_error).clamp(-limit, limit)
}

/// Convex polygon bounding permitted flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Geofence {
    vertices: Vec<[f64; 2]>,
}

impl Geofence {
    /// Vertices as `[north, east]`, in either winding order.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(SoarError::scenario("geofence", "needs at least three vertices"));
        }
        let n = vertices.len();
        let mut sign = 0.0;
        for i in 0..n {
            let [a, b, c] = [vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross.abs() < 1e-12 {
                continue;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return Err(SoarError::scenario("geofence", "polygon must be convex"));
            }
        }
        if sign == 0.0 {
            return Err(SoarError::scenario("geofence", "polygon is degenerate"));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Inclusive containment test.
    pub fn contains(&self, north: f64, east: f64) -> bool {
        let n = self.vertices.len();
        let mut sign = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let cross = (b[0] - a[0]) * (east - a[1]) - (b[1] - a[1]) * (north - a[0]);
            if cross == 0.0 {
                continue;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }
}

impl TryFrom<Vec<[f64; 2]>> for Geofence {
    type Error = SoarError;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Geofence::new(v)
    }
}

impl From<Geofence> for Vec<[f64; 2]> {
    fn from(g: Geofence) -> Self {
        g.vertices
    }
}

/// Index of the waypoint closest to the given point.
pub fn nearest_waypoint(waypoints: &[Waypoint], north: f64, east: f64) -> usize {
    waypoints
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.distance_to(north, east)
                .total_cmp(&b.1.distance_to(north, east))
        })
        .map_or(0, |(i, _)| i)
}
