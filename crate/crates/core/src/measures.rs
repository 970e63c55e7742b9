//! Scan measurements and stopping kinematics shared by guards and controllers.

use std::ops::Range;

use thiserror::Error;

/// Angular width of the forward sector used for obstacle detection.
pub const FRONT_SECTOR_DEG: f64 = 41.5;
/// Default scan field of view.
pub const DEFAULT_FOV_DEG: f64 = 230.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KinError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
}

/// Angle in degrees of ray `i` of `n` evenly spanning `fov_deg`, centered on
/// the heading. Negative angles are on the left.
pub fn ray_angle_deg(i: usize, n: usize, fov_deg: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    -fov_deg / 2.0 + fov_deg * i as f64 / (n - 1) as f64
}

/// Indices of the rays whose angle lies within the centered sector. Always
/// contains at least the center ray for a non-empty scan.
pub fn front_sector(n: usize, fov_deg: f64, sector_deg: f64) -> Range<usize> {
    if n == 0 {
        return 0..0;
    }
    let center = (n - 1) / 2;
    if n < 2 {
        return center..center + 1;
    }
    let spacing = fov_deg / (n - 1) as f64;
    let half = ((sector_deg / 2.0) / spacing + 1e-9).floor() as usize;
    let half = half.min(center);
    center - half..center + half + 1
}

/// Minimum reading over the centered sector. `+inf` for an empty scan.
pub fn min_front(rays: &[f64], fov_deg: f64, sector_deg: f64) -> f64 {
    rays[front_sector(rays.len(), fov_deg, sector_deg)].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Minimum constant deceleration that stops from `speed` within `distance`,
/// scaled by `factor`.
pub fn kin(distance: f64, speed: f64, factor: f64) -> Result<f64, KinError> {
    if !(distance > 0.0) {
        return Err(KinError::NonPositiveDistance(distance));
    }
    Ok(factor * speed * speed / (2.0 * distance))
}
