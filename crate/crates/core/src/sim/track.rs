use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{Segment, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("corridor width {corridor} leaves no inner rectangle in a {width} x {height} track")]
    NoInner { width: f64, height: f64, corridor: f64 },
    #[error("corridor width {corridor} is not wider than a car ({car_diameter})")]
    TooNarrow { corridor: f64, car_diameter: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    pub width: f64,
    pub height: f64,
    pub corridor: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig { width: 20.0, height: 10.0, corridor: 2.0 }
    }
}

/// Rectangular loop between an outer and an inner wall rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackMap {
    pub config: TrackConfig,
    pub walls: Vec<Segment>,
}

fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> [Segment; 4] {
    let (a, b, c, d) = (Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1));
    [Segment::new(a, b), Segment::new(b, c), Segment::new(c, d), Segment::new(d, a)]
}

impl TrackMap {
    pub fn new(config: TrackConfig, car_radius: f64) -> Result<Self, TrackError> {
        let TrackConfig { width, height, corridor } = config;
        if !(2.0 * corridor < width.min(height)) || corridor <= 0.0 {
            return Err(TrackError::NoInner { width, height, corridor });
        }
        if corridor <= 2.0 * car_radius {
            return Err(TrackError::TooNarrow { corridor, car_diameter: 2.0 * car_radius });
        }
        let mut walls = rectangle(0.0, 0.0, width, height).to_vec();
        walls.extend(rectangle(corridor, corridor, width - corridor, height - corridor));
        Ok(TrackMap { config, walls })
    }

    /// Corners of the centerline loop in driving order, starting with the
    /// bottom-left: the loop runs down the left corridor, right along the
    /// bottom, up the right side and back along the top.
    fn centerline_corners(&self) -> [Vec2; 4] {
        let h = self.config.corridor / 2.0;
        let (w, ht) = (self.config.width, self.config.height);
        [Vec2::new(h, ht - h), Vec2::new(w - h, ht - h), Vec2::new(w - h, h), Vec2::new(h, h)]
    }

    pub fn centerline_length(&self) -> f64 {
        2.0 * (self.config.width - self.config.corridor) + 2.0 * (self.config.height - self.config.corridor)
    }

    /// Start pose: middle of the left corridor, heading down.
    pub fn start(&self) -> (Vec2, f64) {
        (Vec2::new(self.config.corridor / 2.0, self.config.height / 2.0), std::f64::consts::FRAC_PI_2)
    }

    /// Point at arc length `s` along the centerline, measured from the start
    /// in driving direction.
    pub fn centerline_point(&self, s: f64) -> Vec2 {
        let corners = self.centerline_corners();
        let (start, _) = self.start();
        let total = self.centerline_length();
        let mut s = s.rem_euclid(total);
        let mut from = start;
        // First leg: start down to the bottom-left corner, then the loop,
        // then the top-left corner back down to the start.
        let path = [corners[0], corners[1], corners[2], corners[3], start];
        for to in path {
            let len = from.dist(to);
            if s <= len {
                return from + (to - from) * (if len == 0.0 { 0.0 } else { s / len });
            }
            s -= len;
            from = to;
        }
        start
    }

    /// Clearance from a point to the nearest wall.
    pub fn wall_distance(&self, p: Vec2) -> f64 {
        self.walls.iter().map(|w| w.distance_to(p)).fold(f64::INFINITY, f64::min)
    }

    /// Whether a point lies strictly inside the corridor.
    pub fn in_corridor(&self, p: Vec2) -> bool {
        let TrackConfig { width, height, corridor } = self.config;
        let inside_outer = p.x > 0.0 && p.x < width && p.y > 0.0 && p.y < height;
        let inside_inner = p.x > corridor && p.x < width - corridor && p.y > corridor && p.y < height - corridor;
        inside_outer && !inside_inner
    }
}
