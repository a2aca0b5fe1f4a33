use serde::{Deserialize, Serialize};

/// Planar pose in meters and radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, yaw: 0.0 }
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        distance(self.xy(), p)
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Axis-aligned box given by center and half extents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub center: [f64; 2],
    pub half: [f64; 2],
}

impl Aabb {
    /// Bounds of a yawed rectangle.
    pub fn of(pose: &Pose, half_extents: [f64; 2]) -> Self {
        let (s, c) = pose.yaw.sin_cos();
        let hx = c.abs() * half_extents[0] + s.abs() * half_extents[1];
        let hy = s.abs() * half_extents[0] + c.abs() * half_extents[1];
        Self { center: pose.xy(), half: [hx, hy] }
    }

    pub fn inflate(self, margin: f64) -> Self {
        Self { center: self.center, half: [self.half[0] + margin, self.half[1] + margin] }
    }

    /// Strict overlap; touching boxes do not overlap.
    pub fn overlaps(&self, other: &Aabb) -> bool {
        (self.center[0] - other.center[0]).abs() < self.half[0] + other.half[0]
            && (self.center[1] - other.center[1]).abs() < self.half[1] + other.half[1]
    }

    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).abs() <= self.half[0] && (p[1] - self.center[1]).abs() <= self.half[1]
    }
}
