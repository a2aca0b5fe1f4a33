use serde::{Deserialize, Serialize};

use crate::pddl::Symbol;

use super::geometry::{distance, Aabb, Pose};
use super::SimError;

/// Grid pitch used to sample placement poses.
pub const CELL_PITCH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Block,
    Hook,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub name: Symbol,
    pub kind: ObjectKind,
    pub pose: Pose,
    pub half_extents: [f64; 2],
    /// Region, block or arm (while held) this object rests on.
    pub support: Symbol,
    /// 1 on a region, support level + 1 on a block, 0 while held.
    pub level: u32,
    /// Extra reach a hook gives the arm holding it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

impl WorldObject {
    pub fn block(name: &str, x: f64, y: f64, support: &str) -> Self {
        Self {
            name: Symbol::new(name),
            kind: ObjectKind::Block,
            pose: Pose::new(x, y),
            half_extents: [0.02, 0.02],
            support: Symbol::new(support),
            level: 1,
            tool_length: None,
            color: None,
        }
    }

    pub fn footprint(&self) -> Aabb {
        Aabb::of(&self.pose, self.half_extents)
    }

    pub fn is_block(&self) -> bool {
        self.kind == ObjectKind::Block
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Table,
    Shelf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: Symbol,
    pub kind: RegionKind,
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Region {
    pub fn new(name: &str, kind: RegionKind, min: [f64; 2], max: [f64; 2]) -> Self {
        Self { name: Symbol::new(name), kind, min, max }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] - 1e-9 && p[0] <= self.max[0] + 1e-9 && p[1] >= self.min[1] - 1e-9 && p[1] <= self.max[1] + 1e-9
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0]
    }

    /// Cell centers of the placement grid, row-major from the minimum corner.
    pub fn cells(&self) -> Vec<[f64; 2]> {
        let count = |lo: f64, hi: f64| ((hi - lo) / CELL_PITCH + 1e-9).floor() as usize;
        let (nx, ny) = (count(self.min[0], self.max[0]), count(self.min[1], self.max[1]));
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                out.push([
                    self.min[0] + CELL_PITCH * (i as f64 + 0.5),
                    self.min[1] + CELL_PITCH * (j as f64 + 0.5),
                ]);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub name: Symbol,
    pub base: [f64; 2],
    pub reach: f64,
    #[serde(default)]
    pub holding: Option<Symbol>,
    pub effector: [f64; 2],
    /// Where the held object was taken from, so that putting it back into
    /// the same region restores its pose.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasped_from: Option<Pose>,
}

impl Arm {
    pub fn new(name: &str, base: [f64; 2], reach: f64, effector: [f64; 2]) -> Self {
        Self { name: Symbol::new(name), base, reach, holding: None, effector, grasped_from: None }
    }

    pub fn reaches(&self, p: [f64; 2]) -> bool {
        distance(self.base, p) <= self.reach + 1e-9
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: Vec<WorldObject>,
    pub arms: Vec<Arm>,
    pub regions: Vec<Region>,
    #[serde(default)]
    pub time: f64,
}

impl WorldState {
    /// Sorts objects by name and checks every invariant.
    pub fn new(mut objects: Vec<WorldObject>, arms: Vec<Arm>, regions: Vec<Region>) -> Result<Self, SimError> {
        objects.sort_by(|a, b| a.name.cmp(&b.name));
        let world = Self { objects, arms, regions, time: 0.0 };
        world.validate()?;
        Ok(world)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let mut world: WorldState = serde_json::from_str(text).map_err(|e| SimError::Invalid(format!("world file: {e}")))?;
        world.objects.sort_by(|a, b| a.name.cmp(&b.name));
        world.validate()?;
        Ok(world)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn object(&self, name: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.name.as_str() == name)
    }

    pub(crate) fn object_mut(&mut self, name: &str) -> Option<&mut WorldObject> {
        self.objects.iter_mut().find(|o| o.name.as_str() == name)
    }

    pub fn arm(&self, name: &str) -> Option<&Arm> {
        self.arms.iter().find(|a| a.name.as_str() == name)
    }

    pub(crate) fn arm_mut(&mut self, name: &str) -> Option<&mut Arm> {
        self.arms.iter_mut().find(|a| a.name.as_str() == name)
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.name.as_str() == name)
    }

    pub fn require_object(&self, name: &str) -> Result<&WorldObject, SimError> {
        self.object(name).ok_or_else(|| SimError::UnknownObject(name.to_string()))
    }

    pub fn require_arm(&self, name: &str) -> Result<&Arm, SimError> {
        self.arm(name).ok_or_else(|| SimError::UnknownArm(name.to_string()))
    }

    pub fn require_region(&self, name: &str) -> Result<&Region, SimError> {
        self.region(name).ok_or_else(|| SimError::UnknownRegion(name.to_string()))
    }

    /// Object resting directly on `name`, if any.
    pub fn above(&self, name: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.support.as_str() == name)
    }

    pub fn holder(&self, name: &str) -> Option<&Arm> {
        self.arms.iter().find(|a| a.holding.as_ref().is_some_and(|h| h.as_str() == name))
    }

    /// Region at the bottom of the support chain; `None` while held.
    pub fn base_region(&self, name: &str) -> Option<&Region> {
        let mut current = self.object(name)?;
        for _ in 0..=self.objects.len() {
            if let Some(r) = self.region(current.support.as_str()) {
                return Some(r);
            }
            current = self.object(current.support.as_str())?;
        }
        None
    }

    /// Effective reach of an arm, extended by the tool it holds.
    pub fn tool_reach(&self, arm: &Arm) -> f64 {
        arm.reach
            + arm
                .holding
                .as_ref()
                .and_then(|h| self.object(h.as_str()))
                .and_then(|o| o.tool_length)
                .unwrap_or(0.0)
    }

    /// First free grid cell of `region` that `arm` reaches, preferring
    /// `preferred` when it lies in the region and is free. `ignore` is
    /// excluded from the overlap test.
    pub fn free_cell(&self, region: &Region, arm: &Arm, half_extents: [f64; 2], ignore: &str, preferred: Option<Pose>) -> Option<Pose> {
        let free = |p: &Pose| {
            let fp = Aabb::of(p, half_extents);
            region.contains(p.xy())
                && arm.reaches(p.xy())
                && self
                    .objects
                    .iter()
                    .filter(|o| o.level == 1 && o.name.as_str() != ignore)
                    .all(|o| !o.footprint().overlaps(&fp))
        };
        if let Some(p) = preferred.filter(|p| free(p)) {
            return Some(p);
        }
        region.cells().into_iter().map(|c| Pose::new(c[0], c[1])).find(free)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut names: Vec<&str> = self
            .objects
            .iter()
            .map(|o| o.name.as_str())
            .chain(self.arms.iter().map(|a| a.name.as_str()))
            .chain(self.regions.iter().map(|r| r.name.as_str()))
            .collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(SimError::Invalid(format!("name {} used twice", w[0])));
        }
        for v in self.objects.iter().flat_map(|o| [o.pose.x, o.pose.y, o.pose.yaw, o.half_extents[0], o.half_extents[1]]) {
            if !v.is_finite() {
                return Err(SimError::Invalid("non-finite object geometry".into()));
            }
        }
        for arm in &self.arms {
            if let Some(h) = &arm.holding {
                let o = self.require_object(h.as_str())?;
                if o.support != arm.name || o.level != 0 {
                    return Err(SimError::Invalid(format!("{h} is held by {} but rests on {}", arm.name, o.support)));
                }
            }
        }
        for o in &self.objects {
            let s = o.support.as_str();
            if let Some(region) = self.region(s) {
                if o.level != 1 {
                    return Err(SimError::Invalid(format!("{} on region {s} must have level 1", o.name)));
                }
                if !region.contains(o.pose.xy()) {
                    return Err(SimError::Invalid(format!("{} lies outside region {s}", o.name)));
                }
            } else if let Some(arm) = self.arm(s) {
                if arm.holding.as_ref() != Some(&o.name) || o.level != 0 {
                    return Err(SimError::Invalid(format!("{} claims to be held by {s}", o.name)));
                }
            } else if let Some(below) = self.object(s) {
                if !below.is_block() || !o.is_block() {
                    return Err(SimError::Invalid(format!("{} cannot rest on {s}", o.name)));
                }
                if below.level == 0 || o.level != below.level + 1 {
                    return Err(SimError::Invalid(format!("{} has level {} on {s} at level {}", o.name, o.level, below.level)));
                }
                let dx = (o.pose.x - below.pose.x).abs();
                let dy = (o.pose.y - below.pose.y).abs();
                if dx > below.half_extents[0] || dy > below.half_extents[1] {
                    return Err(SimError::Invalid(format!("{} overhangs {s}", o.name)));
                }
            } else {
                return Err(SimError::Invalid(format!("{} rests on unknown {s}", o.name)));
            }
            if self.base_region(o.name.as_str()).is_none() && o.level != 0 {
                return Err(SimError::Invalid(format!("support chain of {} is cyclic", o.name)));
            }
        }
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                if a.level > 0 && a.level == b.level && a.footprint().overlaps(&b.footprint()) {
                    return Err(SimError::Invalid(format!("{} overlaps {}", a.name, b.name)));
                }
            }
        }
        Ok(())
    }
}
