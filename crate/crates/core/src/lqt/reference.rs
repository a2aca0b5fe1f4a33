use serde::{Deserialize, Serialize};

use super::LqtError;

/// One sample of a demonstrated profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

/// A position the trajectory has to pass through at a given step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViaPoint {
    pub step: usize,
    pub position: Vec<f64>,
    pub precision: f64,
}

/// Demonstrated position/velocity/acceleration profile plus the terminal
/// attractor it should converge to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub dt: f64,
    pub goal: Vec<f64>,
    pub steps: Vec<ReferenceSample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub via: Vec<ViaPoint>,
}

fn check_finite(values: &[f64]) -> Result<(), LqtError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LqtError::NonFinite)
    }
}

impl ReferenceTrajectory {
    /// Builds a reference from raw positions. Velocities and accelerations
    /// come from central differences, one-sided at both ends.
    pub fn from_positions(positions: &[Vec<f64>], dt: f64, goal: &[f64]) -> Result<Self, LqtError> {
        if positions.len() < 3 {
            return Err(LqtError::TooFewSamples(positions.len()));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(LqtError::InvalidTimeStep(dt));
        }
        let dim = goal.len();
        for p in positions {
            if p.len() != dim {
                return Err(LqtError::DimensionMismatch { expected: dim, found: p.len() });
            }
            check_finite(p)?;
        }
        check_finite(goal)?;

        let n = positions.len();
        let mut steps = Vec::with_capacity(n);
        for t in 0..n {
            let mut v = vec![0.0; dim];
            let mut a = vec![0.0; dim];
            for i in 0..dim {
                let p = |k: usize| positions[k][i];
                v[i] = if t == 0 {
                    (3.0 * (p(1) - p(0)) - (p(2) - p(1))) / (2.0 * dt)
                } else if t == n - 1 {
                    (3.0 * (p(n - 1) - p(n - 2)) - (p(n - 2) - p(n - 3))) / (2.0 * dt)
                } else {
                    (p(t + 1) - p(t - 1)) / (2.0 * dt)
                };
                // ends reuse the stencil of their neighbour
                let c = t.clamp(1, n - 2);
                a[i] = ((p(c + 1) - p(c)) - (p(c) - p(c - 1))) / (dt * dt);
            }
            steps.push(ReferenceSample { p: positions[t].clone(), v, a });
        }
        Ok(Self { dt, goal: goal.to_vec(), steps, via: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.goal.len()
    }

    /// Number of transitions T (there are T+1 samples).
    pub fn horizon(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn duration(&self) -> f64 {
        self.horizon() as f64 * self.dt
    }

    pub fn start(&self) -> &[f64] {
        &self.steps[0].p
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.p.clone()).collect()
    }

    pub fn with_via(mut self, via: Vec<ViaPoint>) -> Self {
        self.via = via;
        self
    }

    /// Checks the structural invariants (T >= 1, consistent dimensions,
    /// finite samples, via indices strictly inside the horizon).
    pub fn validate(&self) -> Result<(), LqtError> {
        if self.steps.len() < 2 {
            return Err(LqtError::TooFewSamples(self.steps.len()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(LqtError::InvalidTimeStep(self.dt));
        }
        let dim = self.dim();
        check_finite(&self.goal)?;
        for s in &self.steps {
            for part in [&s.p, &s.v, &s.a] {
                if part.len() != dim {
                    return Err(LqtError::DimensionMismatch { expected: dim, found: part.len() });
                }
                check_finite(part)?;
            }
        }
        let horizon = self.horizon();
        for via in &self.via {
            if via.step == 0 || via.step >= horizon {
                return Err(LqtError::ViaIndexOutOfRange { step: via.step, horizon });
            }
            if via.position.len() != dim {
                return Err(LqtError::DimensionMismatch { expected: dim, found: via.position.len() });
            }
        }
        Ok(())
    }

    /// Rigid translation of positions, goal and via targets.
    pub fn translated(&self, offset: &[f64]) -> Result<Self, LqtError> {
        if offset.len() != self.dim() {
            return Err(LqtError::DimensionMismatch { expected: self.dim(), found: offset.len() });
        }
        check_finite(offset)?;
        let mut out = self.clone();
        let shift = |p: &mut Vec<f64>| p.iter_mut().zip(offset).for_each(|(x, o)| *x += o);
        for s in &mut out.steps {
            shift(&mut s.p);
        }
        shift(&mut out.goal);
        for via in &mut out.via {
            shift(&mut via.position);
        }
        Ok(out)
    }

    /// Re-anchors the reference so that (start, goal) maps to
    /// (`new_start`, `new_goal`) with an independent scale and offset per
    /// dimension. Dimensions whose demonstrated span is below 1e-9 are only
    /// translated. Via-points follow the same map unless `new_via` replaces them.
    pub fn generalize(
        &self,
        new_start: &[f64],
        new_goal: &[f64],
        new_via: Option<&[ViaPoint]>,
    ) -> Result<Self, LqtError> {
        let dim = self.dim();
        for v in [new_start, new_goal] {
            if v.len() != dim {
                return Err(LqtError::DimensionMismatch { expected: dim, found: v.len() });
            }
            check_finite(v)?;
        }
        let old_start = self.start().to_vec();
        let maps: Vec<AxisMap> = (0..dim)
            .map(|i| AxisMap::new(old_start[i], self.goal[i], new_start[i], new_goal[i]))
            .collect();

        let mut out = self.clone();
        for s in &mut out.steps {
            for (i, m) in maps.iter().enumerate() {
                s.p[i] = m.position(s.p[i]);
                s.v[i] = m.derivative(s.v[i]);
                s.a[i] = m.derivative(s.a[i]);
            }
        }
        for (i, m) in maps.iter().enumerate() {
            if !m.identity {
                out.goal[i] = new_goal[i];
            }
        }
        match new_via {
            Some(via) => out.via = via.to_vec(),
            None => {
                for via in &mut out.via {
                    for (i, m) in maps.iter().enumerate() {
                        via.position[i] = m.position(via.position[i]);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug)]
struct AxisMap {
    identity: bool,
    scale: f64,
    from: f64,
    to: f64,
}

impl AxisMap {
    fn new(old_start: f64, old_goal: f64, new_start: f64, new_goal: f64) -> Self {
        let identity = old_start == new_start && old_goal == new_goal;
        let span = old_goal - old_start;
        let scale = if span.abs() < 1e-9 { 1.0 } else { (new_goal - new_start) / span };
        Self { identity, scale, from: old_start, to: new_start }
    }

    fn position(&self, p: f64) -> f64 {
        if self.identity {
            p
        } else {
            self.to + self.scale * (p - self.from)
        }
    }

    fn derivative(&self, d: f64) -> f64 {
        if self.identity {
            d
        } else {
            self.scale * d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, from: &[f64], to: &[f64]) -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| {
                let s = k as f64 / (n - 1) as f64;
                from.iter().zip(to).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect()
    }

    #[test]
    fn constant_positions_have_zero_derivatives() {
        let p = vec![0.3, -0.2];
        let positions = vec![p.clone(); 10];
        let r = ReferenceTrajectory::from_positions(&positions, 0.01, &p).unwrap();
        for s in &r.steps {
            assert!(s.v.iter().chain(&s.a).all(|x| *x == 0.0));
        }
        assert_eq!(r.goal, p);
        assert_eq!(r.horizon(), 9);
    }

    #[test]
    fn parabola_has_constant_acceleration() {
        let dt = 0.1;
        let positions: Vec<Vec<f64>> = (0..20).map(|k| vec![(k as f64 * dt).powi(2)]).collect();
        let r = ReferenceTrajectory::from_positions(&positions, dt, &[positions[19][0]]).unwrap();
        for s in &r.steps[1..19] {
            assert!((s.a[0] - 2.0).abs() < 1e-6, "{}", s.a[0]);
        }
        // velocity matches 2t within the 10*dt consistency bound
        for (k, s) in r.steps.iter().enumerate() {
            assert!((s.v[0] - 2.0 * k as f64 * dt).abs() < 10.0 * dt);
        }
    }

    #[test]
    fn rejects_short_or_non_finite_input() {
        assert!(matches!(
            ReferenceTrajectory::from_positions(&[vec![0.0], vec![1.0]], 0.1, &[1.0]),
            Err(LqtError::TooFewSamples(2))
        ));
        let bad = vec![vec![0.0], vec![f64::NAN], vec![1.0]];
        assert!(matches!(ReferenceTrajectory::from_positions(&bad, 0.1, &[1.0]), Err(LqtError::NonFinite)));
        let ok = vec![vec![0.0], vec![0.5], vec![1.0]];
        assert!(ReferenceTrajectory::from_positions(&ok, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn identity_generalization_is_bitwise() {
        let positions = line(11, &[0.1, 0.7], &[0.33, -0.21]);
        let r = ReferenceTrajectory::from_positions(&positions, 0.01, &[0.33, -0.21])
            .unwrap()
            .with_via(vec![ViaPoint { step: 4, position: vec![0.2, 0.3], precision: 1e4 }]);
        let g = r.generalize(&[0.1, 0.7], &[0.33, -0.21], None).unwrap();
        assert_eq!(g, r);
    }

    #[test]
    fn scaling_doubles_positions_and_accelerations() {
        let positions: Vec<Vec<f64>> = (0..11).map(|k| vec![(k as f64 / 10.0).powi(2)]).collect();
        let r = ReferenceTrajectory::from_positions(&positions, 0.1, &[1.0]).unwrap();
        let g = r.generalize(&[0.0], &[2.0], None).unwrap();
        for (a, b) in r.steps.iter().zip(&g.steps) {
            assert!((b.p[0] - 2.0 * a.p[0]).abs() < 1e-12);
            assert!((b.a[0] - 2.0 * a.a[0]).abs() < 1e-9);
        }
        assert_eq!(g.goal, vec![2.0]);
    }

    #[test]
    fn degenerate_span_falls_back_to_translation() {
        let positions = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]];
        let r = ReferenceTrajectory::from_positions(&positions, 0.1, &[1.0, 0.0]).unwrap();
        let g = r.generalize(&[0.0, 0.2], &[1.0, 0.5], None).unwrap();
        for s in &g.steps {
            assert!((s.p[1] - 0.2).abs() < 1e-15);
        }
        assert_eq!(g.goal, vec![1.0, 0.5]);
    }

    #[test]
    fn via_points_follow_the_map_unless_overridden() {
        let positions = line(11, &[0.0, 0.0], &[1.0, 1.0]);
        let via = vec![ViaPoint { step: 5, position: vec![0.5, 0.5], precision: 1e4 }];
        let r = ReferenceTrajectory::from_positions(&positions, 0.1, &[1.0, 1.0]).unwrap().with_via(via);
        let g = r.generalize(&[1.0, 0.0], &[3.0, -1.0], None).unwrap();
        assert!((g.via[0].position[0] - 2.0).abs() < 1e-12);
        assert!((g.via[0].position[1] + 0.5).abs() < 1e-12);
        let over = [ViaPoint { step: 3, position: vec![9.0, 9.0], precision: 1.0 }];
        let g = r.generalize(&[1.0, 0.0], &[3.0, -1.0], Some(&over)).unwrap();
        assert_eq!(g.via, over.to_vec());
    }

    #[test]
    fn json_shape() {
        let r = ReferenceTrajectory::from_positions(&line(3, &[0.0], &[1.0]), 0.5, &[1.0]).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert!(v.get("dt").is_some() && v.get("goal").is_some());
        assert!(v["steps"][0].get("p").is_some() && v["steps"][0].get("a").is_some());
        assert!(v.get("via").is_none());
        let back: ReferenceTrajectory = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
