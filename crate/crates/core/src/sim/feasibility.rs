use std::collections::BTreeMap;

use crate::pddl::{GroundedAction, SceneGraph, Symbol};
use crate::planner::Feasibility;

use super::geometry::distance;
use super::world::{ObjectKind, RegionKind, WorldState};

/// Geometric checks answered from a frozen world: free placement cells per
/// arm and region, and which blocks a hook can reach.
#[derive(Clone, Debug)]
pub struct WorldFeasibility {
    capacity: BTreeMap<(Symbol, Symbol), usize>,
    pullable: BTreeMap<(Symbol, Symbol), bool>,
    tables: Vec<Symbol>,
    regions: Vec<Symbol>,
}

impl WorldFeasibility {
    pub fn new(world: &WorldState) -> Self {
        let mut capacity = BTreeMap::new();
        let mut pullable = BTreeMap::new();
        let tool = world.objects.iter().filter(|o| o.kind == ObjectKind::Hook).filter_map(|o| o.tool_length).fold(0.0, f64::max);
        for arm in &world.arms {
            for r in &world.regions {
                let n = r.cells().iter().filter(|c| arm.reaches(**c)).count();
                capacity.insert((arm.name.clone(), r.name.clone()), n);
            }
            for o in &world.objects {
                pullable.insert((arm.name.clone(), o.name.clone()), distance(arm.base, o.pose.xy()) <= arm.reach + tool + 1e-9);
            }
        }
        Self {
            capacity,
            pullable,
            tables: world.regions.iter().filter(|r| r.kind == RegionKind::Table).map(|r| r.name.clone()).collect(),
            regions: world.regions.iter().map(|r| r.name.clone()).collect(),
        }
    }

    fn occupancy(&self, state: &SceneGraph, region: &Symbol) -> usize {
        let on_table = self.tables.contains(region);
        let stacked = |o: &Symbol| state.facts().iter().any(|f| f.predicate.as_str() == "on" && &f.args[0] == o);
        let mut objects: Vec<&Symbol> = state
            .facts()
            .iter()
            .filter(|f| {
                (f.predicate.as_str() == "inregion" && &f.args[1] == region) || (on_table && f.predicate.as_str() == "ontable")
            })
            .map(|f| &f.args[0])
            .filter(|o| !stacked(o))
            .collect();
        objects.sort();
        objects.dedup();
        objects.len()
    }
}

impl Feasibility for WorldFeasibility {
    fn feasible(&self, state: &SceneGraph, action: &GroundedAction) -> bool {
        let Some(arm) = action.args.first() else { return true };
        match action.name.as_str() {
            "place" => {
                let region = match action.args.last() {
                    Some(r) if self.regions.contains(r) => r.clone(),
                    _ => match self.tables.first() {
                        Some(t) => t.clone(),
                        None => return false,
                    },
                };
                let cap = self.capacity.get(&(arm.clone(), region.clone())).copied().unwrap_or(0);
                self.occupancy(state, &region) < cap
            }
            "pull" => action
                .args
                .get(2)
                .and_then(|o| self.pullable.get(&(arm.clone(), o.clone())))
                .copied()
                .unwrap_or(false),
            _ => true,
        }
    }
}
