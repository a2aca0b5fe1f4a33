use std::collections::BTreeMap;

use crate::pddl::{Domain, Fact, FactSet, SceneGraph, Symbol};

use super::world::{ObjectKind, RegionKind, WorldState};

fn fact(pred: &str, args: &[&Symbol]) -> Fact {
    Fact::from_symbols(Symbol::new(pred), args.iter().map(|s| (*s).clone()).collect())
}

/// Type names used in object tables.
pub fn type_of(kind: ObjectKind) -> &'static str {
    match kind {
        ObjectKind::Block => "cube",
        ObjectKind::Hook => "hook",
    }
}

/// Every fact the world supports, over every object, arm and region.
pub fn scene_graph(world: &WorldState) -> SceneGraph {
    let mut objects = BTreeMap::new();
    let mut facts = FactSet::new();
    for r in &world.regions {
        objects.insert(r.name.clone(), Symbol::new("region"));
        facts.insert(fact("region", &[&r.name]));
    }
    for arm in &world.arms {
        objects.insert(arm.name.clone(), Symbol::new("arm"));
        facts.insert(fact("arm", &[&arm.name]));
        match &arm.holding {
            Some(h) => facts.insert(fact("inhand", &[&arm.name, h])),
            None => facts.insert(fact("handempty", &[&arm.name])),
        };
        for r in &world.regions {
            if r.cells().iter().any(|c| arm.reaches(*c)) {
                facts.insert(fact("canreach", &[&arm.name, &r.name]));
            }
        }
    }
    for o in &world.objects {
        objects.insert(o.name.clone(), Symbol::new(type_of(o.kind)));
        facts.insert(fact(type_of(o.kind), &[&o.name]));
        for arm in &world.arms {
            if arm.holding.as_ref() == Some(&o.name) || arm.reaches(o.pose.xy()) {
                facts.insert(fact("reachable", &[&arm.name, &o.name]));
            }
        }
        if world.holder(o.name.as_str()).is_some() {
            continue;
        }
        if let Some(r) = world.base_region(o.name.as_str()) {
            facts.insert(fact("inregion", &[&o.name, &r.name]));
        }
        match world.region(o.support.as_str()) {
            Some(r) if r.kind == RegionKind::Table => {
                facts.insert(fact("ontable", &[&o.name]));
            }
            Some(_) => {}
            None => {
                if world.object(o.support.as_str()).is_some() {
                    facts.insert(fact("on", &[&o.name, &o.support]));
                }
            }
        }
        if o.is_block() && world.above(o.name.as_str()).is_none() {
            facts.insert(fact("clear", &[&o.name]));
        }
    }
    SceneGraph::new(objects, facts).expect("facts only mention table entries")
}

/// The scene graph restricted to what `domain` declares: objects of unknown
/// types are dropped, as are facts over undeclared predicates or objects.
pub fn scene_graph_for(world: &WorldState, domain: &Domain) -> SceneGraph {
    let full = scene_graph(world);
    let objects: BTreeMap<Symbol, Symbol> = full
        .objects()
        .iter()
        .filter(|(_, ty)| domain.has_type(ty.as_str()) && ty.as_str() != crate::pddl::ROOT_TYPE)
        .map(|(o, t)| (o.clone(), t.clone()))
        .collect();
    let facts = full
        .facts()
        .iter()
        .filter(|f| domain.check_fact(f, &objects).is_ok())
        .cloned()
        .collect();
    SceneGraph::new(objects, facts).expect("filtered facts mention kept objects")
}
