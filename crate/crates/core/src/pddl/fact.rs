use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::lexer::{parse_sexpr, SExpr};
use super::{PddlError, Symbol};

/// Ground atom such as `(on C D)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub predicate: Symbol,
    pub args: Vec<Symbol>,
}

impl Fact {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        Self { predicate: Symbol::new(predicate), args: args.iter().map(|a| Symbol::new(a)).collect() }
    }

    pub fn from_symbols(predicate: Symbol, args: Vec<Symbol>) -> Self {
        Self { predicate, args }
    }

    pub(crate) fn from_sexpr(expr: &SExpr) -> Result<Self, PddlError> {
        let items = expr
            .list()
            .ok_or_else(|| PddlError::syntax(expr.span(), "expected a parenthesized fact"))?;
        let mut atoms = Vec::with_capacity(items.len());
        for item in items {
            let a = item
                .atom()
                .ok_or_else(|| PddlError::syntax(item.span(), "nested list inside a fact"))?;
            atoms.push(a);
        }
        let (head, rest) = atoms
            .split_first()
            .ok_or_else(|| PddlError::syntax(expr.span(), "empty fact"))?;
        if let Some(bad) = rest.iter().position(|a| a.starts_with('?')) {
            return Err(PddlError::new(
                super::ErrorKind::UnboundVariable,
                items[bad + 1].span(),
                format!("variable {} in a ground fact", rest[bad]),
            ));
        }
        Ok(Fact::new(head, rest))
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Fact {
    type Err = PddlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fact::from_sexpr(&parse_sexpr(s)?)
    }
}

impl Serialize for Fact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

pub type FactSet = BTreeSet<Fact>;

/// All facts holding at one instant, plus the typed objects they mention.
///
/// Serializes to the sorted array of fact strings; the object table is not
/// part of the wire form and is rebuilt with type `object` on load.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SceneGraph {
    facts: FactSet,
    objects: BTreeMap<Symbol, Symbol>,
}

impl SceneGraph {
    pub fn new(objects: BTreeMap<Symbol, Symbol>, facts: FactSet) -> Result<Self, PddlError> {
        for f in &facts {
            for a in &f.args {
                if !objects.contains_key(a) {
                    return Err(PddlError::unlocated(
                        super::ErrorKind::UnknownObject,
                        format!("{f} mentions undeclared object {a}"),
                    ));
                }
            }
        }
        Ok(Self { facts, objects })
    }

    /// Scene whose object table is inferred from the facts, every object typed
    /// `object`.
    pub fn from_facts(facts: FactSet) -> Self {
        let objects = facts
            .iter()
            .flat_map(|f| f.args.iter().cloned())
            .map(|a| (a, Symbol::new("object")))
            .collect();
        Self { facts, objects }
    }

    pub fn facts(&self) -> &FactSet {
        &self.facts
    }

    pub fn objects(&self) -> &BTreeMap<Symbol, Symbol> {
        &self.objects
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn entails(&self, facts: &FactSet) -> bool {
        facts.is_subset(&self.facts)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub(crate) fn replace_facts(&self, facts: FactSet) -> Self {
        Self { facts, objects: self.objects.clone() }
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.facts.iter().map(|f| f.to_string()).collect()
    }
}

impl Serialize for SceneGraph {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.facts.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SceneGraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(SceneGraph::from_facts(FactSet::deserialize(d)?))
    }
}
