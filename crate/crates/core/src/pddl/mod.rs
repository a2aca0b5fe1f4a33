//! PDDL-lite: a conjunctive STRIPS subset with typed objects and negative
//! preconditions under closed-world semantics.

mod domain;
mod fact;
mod lexer;
mod problem;
mod symbol;

use std::fmt;

use thiserror::Error;

pub use domain::{ActionRef, ActionSchema, AtomPattern, Domain, GroundedAction, PredicateDecl, TypedParam, ROOT_TYPE};
pub use fact::{Fact, FactSet, SceneGraph};
pub use lexer::{parse_sexpr, SExpr, Span};
pub use problem::Problem;
pub use symbol::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    UnknownPredicate,
    UnknownType,
    UnknownObject,
    UnknownAction,
    Arity,
    UnboundVariable,
    Structure,
    NotApplicable,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::Syntax => "syntax error",
            ErrorKind::UnknownPredicate => "unknown predicate",
            ErrorKind::UnknownType => "unknown type",
            ErrorKind::UnknownObject => "unknown object",
            ErrorKind::UnknownAction => "unknown action",
            ErrorKind::Arity => "arity mismatch",
            ErrorKind::UnboundVariable => "unbound variable",
            ErrorKind::Structure => "malformed document",
            ErrorKind::NotApplicable => "action not applicable",
        };
        f.write_str(s)
    }
}

/// Error with a 1-based source location; line 0 means "no location".
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{}{kind}: {message}", location(*line, *col))]
pub struct PddlError {
    pub kind: ErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

fn location(line: usize, col: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!("{line}:{col}: ")
    }
}

impl PddlError {
    pub fn new(kind: ErrorKind, span: Span, message: impl Into<String>) -> Self {
        Self { kind, line: span.line, col: span.col, message: message.into() }
    }

    pub fn syntax(span: Span, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Syntax, span, message)
    }

    pub fn unlocated(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, line: 0, col: 0, message: message.into() }
    }

    pub(crate) fn at(mut self, span: Span) -> Self {
        if self.line == 0 {
            self.line = span.line;
            self.col = span.col;
        }
        self
    }

    pub fn has_location(&self) -> bool {
        self.line > 0
    }
}

impl SceneGraph {
    pub fn applicable(&self, action: &GroundedAction) -> bool {
        action.pre_pos.is_subset(self.facts()) && action.pre_neg.is_disjoint(self.facts())
    }

    /// `(facts \ del) ∪ add`. Fails when the action is not applicable.
    pub fn apply(&self, action: &GroundedAction) -> Result<SceneGraph, PddlError> {
        if !self.applicable(action) {
            return Err(PddlError::unlocated(ErrorKind::NotApplicable, format!("{action} is not applicable")));
        }
        Ok(self.apply_unchecked(action))
    }

    pub(crate) fn apply_unchecked(&self, action: &GroundedAction) -> SceneGraph {
        let mut facts: FactSet = self.facts().difference(&action.del).cloned().collect();
        facts.extend(action.add.iter().cloned());
        self.replace_facts(facts)
    }

    /// Facts whose predicate is never added or deleted by any schema.
    pub fn split_static(&self, domain: &Domain) -> (FactSet, FactSet) {
        split_static(self.facts(), domain)
    }

    pub fn fluents(&self, domain: &Domain) -> FactSet {
        self.split_static(domain).1
    }
}

pub fn split_static(facts: &FactSet, domain: &Domain) -> (FactSet, FactSet) {
    let fluent = domain.fluent_predicates();
    facts.iter().cloned().partition(|f| !fluent.contains(&f.predicate))
}

#[cfg(test)]
mod tests;
