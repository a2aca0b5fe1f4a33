use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use super::fact::{Fact, FactSet};
use super::lexer::{parse_sexpr, SExpr, Span};
use super::{ErrorKind, PddlError, Symbol};

pub const ROOT_TYPE: &str = "object";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedParam {
    pub name: Symbol,
    pub ty: Symbol,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: Symbol,
    pub params: Vec<TypedParam>,
}

/// Predicate applied to schema variables (stored without the leading `?`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomPattern {
    pub predicate: Symbol,
    pub args: Vec<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: Symbol,
    pub params: Vec<TypedParam>,
    pub pre_pos: Vec<AtomPattern>,
    pub pre_neg: Vec<AtomPattern>,
    pub add: Vec<AtomPattern>,
    pub del: Vec<AtomPattern>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub name: Symbol,
    pub requirements: Vec<String>,
    /// `(type, parent)` in declaration order.
    pub types: Vec<(Symbol, Symbol)>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

/// Fully bound action with its resolved fact sets. Ordered by name, then
/// arguments.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroundedAction {
    pub name: Symbol,
    pub args: Vec<Symbol>,
    pub pre_pos: FactSet,
    pub pre_neg: FactSet,
    pub add: FactSet,
    pub del: FactSet,
}

impl GroundedAction {
    pub fn reference(&self) -> ActionRef {
        ActionRef { name: self.name.clone(), args: self.args.clone() }
    }
}

impl PartialOrd for GroundedAction {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroundedAction {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.name, &self.args).cmp(&(&other.name, &other.args))
    }
}

impl fmt::Display for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Serializable name + arguments of a grounded action.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionRef {
    pub name: Symbol,
    pub args: Vec<Symbol>,
}

impl ActionRef {
    pub fn new(name: &str, args: &[&str]) -> Self {
        Self { name: Symbol::new(name), args: args.iter().map(|a| Symbol::new(a)).collect() }
    }
}

impl fmt::Display for ActionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

fn keyword_sections(items: &[SExpr]) -> Vec<(&str, Span, &[SExpr])> {
    // splits `:kw a b :kw2 c` into keyword groups
    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        if let Some(k) = items[i].atom().filter(|a| a.starts_with(':')) {
            let start = i + 1;
            let mut end = start;
            while end < items.len() && !items[end].atom().is_some_and(|a| a.starts_with(':')) {
                end += 1;
            }
            out.push((k, items[i].span(), &items[start..end]));
            i = end;
        } else {
            out.push(("", items[i].span(), &items[i..i + 1]));
            i += 1;
        }
    }
    out
}

pub(crate) fn expect_list<'a>(expr: &'a SExpr, what: &str) -> Result<&'a [SExpr], PddlError> {
    expr.list().ok_or_else(|| PddlError::syntax(expr.span(), format!("expected a list for {what}")))
}

pub(crate) fn expect_atom<'a>(expr: &'a SExpr, what: &str) -> Result<&'a str, PddlError> {
    expr.atom().ok_or_else(|| PddlError::syntax(expr.span(), format!("expected a name for {what}")))
}

/// `(define (<kind> name) sections...)` → (name, sections).
pub(crate) fn define_header<'a>(root: &'a SExpr, kind: &str) -> Result<(Symbol, &'a [SExpr]), PddlError> {
    let items = expect_list(root, "define")?;
    if items.first().and_then(|e| e.atom()) != Some("define") {
        return Err(PddlError::syntax(root.span(), "document must start with (define ...)"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| PddlError::syntax(root.span(), format!("missing ({kind} name)")))?;
    let h = expect_list(header, kind)?;
    if h.len() != 2 || h[0].atom() != Some(kind) {
        return Err(PddlError::syntax(header.span(), format!("expected ({kind} name)")));
    }
    let name = expect_atom(&h[1], kind)?;
    Ok((Symbol::new(name), &items[2..]))
}

/// `a b - t c` → [(a,t),(b,t),(c,object)]; every name must satisfy `check`.
pub(crate) fn typed_list(items: &[SExpr], variables: bool) -> Result<Vec<(Symbol, Symbol, Span)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Span)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let a = expect_atom(&items[i], "typed list entry")?;
        if a == "-" {
            let ty = items
                .get(i + 1)
                .ok_or_else(|| PddlError::syntax(items[i].span(), "'-' without a type"))?;
            let ty = expect_atom(ty, "type")?;
            if pending.is_empty() {
                return Err(PddlError::syntax(items[i].span(), "'-' without names before it"));
            }
            for (n, s) in pending.drain(..) {
                out.push((Symbol::from(n), Symbol::new(ty), s));
            }
            i += 2;
            continue;
        }
        let is_var = a.starts_with('?');
        if is_var != variables || a.len() == usize::from(is_var) {
            let expected = if variables { "a ?variable" } else { "a name" };
            return Err(PddlError::syntax(items[i].span(), format!("expected {expected}, found {a}")));
        }
        let name = if variables { &a[1..] } else { a };
        pending.push((name.to_string(), items[i].span()));
        i += 1;
    }
    for (n, s) in pending {
        out.push((Symbol::from(n), Symbol::new(ROOT_TYPE), s));
    }
    Ok(out)
}

impl Domain {
    pub fn parse(text: &str) -> Result<Self, PddlError> {
        let root = parse_sexpr(text)?;
        let (name, sections) = define_header(&root, "domain")?;
        let mut domain =
            Domain { name, requirements: Vec::new(), types: Vec::new(), predicates: Vec::new(), actions: Vec::new() };
        let mut actions = Vec::new();
        for section in sections {
            let items = expect_list(section, "domain section")?;
            let head = items
                .first()
                .and_then(|e| e.atom())
                .ok_or_else(|| PddlError::syntax(section.span(), "empty section"))?;
            match head {
                ":requirements" => {
                    for r in &items[1..] {
                        domain.requirements.push(expect_atom(r, "requirement")?.to_string());
                    }
                }
                ":types" => {
                    for (t, parent, _) in typed_list(&items[1..], false)? {
                        domain.types.push((t, parent));
                    }
                }
                ":predicates" => {
                    for p in &items[1..] {
                        let decl = expect_list(p, "predicate declaration")?;
                        let pname = decl
                            .first()
                            .ok_or_else(|| PddlError::syntax(p.span(), "empty predicate declaration"))?;
                        let pname = expect_atom(pname, "predicate")?;
                        let params = typed_list(&decl[1..], true)?
                            .into_iter()
                            .map(|(name, ty, _)| TypedParam { name, ty })
                            .collect();
                        if domain.predicate(pname).is_some() {
                            return Err(PddlError::new(ErrorKind::Structure, p.span(), format!("predicate {pname} declared twice")));
                        }
                        domain.predicates.push(PredicateDecl { name: Symbol::new(pname), params });
                    }
                }
                ":action" => actions.push(section),
                other => {
                    return Err(PddlError::syntax(items[0].span(), format!("unsupported domain section {other}")));
                }
            }
        }
        for t in domain.types.iter().map(|(_, p)| p).chain(domain.predicates.iter().flat_map(|p| p.params.iter().map(|q| &q.ty))) {
            if !domain.has_type(t.as_str()) {
                return Err(PddlError::unlocated(ErrorKind::UnknownType, format!("undeclared type {t}")));
            }
        }
        for a in actions {
            let schema = domain.parse_action(a)?;
            if domain.action(schema.name.as_str()).is_some() {
                return Err(PddlError::new(ErrorKind::Structure, a.span(), format!("action {} declared twice", schema.name)));
            }
            domain.actions.push(schema);
        }
        Ok(domain)
    }

    fn parse_action(&self, section: &SExpr) -> Result<ActionSchema, PddlError> {
        let items = expect_list(section, "action")?;
        let name = items
            .get(1)
            .ok_or_else(|| PddlError::syntax(section.span(), "action without a name"))?;
        let name = Symbol::new(expect_atom(name, "action name")?);
        let mut schema =
            ActionSchema { name, params: Vec::new(), pre_pos: Vec::new(), pre_neg: Vec::new(), add: Vec::new(), del: Vec::new() };
        let mut spans = BTreeMap::new();
        for (kw, span, body) in keyword_sections(&items[2..]) {
            match kw {
                ":parameters" => {
                    let [list] = body else {
                        return Err(PddlError::syntax(span, ":parameters takes one list"));
                    };
                    for (n, ty, s) in typed_list(expect_list(list, "parameters")?, true)? {
                        if !self.has_type(ty.as_str()) {
                            return Err(PddlError::new(ErrorKind::UnknownType, s, format!("undeclared type {ty}")));
                        }
                        if schema.params.iter().any(|p| p.name == n) {
                            return Err(PddlError::new(ErrorKind::Structure, s, format!("parameter ?{n} repeated")));
                        }
                        spans.insert(n.clone(), s);
                        schema.params.push(TypedParam { name: n, ty });
                    }
                }
                ":precondition" => {
                    let [body] = body else {
                        return Err(PddlError::syntax(span, ":precondition takes one formula"));
                    };
                    self.literals(body, &schema.params, &mut schema.pre_pos, &mut schema.pre_neg)?;
                }
                ":effect" => {
                    let [body] = body else {
                        return Err(PddlError::syntax(span, ":effect takes one formula"));
                    };
                    self.literals(body, &schema.params, &mut schema.add, &mut schema.del)?;
                }
                "" => return Err(PddlError::syntax(span, "expected :parameters, :precondition or :effect")),
                other => return Err(PddlError::syntax(span, format!("unsupported action field {other}"))),
            }
        }
        Ok(schema)
    }

    fn literals(
        &self,
        expr: &SExpr,
        params: &[TypedParam],
        pos: &mut Vec<AtomPattern>,
        neg: &mut Vec<AtomPattern>,
    ) -> Result<(), PddlError> {
        let items = expect_list(expr, "formula")?;
        match items.first().and_then(|e| e.atom()) {
            Some("and") => {
                for item in &items[1..] {
                    let inner = expect_list(item, "literal")?;
                    if inner.first().and_then(|e| e.atom()) == Some("and") {
                        return Err(PddlError::syntax(item.span(), "nested (and ...) is not supported"));
                    }
                    self.literals(item, params, pos, neg)?;
                }
                Ok(())
            }
            Some("not") => {
                let [_, atom] = items else {
                    return Err(PddlError::syntax(expr.span(), "(not ...) takes exactly one atom"));
                };
                neg.push(self.pattern(atom, params)?);
                Ok(())
            }
            Some("or" | "forall" | "exists" | "when" | "imply") => {
                Err(PddlError::syntax(expr.span(), "only conjunctions of literals are supported"))
            }
            _ => {
                pos.push(self.pattern(expr, params)?);
                Ok(())
            }
        }
    }

    fn pattern(&self, expr: &SExpr, params: &[TypedParam]) -> Result<AtomPattern, PddlError> {
        let items = expect_list(expr, "atom")?;
        let head = items.first().ok_or_else(|| PddlError::syntax(expr.span(), "empty atom"))?;
        let pname = expect_atom(head, "predicate")?;
        let decl = self.predicate(pname).ok_or_else(|| {
            PddlError::new(ErrorKind::UnknownPredicate, head.span(), format!("unknown predicate {pname}"))
        })?;
        if decl.params.len() != items.len() - 1 {
            return Err(PddlError::new(
                ErrorKind::Arity,
                expr.span(),
                format!("{pname} takes {} arguments, found {}", decl.params.len(), items.len() - 1),
            ));
        }
        let mut args = Vec::new();
        for item in &items[1..] {
            let a = expect_atom(item, "argument")?;
            let Some(var) = a.strip_prefix('?') else {
                return Err(PddlError::new(ErrorKind::UnboundVariable, item.span(), format!("constant {a} in a schema; use a parameter")));
            };
            if !params.iter().any(|p| p.name.as_str() == var) {
                return Err(PddlError::new(ErrorKind::UnboundVariable, item.span(), format!("unbound variable ?{var}")));
            }
            args.push(Symbol::new(var));
        }
        Ok(AtomPattern { predicate: decl.name.clone(), args })
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name.as_str() == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name.as_str() == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.types.iter().any(|(t, _)| t.as_str() == ty)
    }

    fn parent(&self, ty: &str) -> Option<&Symbol> {
        self.types.iter().find(|(t, _)| t.as_str() == ty).map(|(_, p)| p)
    }

    /// True if `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut current = ty;
        for _ in 0..=self.types.len() {
            if current == ancestor || ancestor == ROOT_TYPE {
                return true;
            }
            match self.parent(current) {
                Some(p) if p.as_str() != current => current = p.as_str(),
                _ => return false,
            }
        }
        false
    }

    /// Predicates that some schema adds or deletes.
    pub fn fluent_predicates(&self) -> BTreeSet<Symbol> {
        self.actions
            .iter()
            .flat_map(|a| a.add.iter().chain(&a.del))
            .map(|p| p.predicate.clone())
            .collect()
    }

    /// Checks a ground fact against the predicate declarations and the object
    /// table.
    pub fn check_fact(&self, fact: &Fact, objects: &BTreeMap<Symbol, Symbol>) -> Result<(), PddlError> {
        let decl = self
            .predicate(fact.predicate.as_str())
            .ok_or_else(|| PddlError::unlocated(ErrorKind::UnknownPredicate, format!("unknown predicate in {fact}")))?;
        if decl.params.len() != fact.args.len() {
            return Err(PddlError::unlocated(ErrorKind::Arity, format!("{fact}: expected {} arguments", decl.params.len())));
        }
        for (a, p) in fact.args.iter().zip(&decl.params) {
            let ty = objects
                .get(a)
                .ok_or_else(|| PddlError::unlocated(ErrorKind::UnknownObject, format!("{fact}: undeclared object {a}")))?;
            if !self.is_subtype(ty.as_str(), p.ty.as_str()) {
                return Err(PddlError::unlocated(ErrorKind::Structure, format!("{fact}: {a} is a {ty}, expected {}", p.ty)));
            }
        }
        Ok(())
    }

    pub fn ground(&self, action: &ActionRef) -> Result<GroundedAction, PddlError> {
        let schema = self
            .action(action.name.as_str())
            .ok_or_else(|| PddlError::unlocated(ErrorKind::UnknownAction, format!("unknown action {}", action.name)))?;
        schema.ground(&action.args)
    }

    /// Every type-consistent grounding of every schema over `objects`, sorted.
    pub fn groundings(&self, objects: &BTreeMap<Symbol, Symbol>) -> Vec<GroundedAction> {
        let mut out = Vec::new();
        for schema in &self.actions {
            let candidates: Vec<Vec<Symbol>> = schema
                .params
                .iter()
                .map(|p| {
                    objects
                        .iter()
                        .filter(|(_, ty)| self.is_subtype(ty.as_str(), p.ty.as_str()))
                        .map(|(o, _)| o.clone())
                        .collect()
                })
                .collect();
            let mut tuple = Vec::with_capacity(candidates.len());
            product(&candidates, &mut tuple, &mut |args| {
                out.push(schema.ground(args).expect("arity matches by construction"));
            });
        }
        out.sort();
        out
    }

    pub fn to_pddl(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "(define (domain {})", self.name);
        if !self.requirements.is_empty() {
            let _ = writeln!(s, "  (:requirements {})", self.requirements.join(" "));
        }
        if !self.types.is_empty() {
            let types: Vec<String> = self.types.iter().map(|(t, p)| format!("{t} - {p}")).collect();
            let _ = writeln!(s, "  (:types {})", types.join(" "));
        }
        s.push_str("  (:predicates");
        for p in &self.predicates {
            let _ = write!(s, "\n    ({}{})", p.name, params_text(&p.params));
        }
        s.push_str(")\n");
        for a in &self.actions {
            let _ = writeln!(s, "  (:action {}", a.name);
            let _ = writeln!(s, "    :parameters ({})", params_text(&a.params).trim_start());
            let _ = writeln!(s, "    :precondition {}", literals_text(&a.pre_pos, &a.pre_neg));
            let _ = writeln!(s, "    :effect {})", literals_text(&a.add, &a.del));
        }
        s.push_str(")\n");
        s
    }
}

fn product(candidates: &[Vec<Symbol>], tuple: &mut Vec<Symbol>, emit: &mut impl FnMut(&[Symbol])) {
    if tuple.len() == candidates.len() {
        emit(tuple);
        return;
    }
    for c in &candidates[tuple.len()] {
        tuple.push(c.clone());
        product(candidates, tuple, emit);
        tuple.pop();
    }
}

fn params_text(params: &[TypedParam]) -> String {
    params.iter().map(|p| format!(" ?{} - {}", p.name, p.ty)).collect()
}

fn pattern_text(p: &AtomPattern) -> String {
    let args: String = p.args.iter().map(|a| format!(" ?{a}")).collect();
    format!("({}{args})", p.predicate)
}

fn literals_text(pos: &[AtomPattern], neg: &[AtomPattern]) -> String {
    let mut parts: Vec<String> = pos.iter().map(pattern_text).collect();
    parts.extend(neg.iter().map(|p| format!("(not {})", pattern_text(p))));
    format!("(and {})", parts.join(" ")).replace("(and )", "(and)")
}

impl ActionSchema {
    pub fn ground(&self, args: &[Symbol]) -> Result<GroundedAction, PddlError> {
        if args.len() != self.params.len() {
            return Err(PddlError::unlocated(
                ErrorKind::Arity,
                format!("{} takes {} arguments, got {}", self.name, self.params.len(), args.len()),
            ));
        }
        let binding: BTreeMap<&Symbol, &Symbol> = self.params.iter().map(|p| &p.name).zip(args).collect();
        let bind = |patterns: &[AtomPattern]| -> FactSet {
            patterns
                .iter()
                .map(|p| Fact::from_symbols(p.predicate.clone(), p.args.iter().map(|v| binding[v].clone()).collect()))
                .collect()
        };
        Ok(GroundedAction {
            name: self.name.clone(),
            args: args.to_vec(),
            pre_pos: bind(&self.pre_pos),
            pre_neg: bind(&self.pre_neg),
            add: bind(&self.add),
            del: bind(&self.del),
        })
    }
}
