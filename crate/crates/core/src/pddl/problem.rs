use std::collections::BTreeMap;
use std::fmt::Write;

use super::domain::{define_header, expect_atom, expect_list, typed_list, Domain, TypedParam};
use super::fact::{Fact, FactSet, SceneGraph};
use super::{ErrorKind, PddlError, Symbol};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub name: Symbol,
    pub domain: Symbol,
    pub objects: Vec<TypedParam>,
    pub init: Vec<Fact>,
    pub goal: Vec<Fact>,
}

impl Problem {
    pub fn parse(text: &str, domain: &Domain) -> Result<Self, PddlError> {
        let root = super::lexer::parse_sexpr(text)?;
        let (name, sections) = define_header(&root, "problem")?;
        let mut problem = Problem { name, domain: domain.name.clone(), objects: Vec::new(), init: Vec::new(), goal: Vec::new() };
        let mut table = BTreeMap::new();
        let mut pending_facts = Vec::new();
        let mut saw_domain = false;
        for section in sections {
            let items = expect_list(section, "problem section")?;
            let head = items
                .first()
                .and_then(|e| e.atom())
                .ok_or_else(|| PddlError::syntax(section.span(), "empty section"))?;
            match head {
                ":domain" => {
                    let [_, d] = items else {
                        return Err(PddlError::syntax(section.span(), "(:domain name) takes one name"));
                    };
                    let d = expect_atom(d, "domain name")?;
                    if d != domain.name.as_str() {
                        return Err(PddlError::new(
                            ErrorKind::Structure,
                            items[1].span(),
                            format!("problem is for domain {d}, not {}", domain.name),
                        ));
                    }
                    saw_domain = true;
                }
                ":objects" => {
                    for (o, ty, span) in typed_list(&items[1..], false)? {
                        if !domain.has_type(ty.as_str()) {
                            return Err(PddlError::new(ErrorKind::UnknownType, span, format!("undeclared type {ty}")));
                        }
                        if table.insert(o.clone(), ty.clone()).is_some() {
                            return Err(PddlError::new(ErrorKind::Structure, span, format!("object {o} declared twice")));
                        }
                        problem.objects.push(TypedParam { name: o, ty });
                    }
                }
                ":init" => {
                    for f in &items[1..] {
                        pending_facts.push((false, f));
                    }
                }
                ":goal" => {
                    let [_, g] = items else {
                        return Err(PddlError::syntax(section.span(), ":goal takes one formula"));
                    };
                    let g_items = expect_list(g, "goal")?;
                    if g_items.first().and_then(|e| e.atom()) == Some("and") {
                        for f in &g_items[1..] {
                            pending_facts.push((true, f));
                        }
                    } else {
                        pending_facts.push((true, g));
                    }
                }
                other => {
                    return Err(PddlError::syntax(items[0].span(), format!("unsupported problem section {other}")));
                }
            }
        }
        if !saw_domain {
            return Err(PddlError::syntax(root.span(), "missing (:domain name)"));
        }
        for (is_goal, expr) in pending_facts {
            let fact = Fact::from_sexpr(expr)?;
            domain.check_fact(&fact, &table).map_err(|e| e.at(expr.span()))?;
            if is_goal {
                problem.goal.push(fact);
            } else {
                problem.init.push(fact);
            }
        }
        Ok(problem)
    }

    pub fn object_table(&self) -> BTreeMap<Symbol, Symbol> {
        self.objects.iter().map(|p| (p.name.clone(), p.ty.clone())).collect()
    }

    pub fn initial_scene(&self) -> SceneGraph {
        SceneGraph::new(self.object_table(), self.init.iter().cloned().collect()).expect("facts validated at parse time")
    }

    pub fn goal_set(&self) -> FactSet {
        self.goal.iter().cloned().collect()
    }

    pub fn to_pddl(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "(define (problem {})", self.name);
        let _ = writeln!(s, "  (:domain {})", self.domain);
        let objects: Vec<String> = self.objects.iter().map(|p| format!("{} - {}", p.name, p.ty)).collect();
        let _ = writeln!(s, "  (:objects {})", objects.join(" "));
        s.push_str("  (:init");
        for f in &self.init {
            let _ = write!(s, "\n    {f}");
        }
        s.push_str(")\n  (:goal (and");
        for f in &self.goal {
            let _ = write!(s, " {f}");
        }
        s.push_str(")))\n");
        s
    }
}
