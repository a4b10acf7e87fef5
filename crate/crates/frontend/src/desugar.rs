//! Shorthand elimination.
//!
//! Inline path filters are rewritten into filter-free form:
//!
//! * A filtered range rooted at the `Version` set expands into a chain of
//!   fresh ranges plus a `retrieve into` that re-binds the original
//!   iterator name over the filtered rows:
//!
//!   ```text
//!   range of V is Version(id = "v01")
//!   -- becomes --
//!   range of __g1 is Version
//!   retrieve into V (__g1.all)
//!   where __g1.id = "v01"
//!   ```
//!
//! * A filtered range rooted at an iterator keeps its dependence on that
//!   iterator (a derived set would lose the correlation): the path expands
//!   into a chain of fresh ranges ending at the original name, and the
//!   filter comparisons travel as conjuncts into every later statement
//!   (and every aggregate) that touches the filtered iterators.
//!
//! * Filtered set paths used as aggregate arguments expand into fresh
//!   ranges ahead of the statement, with the filters joining that
//!   aggregate's inner `where`.
//!
//! Desugaring is idempotent and preserves query results.

use std::collections::HashMap;

use crate::analysis::{classify_argument, split_set_path, AggArgument, DeclSource, ProgramInfo};
use crate::ast::*;
use crate::FRESH_PREFIX;

pub fn desugar(program: &Program) -> Program {
    let mut d = Desugarer::new();
    let mut statements = Vec::new();
    for stmt in &program.statements {
        statements.extend(d.statement(stmt.clone()));
    }
    Program { statements }
}

/// Statement-at-a-time desugarer; the REPL keeps one per session so filters
/// declared in one submission still guard statements from later ones.
pub struct Desugarer {
    counter: u64,
    info: ProgramInfo,
    /// Filter conjuncts guarding each iterator (own plus inherited).
    taint: HashMap<String, Vec<Expr>>,
}

impl Default for Desugarer {
    fn default() -> Self {
        Self::new()
    }
}

impl Desugarer {
    pub fn new() -> Desugarer {
        Desugarer { counter: 1, info: ProgramInfo::default(), taint: HashMap::new() }
    }

    fn fresh(&mut self, span: Span) -> Ident {
        loop {
            let name = format!("{FRESH_PREFIX}{}", self.counter);
            self.counter += 1;
            if self.info.get(&name).is_none() {
                return Ident::new(name, span);
            }
        }
    }

    fn declare_range(&mut self, name: &str, root: Option<&str>) {
        if let Some(n) = name.strip_prefix(FRESH_PREFIX) {
            if let Ok(k) = n.parse::<u64>() {
                self.counter = self.counter.max(k + 1);
            }
        }
        self.info.declare(name, DeclSource::Range { root: root.map(str::to_string) });
    }

    fn taint_of(&self, name: &str) -> Vec<Expr> {
        self.taint.get(name).cloned().unwrap_or_default()
    }

    pub fn statement(&mut self, stmt: Statement) -> Vec<Statement> {
        match stmt {
            Statement::Range(decl) => self.range_decl(decl),
            Statement::Retrieve(stmt) => self.retrieve(stmt),
        }
    }

    fn range_decl(&mut self, decl: RangeDecl) -> Vec<Statement> {
        if !decl.source.has_filters() {
            let root = decl.source.root.iterator_name().map(str::to_string);
            self.declare_range(&decl.iterator.name, root.as_deref());
            let inherited = root.map(|r| self.taint_of(&r)).unwrap_or_default();
            self.taint.insert(decl.iterator.name.clone(), inherited);
            return vec![Statement::Range(decl)];
        }
        match &decl.source.root {
            PathRoot::VersionSet(_) => self.expand_root_range(decl),
            PathRoot::Iterator(_) => self.expand_iterator_range(decl),
        }
    }

    /// `range of V is Version(f0).s1(f1)...` → fresh chain + retrieve into.
    fn expand_root_range(&mut self, decl: RangeDecl) -> Vec<Statement> {
        let span = decl.span;
        let mut out = Vec::new();
        let mut conjuncts = Vec::new();

        let first = self.fresh(span);
        self.declare_range(&first.name, None);
        out.push(Statement::Range(RangeDecl {
            iterator: first.clone(),
            source: PathExpr {
                root: PathRoot::VersionSet(span),
                root_filter: Vec::new(),
                steps: Vec::new(),
            },
            span,
        }));
        push_conjuncts(&mut conjuncts, &first, &decl.source.root_filter);

        let mut prev = first;
        for step in &decl.source.steps {
            let next = self.fresh(step.span);
            self.declare_range(&next.name, Some(&prev.name));
            out.push(Statement::Range(RangeDecl {
                iterator: next.clone(),
                source: PathExpr {
                    root: PathRoot::Iterator(prev.clone()),
                    root_filter: Vec::new(),
                    steps: vec![bare_step(step)],
                },
                span: step.span,
            }));
            push_conjuncts(&mut conjuncts, &next, &step.filter);
            prev = next;
        }

        let where_clause = conjuncts
            .into_iter()
            .fold(None, |acc, c| Some(Expr::and_opt(acc, c)));
        out.push(Statement::Retrieve(RetrieveStmt {
            into: Some(decl.iterator.clone()),
            unique: false,
            targets: vec![Target {
                expr: Expr::Path(PathExpr {
                    root: PathRoot::Iterator(prev),
                    root_filter: Vec::new(),
                    steps: vec![Step::plain(StepKind::All, span)],
                }),
                alias: None,
            }],
            where_clause,
            sort_by: Vec::new(),
            span,
        }));
        self.info.declare(&decl.iterator.name, DeclSource::Derived);
        self.taint.insert(decl.iterator.name.clone(), Vec::new());
        out
    }

    /// `range of E is X.s1(f1).s2(f2)` → chain of ranges ending at `E`,
    /// filters recorded as pending conjuncts.
    fn expand_iterator_range(&mut self, decl: RangeDecl) -> Vec<Statement> {
        let root_name = decl.source.root.iterator_name().unwrap().to_string();
        let mut conjuncts = self.taint_of(&root_name);
        let mut out = Vec::new();
        let mut prev = match &decl.source.root {
            PathRoot::Iterator(i) => i.clone(),
            PathRoot::VersionSet(_) => unreachable!(),
        };
        let last = decl.source.steps.len() - 1;
        for (i, step) in decl.source.steps.iter().enumerate() {
            let name = if i == last { decl.iterator.clone() } else { self.fresh(step.span) };
            self.declare_range(&name.name, Some(&prev.name));
            out.push(Statement::Range(RangeDecl {
                iterator: name.clone(),
                source: PathExpr {
                    root: PathRoot::Iterator(prev.clone()),
                    root_filter: Vec::new(),
                    steps: vec![bare_step(step)],
                },
                span: step.span,
            }));
            push_conjuncts(&mut conjuncts, &name, &step.filter);
            self.taint.insert(name.name.clone(), conjuncts.clone());
            prev = name;
        }
        out
    }

    fn retrieve(&mut self, mut stmt: RetrieveStmt) -> Vec<Statement> {
        let mut out = Vec::new();
        // filtered set paths in aggregate arguments become fresh ranges
        for i in 0..stmt.targets.len() {
            self.rewrite_agg_arguments(&mut stmt.targets[i].expr, &mut out);
        }
        if let Some(w) = &mut stmt.where_clause {
            self.rewrite_agg_arguments_in_place(w, &mut out);
        }
        for k in &mut stmt.sort_by {
            self.rewrite_agg_arguments(&mut k.expr, &mut out);
        }

        // pending filter conjuncts join the statement and its aggregates
        let free = self.info.free_set(&stmt);
        let mut outer: Vec<Expr> = Vec::new();
        for name in self.info.in_decl_order(&free) {
            for c in self.taint_of(name) {
                if !outer.contains(&c) {
                    outer.push(c);
                }
            }
        }
        for c in outer {
            stmt.where_clause = Some(Expr::and_opt(stmt.where_clause.take(), c));
        }
        let info = &self.info;
        let taint = &self.taint;
        for target in &mut stmt.targets {
            inject_agg_conjuncts(&mut target.expr, info, taint);
        }
        if let Some(w) = &mut stmt.where_clause {
            inject_agg_conjuncts(w, info, taint);
        }
        for k in &mut stmt.sort_by {
            inject_agg_conjuncts(&mut k.expr, info, taint);
        }

        if let Some(into) = &stmt.into {
            self.info.declare(&into.name, DeclSource::Derived);
            self.taint.insert(into.name.clone(), Vec::new());
        }
        out.push(Statement::Retrieve(stmt));
        out
    }

    fn rewrite_agg_arguments(&mut self, expr: &mut Expr, out: &mut Vec<Statement>) {
        self.rewrite_agg_arguments_in_place(expr, out);
    }

    fn rewrite_agg_arguments_in_place(&mut self, expr: &mut Expr, out: &mut Vec<Statement>) {
        match expr {
            Expr::Aggregate(agg) => {
                let needs = matches!(classify_argument(&agg.argument), AggArgument::SetPath(p) if p.has_filters());
                if needs {
                    let path = match &agg.argument {
                        Expr::Path(p) => p.clone(),
                        _ => unreachable!(),
                    };
                    agg.argument = self.expand_argument_path(&path, out);
                }
            }
            Expr::Cmp { lhs, rhs, .. } | Expr::Arith { lhs, rhs, .. } => {
                self.rewrite_agg_arguments_in_place(lhs, out);
                self.rewrite_agg_arguments_in_place(rhs, out);
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                self.rewrite_agg_arguments_in_place(l, out);
                self.rewrite_agg_arguments_in_place(r, out);
            }
            Expr::Not(e, _) | Expr::Neg(e, _) | Expr::Abs(e, _) => {
                self.rewrite_agg_arguments_in_place(e, out)
            }
            Expr::Literal(..) | Expr::Path(_) | Expr::UpRef(_) => {}
        }
    }

    /// Expand the set prefix of a filtered aggregate-argument path into
    /// fresh ranges; the rewritten argument addresses the last fresh
    /// iterator with the scalar suffix. Filters become taint on the fresh
    /// iterators, picked up by the aggregate's dependency walk.
    fn expand_argument_path(&mut self, path: &PathExpr, out: &mut Vec<Statement>) -> Expr {
        let (set_prefix, scalar_suffix) = split_set_path(path);
        let span = path.span();
        let mut conjuncts;
        let mut prev = match &path.root {
            PathRoot::VersionSet(_) => {
                let first = self.fresh(span);
                self.declare_range(&first.name, None);
                out.push(Statement::Range(RangeDecl {
                    iterator: first.clone(),
                    source: PathExpr {
                        root: PathRoot::VersionSet(span),
                        root_filter: Vec::new(),
                        steps: Vec::new(),
                    },
                    span,
                }));
                conjuncts = Vec::new();
                push_conjuncts(&mut conjuncts, &first, &path.root_filter);
                self.taint.insert(first.name.clone(), conjuncts.clone());
                first
            }
            PathRoot::Iterator(i) => {
                conjuncts = self.taint_of(&i.name);
                i.clone()
            }
        };
        for step in set_prefix {
            let next = self.fresh(step.span);
            self.declare_range(&next.name, Some(&prev.name));
            out.push(Statement::Range(RangeDecl {
                iterator: next.clone(),
                source: PathExpr {
                    root: PathRoot::Iterator(prev.clone()),
                    root_filter: Vec::new(),
                    steps: vec![bare_step(step)],
                },
                span: step.span,
            }));
            push_conjuncts(&mut conjuncts, &next, &step.filter);
            self.taint.insert(next.name.clone(), conjuncts.clone());
            prev = next;
        }
        Expr::Path(PathExpr {
            root: PathRoot::Iterator(prev),
            root_filter: Vec::new(),
            steps: scalar_suffix.to_vec(),
        })
    }
}

fn inject_agg_conjuncts(expr: &mut Expr, info: &ProgramInfo, taint: &HashMap<String, Vec<Expr>>) {
    match expr {
        Expr::Aggregate(agg) => {
            let deps = info.agg_deps(agg);
            let mut pending: Vec<Expr> = Vec::new();
            for name in info.in_decl_order(&deps) {
                if let Some(cs) = taint.get(name) {
                    for c in cs {
                        if !pending.contains(c) {
                            pending.push(c.clone());
                        }
                    }
                }
            }
            for c in pending {
                agg.inner_where = Some(Expr::and_opt(agg.inner_where.take(), c));
            }
        }
        Expr::Cmp { lhs, rhs, .. } | Expr::Arith { lhs, rhs, .. } => {
            inject_agg_conjuncts(lhs, info, taint);
            inject_agg_conjuncts(rhs, info, taint);
        }
        Expr::And(l, r) | Expr::Or(l, r) => {
            inject_agg_conjuncts(l, info, taint);
            inject_agg_conjuncts(r, info, taint);
        }
        Expr::Not(e, _) | Expr::Neg(e, _) | Expr::Abs(e, _) => inject_agg_conjuncts(e, info, taint),
        Expr::Literal(..) | Expr::Path(_) | Expr::UpRef(_) => {}
    }
}

/// Copy of a step with its filter stripped (hops kept).
fn bare_step(step: &Step) -> Step {
    Step {
        kind: step.kind.clone(),
        hops: step.hops,
        explicit_parens: step.explicit_parens,
        filter: Vec::new(),
        span: step.span,
    }
}

fn push_conjuncts(out: &mut Vec<Expr>, iterator: &Ident, filter: &[FilterCmp]) {
    for f in filter {
        out.push(Expr::Cmp {
            op: f.op,
            lhs: Box::new(Expr::Path(PathExpr {
                root: PathRoot::Iterator(iterator.clone()),
                root_filter: Vec::new(),
                steps: vec![Step::plain(StepKind::Field(f.attr.name.clone()), f.span)],
            })),
            rhs: Box::new(Expr::Literal(f.value.clone(), f.span)),
            span: f.span,
        });
    }
}
