//! Program-structure analysis shared by the validator, desugarer, and
//! evaluation: iterator dependency chains, aggregate argument
//! classification, and the free-iterator rule.
//!
//! Iterators referenced only inside aggregate expressions do not multiply a
//! retrieve's output; the enumerated bindings of a statement cover the
//! iterators referenced outside aggregates plus every aggregate's grouping
//! key, closed over range roots.

use std::collections::{BTreeSet, HashMap};

use crate::ast::*;
use crate::FRESH_PREFIX;

#[derive(Debug, Clone, PartialEq)]
pub enum DeclSource {
    /// `range of X is <path>`; root names the parent iterator when the
    /// path is rooted at one.
    Range { root: Option<String> },
    /// `retrieve into X (...)`.
    Derived,
}

#[derive(Debug, Clone)]
pub struct DeclInfo {
    pub name: String,
    pub index: usize,
    pub source: DeclSource,
    /// Desugarer-generated iterators (reserved name prefix); they are
    /// skipped when computing implicit aggregate grouping chains.
    pub synthetic: bool,
}

/// Iterator declarations of a program, in order.
#[derive(Debug, Default, Clone)]
pub struct ProgramInfo {
    decls: Vec<DeclInfo>,
    by_name: HashMap<String, usize>,
}

impl ProgramInfo {
    pub fn build(statements: &[Statement]) -> ProgramInfo {
        let mut info = ProgramInfo::default();
        for stmt in statements {
            match stmt {
                Statement::Range(r) => {
                    let root = r.source.root.iterator_name().map(str::to_string);
                    info.declare(&r.iterator.name, DeclSource::Range { root });
                }
                Statement::Retrieve(r) => {
                    if let Some(into) = &r.into {
                        info.declare(&into.name, DeclSource::Derived);
                    }
                }
            }
        }
        info
    }

    pub fn declare(&mut self, name: &str, source: DeclSource) {
        if self.by_name.contains_key(name) {
            return; // duplicate declarations are a validation error
        }
        let index = self.decls.len();
        self.decls.push(DeclInfo {
            name: name.to_string(),
            index,
            source,
            synthetic: name.starts_with(FRESH_PREFIX),
        });
        self.by_name.insert(name.to_string(), index);
    }

    pub fn get(&self, name: &str) -> Option<&DeclInfo> {
        self.by_name.get(name).map(|&i| &self.decls[i])
    }

    pub fn decls(&self) -> &[DeclInfo] {
        &self.decls
    }

    pub fn root_of(&self, name: &str) -> Option<&str> {
        match &self.get(name)?.source {
            DeclSource::Range { root } => root.as_deref(),
            DeclSource::Derived => None,
        }
    }

    /// Parent iterators of `name`, nearest first, following range roots up
    /// to a root set or derived set.
    pub fn ancestor_chain(&self, name: &str) -> Vec<String> {
        let mut chain = Vec::new();
        let mut current = name.to_string();
        while let Some(root) = self.root_of(&current) {
            if chain.iter().any(|c| c == root) || root == name {
                break; // cyclic roots are a validation error
            }
            chain.push(root.to_string());
            current = root.to_string();
        }
        chain
    }

    /// Grouping key of a plain (non-`_all`) aggregate: the ancestor chain
    /// of the enumerated set, synthetic iterators skipped.
    pub fn implicit_group(&self, argument: &Expr) -> Vec<String> {
        let chain = match classify_argument(argument) {
            AggArgument::SetPath(path) => match path.root.iterator_name() {
                Some(root) => {
                    let mut c = vec![root.to_string()];
                    c.extend(self.ancestor_chain(root));
                    c
                }
                None => Vec::new(), // rooted at the Version set: global
            },
            AggArgument::Scalar { iterator } => self.ancestor_chain(&iterator),
            AggArgument::Constant | AggArgument::Mixed | AggArgument::SetInCompound => Vec::new(),
        };
        chain.into_iter().filter(|n| !n.starts_with(FRESH_PREFIX)).collect()
    }

    /// Grouping key actually used for an aggregate: explicit list for
    /// `_all` forms, the implicit chain otherwise.
    pub fn group_key(&self, agg: &AggregateExpr) -> Vec<String> {
        if agg.all {
            agg.group_by.iter().map(|g| g.name.clone()).collect()
        } else {
            self.implicit_group(&agg.argument)
        }
    }

    /// Iterators an aggregate enumerates: argument chain, grouping keys,
    /// inner-where references, closed over range roots.
    pub fn agg_deps(&self, agg: &AggregateExpr) -> BTreeSet<String> {
        let mut deps: BTreeSet<String> = BTreeSet::new();
        let mut names = Vec::new();
        all_iterators(&agg.argument, &mut names);
        if let Some(w) = &agg.inner_where {
            all_iterators(w, &mut names);
        }
        for g in &agg.group_by {
            names.push(&g.name);
        }
        for n in names {
            deps.insert(n.to_string());
        }
        for key in self.group_key(agg) {
            deps.insert(key);
        }
        self.close_over_roots(deps)
    }

    /// Iterators whose bindings a retrieve enumerates.
    pub fn free_set(&self, stmt: &RetrieveStmt) -> BTreeSet<String> {
        let mut free: BTreeSet<String> = BTreeSet::new();
        let mut names = Vec::new();
        for expr in statement_exprs(stmt) {
            free_iterators(expr, &mut names);
        }
        for n in names {
            free.insert(n.to_string());
        }
        let mut aggs = Vec::new();
        for expr in statement_exprs(stmt) {
            collect_aggregates(expr, &mut aggs);
        }
        for agg in aggs {
            for key in self.group_key(agg) {
                free.insert(key);
            }
        }
        self.close_over_roots(free)
    }

    pub fn close_over_roots(&self, mut set: BTreeSet<String>) -> BTreeSet<String> {
        let mut frontier: Vec<String> = set.iter().cloned().collect();
        while let Some(name) = frontier.pop() {
            if let Some(root) = self.root_of(&name) {
                if set.insert(root.to_string()) {
                    frontier.push(root.to_string());
                }
            }
        }
        set
    }

    /// Enumeration order for a set of iterator names: declaration order.
    pub fn in_decl_order<'a>(&self, names: &'a BTreeSet<String>) -> Vec<&'a str> {
        let mut v: Vec<&str> = names.iter().map(String::as_str).collect();
        v.sort_by_key(|n| self.get(n).map(|d| d.index).unwrap_or(usize::MAX));
        v
    }
}

/// Shape of an aggregate argument.
#[derive(Debug, Clone, PartialEq)]
pub enum AggArgument<'a> {
    /// A single bare path denoting a set: rooted at the Version set, or at
    /// an iterator with at least one set-valued step. The aggregate
    /// enumerates that set.
    SetPath(&'a PathExpr),
    /// Scalar expression over exactly one iterator; the aggregate
    /// enumerates that iterator's bindings.
    Scalar { iterator: String },
    /// References no iterator at all.
    Constant,
    /// References more than one root iterator.
    Mixed,
    /// A compound expression containing a set-valued path.
    SetInCompound,
}

pub fn classify_argument(argument: &Expr) -> AggArgument<'_> {
    if let Expr::Path(p) = argument {
        match &p.root {
            PathRoot::VersionSet(_) => return AggArgument::SetPath(p),
            PathRoot::Iterator(it) => {
                if p.steps.iter().any(|s| s.kind.is_set_valued()) {
                    return AggArgument::SetPath(p);
                }
                return AggArgument::Scalar { iterator: it.name.clone() };
            }
        }
    }
    // compound: every referenced path must be scalar and share one root
    let mut roots: BTreeSet<String> = BTreeSet::new();
    let mut set_path = false;
    walk_expr(argument, &mut |e| match e {
        Expr::Path(p) => {
            match &p.root {
                PathRoot::VersionSet(_) => set_path = true,
                PathRoot::Iterator(it) => {
                    roots.insert(it.name.clone());
                }
            }
            if p.steps.iter().any(|s| s.kind.is_set_valued()) {
                set_path = true;
            }
        }
        Expr::UpRef(u) => {
            roots.insert(u.iterator.name.clone());
        }
        _ => {}
    });
    if set_path {
        return AggArgument::SetInCompound;
    }
    match roots.len() {
        0 => AggArgument::Constant,
        1 => AggArgument::Scalar { iterator: roots.into_iter().next().unwrap() },
        _ => AggArgument::Mixed,
    }
}

/// Split a set path into the prefix that enumerates entities and the
/// trailing scalar attribute accesses.
pub fn split_set_path(path: &PathExpr) -> (&[Step], &[Step]) {
    let last_set = path.steps.iter().rposition(|s| s.kind.is_set_valued());
    match last_set {
        Some(i) => path.steps.split_at(i + 1),
        None => path.steps.split_at(0),
    }
}
