//! Brute-force reference evaluator.
//!
//! Interprets a parsed program directly against a fully materialized
//! [`InMemoryRepo`]: no desugaring (inline filters act as guards during
//! enumeration), no precomputed aggregate tables (aggregates are
//! recomputed for every outer binding by re-enumerating their iterators
//! with the grouping iterators pinned), and its own value comparison,
//! arithmetic, attribute lookup, and sorting code. It shares only the AST
//! and the repository data structures with the engine it checks.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use chrono::{DateTime, TimeZone, Utc};

use vquel_core::model::{InMemoryRepo, MaterializedVersion};
use vquel_core::Value;

use vquel_frontend::ast::{self, *};

use crate::bfs::{self, EdgeList};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Entity handle used by the reference evaluator.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Ent {
    Version(String),
    Relation(String, String),
    File(String, String),
    /// (version, container name, container is a relation, rid)
    Record(String, String, bool, u64),
    Row(String, usize),
}

#[derive(Debug, Clone)]
struct DSet {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
    origins: Option<Vec<Ent>>,
}

enum Decl {
    Range(PathExpr),
    Derived(DSet),
}

struct State<'a> {
    repo: &'a InMemoryRepo,
    decl_order: Vec<String>,
    decls: HashMap<String, Decl>,
    edges: EdgeList,
}

type Frame = Vec<(String, Ent)>;

pub fn ref_execute(program: &Program, repo: &InMemoryRepo) -> Result<Vec<RefResult>, String> {
    let mut edges = EdgeList::default();
    for v in repo.iter() {
        for p in &v.meta.parents {
            edges.add_edge(&v.meta.id, p);
        }
    }
    let mut state = State { repo, decl_order: Vec::new(), decls: HashMap::new(), edges };
    let mut outputs = Vec::new();
    for stmt in &program.statements {
        match stmt {
            Statement::Range(decl) => {
                state.decl_order.push(decl.iterator.name.clone());
                state.decls.insert(decl.iterator.name.clone(), Decl::Range(decl.source.clone()));
            }
            Statement::Retrieve(stmt) => {
                if let Some(result) = state.retrieve(stmt)? {
                    outputs.push(result);
                }
            }
        }
    }
    Ok(outputs)
}

impl<'a> State<'a> {
    // ---- structure ----

    fn parent_of(&self, name: &str) -> Option<&str> {
        match self.decls.get(name) {
            Some(Decl::Range(path)) => path.root.iterator_name(),
            _ => None,
        }
    }

    fn chain_of(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = name.to_string();
        while let Some(p) = self.parent_of(&cur) {
            if out.iter().any(|o| o == p) {
                break;
            }
            out.push(p.to_string());
            cur = p.to_string();
        }
        out
    }

    fn closure(&self, names: impl IntoIterator<Item = String>) -> BTreeSet<String> {
        let mut set: BTreeSet<String> = names.into_iter().collect();
        let mut work: Vec<String> = set.iter().cloned().collect();
        while let Some(n) = work.pop() {
            if let Some(p) = self.parent_of(&n) {
                if set.insert(p.to_string()) {
                    work.push(p.to_string());
                }
            }
        }
        set
    }

    fn in_decl_order(&self, names: &BTreeSet<String>) -> Vec<String> {
        let mut v: Vec<String> = names.iter().cloned().collect();
        v.sort_by_key(|n| self.decl_order.iter().position(|d| d == n).unwrap_or(usize::MAX));
        v
    }

    /// Grouping iterators of an aggregate: explicit list for the `_all`
    /// form, otherwise the ancestors of the aggregated set (the argument's
    /// root counts itself when the argument descends into a set).
    fn group_key(&self, agg: &AggregateExpr) -> Vec<String> {
        if agg.all {
            return agg.group_by.iter().map(|g| g.name.clone()).collect();
        }
        let chain = match arg_shape(&agg.argument) {
            ArgShape::SetFromIterator(root) => {
                let mut c = vec![root.clone()];
                c.extend(self.chain_of(&root));
                c
            }
            ArgShape::SetFromVersionRoot => Vec::new(),
            ArgShape::Scalar(root) => self.chain_of(&root),
        };
        chain.into_iter().filter(|n| !n.starts_with("__g")).collect()
    }

    fn agg_dep_names(&self, agg: &AggregateExpr) -> BTreeSet<String> {
        let mut names: Vec<&str> = Vec::new();
        ast::all_iterators(&agg.argument, &mut names);
        if let Some(w) = &agg.inner_where {
            ast::all_iterators(w, &mut names);
        }
        let mut set: Vec<String> = names.into_iter().map(str::to_string).collect();
        set.extend(self.group_key(agg));
        self.closure(set)
    }

    fn free_names(&self, stmt: &RetrieveStmt) -> BTreeSet<String> {
        let mut names: Vec<&str> = Vec::new();
        for e in ast::statement_exprs(stmt) {
            ast::free_iterators(e, &mut names);
        }
        let mut set: Vec<String> = names.into_iter().map(str::to_string).collect();
        let mut aggs = Vec::new();
        for e in ast::statement_exprs(stmt) {
            ast::collect_aggregates(e, &mut aggs);
        }
        for agg in aggs {
            set.extend(self.group_key(agg));
        }
        self.closure(set)
    }

    // ---- enumeration ----

    fn enumerate(
        &self,
        order: &[String],
        pinned: &Frame,
        frame: &mut Frame,
        out: &mut Vec<Frame>,
    ) -> Result<(), String> {
        let Some((name, rest)) = order.split_first() else {
            out.push(frame.clone());
            return Ok(());
        };
        if let Some((_, ent)) = pinned.iter().find(|(n, _)| n == name) {
            frame.push((name.clone(), ent.clone()));
            self.enumerate(rest, pinned, frame, out)?;
            frame.pop();
            return Ok(());
        }
        for ent in self.bindings(name, frame)? {
            frame.push((name.clone(), ent));
            self.enumerate(rest, pinned, frame, out)?;
            frame.pop();
        }
        Ok(())
    }

    fn bindings(&self, name: &str, frame: &Frame) -> Result<Vec<Ent>, String> {
        match self.decls.get(name) {
            None => Err(format!("iterator {name:?} not declared")),
            Some(Decl::Derived(set)) => Ok((0..set.rows.len())
                .map(|i| match &set.origins {
                    Some(origins) => origins[i].clone(),
                    None => Ent::Row(name.to_string(), i),
                })
                .collect()),
            Some(Decl::Range(path)) => {
                let mut current = match &path.root {
                    PathRoot::VersionSet(_) => {
                        let mut vs = Vec::new();
                        for vid in self.sorted_versions() {
                            let ent = Ent::Version(vid);
                            if self.filter_ok(&ent, &path.root_filter)? {
                                vs.push(ent);
                            }
                        }
                        vs
                    }
                    PathRoot::Iterator(root) => {
                        vec![lookup(frame, &root.name)
                            .ok_or_else(|| format!("iterator {:?} unbound", root.name))?]
                    }
                };
                for step in &path.steps {
                    let mut next = Vec::new();
                    for ent in &current {
                        next.extend(self.step_entities(ent, step)?);
                    }
                    current = next;
                }
                Ok(current)
            }
        }
    }

    fn sorted_versions(&self) -> Vec<String> {
        let mut ids: Vec<(DateTime<Utc>, String)> = self
            .repo
            .iter()
            .map(|v| (v.meta.creation_ts, v.meta.id.clone()))
            .collect();
        ids.sort();
        ids.into_iter().map(|(_, id)| id).collect()
    }

    fn order_version_set(&self, set: BTreeSet<String>) -> Vec<String> {
        self.sorted_versions().into_iter().filter(|v| set.contains(v)).collect()
    }

    fn version(&self, vid: &str) -> Result<&MaterializedVersion, String> {
        self.repo.get(vid).map(|v| v.as_ref()).ok_or_else(|| format!("unknown version {vid:?}"))
    }

    fn step_entities(&self, ent: &Ent, step: &Step) -> Result<Vec<Ent>, String> {
        let raw: Vec<Ent> = match (&step.kind, ent) {
            (StepKind::Relations, Ent::Version(vid)) => self
                .version(vid)?
                .relations
                .iter()
                .map(|r| Ent::Relation(vid.clone(), r.name.clone()))
                .collect(),
            (StepKind::Files, Ent::Version(vid)) => self
                .version(vid)?
                .files
                .iter()
                .map(|f| Ent::File(vid.clone(), f.full_path.clone()))
                .collect(),
            (StepKind::Tuples, Ent::Relation(vid, name)) => {
                let rel = self
                    .version(vid)?
                    .relation(name)
                    .ok_or_else(|| format!("missing relation {name:?}"))?;
                rel.tuples
                    .iter()
                    .map(|t| Ent::Record(vid.clone(), name.clone(), true, t.rid))
                    .collect()
            }
            (StepKind::Records, Ent::File(vid, path)) => {
                let file = self
                    .version(vid)?
                    .file(path)
                    .ok_or_else(|| format!("missing file {path:?}"))?;
                file.records
                    .iter()
                    .map(|r| Ent::Record(vid.clone(), path.clone(), false, r.rid))
                    .collect()
            }
            (StepKind::Parents, Ent::Version(vid)) => {
                let set: BTreeSet<String> = self.version(vid)?.meta.parents.iter().cloned().collect();
                self.order_version_set(set).into_iter().map(Ent::Version).collect()
            }
            (StepKind::Children, Ent::Version(vid)) => {
                let set: BTreeSet<String> = self.version(vid)?.meta.children.iter().cloned().collect();
                self.order_version_set(set).into_iter().map(Ent::Version).collect()
            }
            (StepKind::Parents, Ent::Record(vid, container, is_rel, rid)) => {
                self.prov_refs(vid, container, *is_rel, *rid, true)?
            }
            (StepKind::Children, Ent::Record(vid, container, is_rel, rid)) => {
                self.prov_refs(vid, container, *is_rel, *rid, false)?
            }
            (StepKind::Ancestors | StepKind::Descendants | StepKind::Neighbors, Ent::Version(vid)) => {
                if step.hops == Some(0) {
                    Vec::new()
                } else {
                    let hops = step.hops.map(|h| h as usize);
                    let set = match step.kind {
                        StepKind::Ancestors => bfs::ancestors(&self.edges, vid, hops),
                        StepKind::Descendants => bfs::descendants(&self.edges, vid, hops),
                        StepKind::Neighbors => {
                            bfs::neighborhood(&self.edges, vid, hops.unwrap_or(usize::MAX))
                        }
                        _ => unreachable!(),
                    };
                    self.order_version_set(set).into_iter().map(Ent::Version).collect()
                }
            }
            (kind, ent) => {
                return Err(format!(
                    "attribute .{} does not apply to a {} binding",
                    kind.name(),
                    ent_kind(ent)
                ))
            }
        };
        if step.filter.is_empty() {
            return Ok(raw);
        }
        let mut kept = Vec::new();
        for ent in raw {
            if self.filter_ok(&ent, &step.filter)? {
                kept.push(ent);
            }
        }
        Ok(kept)
    }

    fn prov_refs(
        &self,
        vid: &str,
        container: &str,
        is_rel: bool,
        rid: u64,
        parents: bool,
    ) -> Result<Vec<Ent>, String> {
        let version = self.version(vid)?;
        let record = if is_rel {
            version.relation(container).and_then(|r| r.tuples.iter().find(|t| t.rid == rid))
        } else {
            version.file(container).and_then(|f| f.records.iter().find(|r| r.rid == rid))
        }
        .ok_or_else(|| format!("missing record {vid}/{container}/{rid}"))?;
        let refs = if parents { &record.parents } else { &record.children };
        let mut out = Vec::new();
        for r in refs {
            let target = self.version(&r.version_id)?;
            let is_rel = target.relation(&r.container).is_some();
            if !is_rel && target.file(&r.container).is_none() {
                return Err(format!("provenance ref {r} names a missing container"));
            }
            out.push(Ent::Record(r.version_id.clone(), r.container.clone(), is_rel, r.rid));
        }
        Ok(out)
    }

    fn filter_ok(&self, ent: &Ent, filter: &[FilterCmp]) -> Result<bool, String> {
        for cmp in filter {
            let lhs = self.attr(ent, &cmp.attr.name)?;
            let rhs = lit_value(&cmp.value);
            if !ref_compare(cmp.op, &lhs, &rhs)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    // ---- attributes ----

    fn attr(&self, ent: &Ent, name: &str) -> Result<Value, String> {
        match ent {
            Ent::Version(vid) => {
                let meta = &self.version(vid)?.meta;
                match name {
                    "id" | "commit_id" => Ok(Value::Str(meta.id.clone())),
                    "creation_ts" | "commit_ts" => Ok(Value::timestamp(meta.creation_ts)),
                    "commit_msg" | "commit_message" => Ok(Value::Str(meta.commit_msg.clone())),
                    _ => Err(format!("versions have no attribute {name:?}")),
                }
            }
            Ent::Relation(vid, rel) => {
                let r = self
                    .version(vid)?
                    .relation(rel)
                    .ok_or_else(|| format!("missing relation {rel:?}"))?;
                match name {
                    "name" => Ok(Value::Str(r.name.clone())),
                    "changed" => Ok(Value::Bool(r.changed)),
                    _ => Err(format!("relations have no attribute {name:?}")),
                }
            }
            Ent::File(vid, path) => {
                let f = self
                    .version(vid)?
                    .file(path)
                    .ok_or_else(|| format!("missing file {path:?}"))?;
                match name {
                    "full_path" => Ok(Value::Str(f.full_path.clone())),
                    "changed" => Ok(Value::Bool(f.changed)),
                    _ => Err(format!("files have no attribute {name:?}")),
                }
            }
            Ent::Record(vid, container, is_rel, rid) => {
                let version = self.version(vid)?;
                let record = if *is_rel {
                    version.relation(container).and_then(|r| r.tuples.iter().find(|t| t.rid == *rid))
                } else {
                    version.file(container).and_then(|f| f.records.iter().find(|r| r.rid == *rid))
                }
                .ok_or_else(|| format!("missing record {vid}/{container}/{rid}"))?;
                if let Some(v) = record.fields.get(name) {
                    return Ok(v.clone());
                }
                if name == "id" {
                    return Ok(Value::Int(*rid as i64));
                }
                Ok(Value::Null)
            }
            Ent::Row(set, index) => {
                let Some(Decl::Derived(ds)) = self.decls.get(set) else {
                    return Err(format!("unknown derived set {set:?}"));
                };
                let col = ds
                    .columns
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| format!("derived set {set} has no column {name:?}"))?;
                Ok(ds.rows[*index][col].clone())
            }
        }
    }

    fn author(&self, ent: &Ent) -> Result<(String, Option<String>), String> {
        match ent {
            Ent::Version(vid) => {
                let a = &self.version(vid)?.meta.author;
                Ok((a.name.clone(), a.email.clone()))
            }
            other => Err(format!("attribute .author does not apply to a {}", ent_kind(other))),
        }
    }

    fn all_fields(&self, ent: &Ent) -> Result<Vec<(String, Value)>, String> {
        match ent {
            Ent::Version(vid) => {
                let meta = &self.version(vid)?.meta;
                Ok(vec![
                    ("id".into(), Value::Str(meta.id.clone())),
                    ("creation_ts".into(), Value::timestamp(meta.creation_ts)),
                    ("commit_msg".into(), Value::Str(meta.commit_msg.clone())),
                    ("author_name".into(), Value::Str(meta.author.name.clone())),
                ])
            }
            Ent::Relation(..) => Ok(vec![
                ("name".into(), self.attr(ent, "name")?),
                ("changed".into(), self.attr(ent, "changed")?),
            ]),
            Ent::File(..) => Ok(vec![
                ("full_path".into(), self.attr(ent, "full_path")?),
                ("changed".into(), self.attr(ent, "changed")?),
            ]),
            Ent::Record(vid, container, is_rel, rid) => {
                let version = self.version(vid)?;
                if *is_rel {
                    let rel = version.relation(container).unwrap();
                    let record = rel.tuples.iter().find(|t| t.rid == *rid).unwrap();
                    Ok(rel
                        .schema
                        .iter()
                        .map(|(c, _)| (c.clone(), record.fields.get(c).cloned().unwrap_or(Value::Null)))
                        .collect())
                } else {
                    let file = version.file(container).unwrap();
                    let record = file.records.iter().find(|r| r.rid == *rid).unwrap();
                    Ok(record.fields.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
                }
            }
            Ent::Row(set, index) => {
                let Some(Decl::Derived(ds)) = self.decls.get(set) else {
                    return Err(format!("unknown derived set {set:?}"));
                };
                Ok(ds.columns.iter().cloned().zip(ds.rows[*index].iter().cloned()).collect())
            }
        }
    }

    // ---- expression evaluation ----

    fn eval(&self, frame: &Frame, expr: &Expr) -> Result<Value, String> {
        match expr {
            Expr::Literal(lit, _) => Ok(lit_value(lit)),
            Expr::Path(path) => self.scalar_path(frame, path),
            Expr::UpRef(upref) => self.upref(frame, upref),
            Expr::Aggregate(agg) => self.agg_value(frame, agg),
            Expr::Cmp { op, lhs, rhs, .. } => {
                if let (Some(l), Some(r)) = (all_path(lhs), all_path(rhs)) {
                    let lm = self.all_map(frame, l)?;
                    let rm = self.all_map(frame, r)?;
                    return match op {
                        CmpOp::Eq => Ok(Value::Bool(lm == rm)),
                        CmpOp::Ne => Ok(Value::Bool(lm != rm)),
                        _ => Err("only = and != apply to .all".to_string()),
                    };
                }
                if all_path(lhs).is_some() || all_path(rhs).is_some() {
                    return Err(".all must appear on both sides of a comparison".to_string());
                }
                let l = self.eval(frame, lhs)?;
                let r = self.eval(frame, rhs)?;
                ref_compare(*op, &l, &r).map(Value::Bool)
            }
            Expr::And(l, r) => {
                if !ref_truthy(&self.eval(frame, l)?)? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(ref_truthy(&self.eval(frame, r)?)?))
            }
            Expr::Or(l, r) => {
                if ref_truthy(&self.eval(frame, l)?)? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(ref_truthy(&self.eval(frame, r)?)?))
            }
            Expr::Not(e, _) => Ok(Value::Bool(!ref_truthy(&self.eval(frame, e)?)?)),
            Expr::Arith { op, lhs, rhs, .. } => {
                ref_arith(*op, &self.eval(frame, lhs)?, &self.eval(frame, rhs)?)
            }
            Expr::Neg(e, _) => match self.eval(frame, e)? {
                Value::Null => Ok(Value::Null),
                Value::Int(i) => Ok(Value::Int(-i)),
                Value::Float(f) => Ok(Value::Float(-f)),
                other => Err(format!("cannot negate {}", other.type_name())),
            },
            Expr::Abs(e, _) => match self.eval(frame, e)? {
                Value::Null => Ok(Value::Null),
                Value::Int(i) => Ok(Value::Int(i.abs())),
                Value::Float(f) => Ok(Value::Float(f.abs())),
                other => Err(format!("abs of {}", other.type_name())),
            },
        }
    }

    fn scalar_path(&self, frame: &Frame, path: &PathExpr) -> Result<Value, String> {
        let root = match &path.root {
            PathRoot::Iterator(id) => {
                lookup(frame, &id.name).ok_or_else(|| format!("iterator {:?} unbound", id.name))?
            }
            PathRoot::VersionSet(_) => return Err("Version set is not a scalar".to_string()),
        };
        if path.steps.is_empty() {
            return Err("bare iterator is not a value".to_string());
        }
        let mut ent = root;
        let mut author: Option<(String, Option<String>)> = None;
        let mut value: Option<Value> = None;
        for step in &path.steps {
            if value.is_some() {
                return Err("cannot step past a scalar".to_string());
            }
            if let Some((name, email)) = &author {
                match &step.kind {
                    StepKind::Field(f) if f == "name" => value = Some(Value::Str(name.clone())),
                    StepKind::Field(f) if f == "email" => {
                        value = Some(email.clone().map(Value::Str).unwrap_or(Value::Null))
                    }
                    other => return Err(format!("authors have no attribute {:?}", other.name())),
                }
                continue;
            }
            match &step.kind {
                StepKind::Author => author = Some(self.author(&ent)?),
                StepKind::Field(f) => value = Some(self.attr(&ent, f)?),
                StepKind::All => return Err(".all is not a scalar".to_string()),
                set => {
                    let _ = set;
                    return Err(format!(".{} yields a set, not a scalar", step.kind.name()));
                }
            }
            let _ = &mut ent;
        }
        value.ok_or_else(|| "path did not produce a value".to_string())
    }

    fn all_map(&self, frame: &Frame, path: &PathExpr) -> Result<BTreeMap<String, Value>, String> {
        if path.steps.len() != 1 {
            return Err(".all must directly follow an iterator".to_string());
        }
        let root = match &path.root {
            PathRoot::Iterator(id) => {
                lookup(frame, &id.name).ok_or_else(|| format!("iterator {:?} unbound", id.name))?
            }
            PathRoot::VersionSet(_) => return Err("Version set has no .all".to_string()),
        };
        Ok(self.all_fields(&root)?.into_iter().collect())
    }

    fn upref(&self, frame: &Frame, upref: &UpRef) -> Result<Value, String> {
        let bound = lookup(frame, &upref.iterator.name)
            .ok_or_else(|| format!("iterator {:?} unbound", upref.iterator.name))?;
        let ent = match (upref.kind, &bound) {
            (UpRefKind::Version, Ent::Version(_)) => bound.clone(),
            (UpRefKind::Version, Ent::Relation(vid, _))
            | (UpRefKind::Version, Ent::File(vid, _))
            | (UpRefKind::Version, Ent::Record(vid, ..)) => Ent::Version(vid.clone()),
            (UpRefKind::Relation, Ent::Relation(..)) => bound.clone(),
            (UpRefKind::Relation, Ent::Record(vid, container, true, _)) => {
                Ent::Relation(vid.clone(), container.clone())
            }
            (UpRefKind::File, Ent::File(..)) => bound.clone(),
            (UpRefKind::File, Ent::Record(vid, container, false, _)) => {
                Ent::File(vid.clone(), container.clone())
            }
            _ => {
                return Err(format!(
                    "{}({}) cannot resolve from a {}",
                    upref.kind.name(),
                    upref.iterator.name,
                    ent_kind(&bound)
                ))
            }
        };
        if upref.trail.is_empty() {
            return Err("up-reference needs a trailing attribute".to_string());
        }
        let mut author: Option<(String, Option<String>)> = None;
        let mut value: Option<Value> = None;
        for ident in &upref.trail {
            if value.is_some() {
                return Err("cannot step past a scalar".to_string());
            }
            if let Some((name, email)) = &author {
                value = Some(match ident.name.as_str() {
                    "name" => Value::Str(name.clone()),
                    "email" => email.clone().map(Value::Str).unwrap_or(Value::Null),
                    other => return Err(format!("authors have no attribute {other:?}")),
                });
                continue;
            }
            if ident.name == "author" {
                author = Some(self.author(&ent)?);
            } else {
                value = Some(self.attr(&ent, &ident.name)?);
            }
        }
        value.ok_or_else(|| "up-reference did not produce a value".to_string())
    }

    // ---- aggregates: recomputed per outer frame ----

    fn agg_value(&self, outer: &Frame, agg: &AggregateExpr) -> Result<Value, String> {
        let keys = self.group_key(agg);
        let pin_names = self.closure(keys);
        let mut pinned: Frame = Vec::new();
        for name in &pin_names {
            let ent = lookup(outer, name)
                .ok_or_else(|| format!("grouping iterator {name:?} unbound in outer statement"))?;
            pinned.push((name.clone(), ent));
        }
        let deps = self.agg_dep_names(agg);
        let order = self.in_decl_order(&deps);
        let mut frames = Vec::new();
        self.enumerate(&order, &pinned, &mut Vec::new(), &mut frames)?;

        let mut entity_elems = 0usize;
        let mut values: Vec<Value> = Vec::new();
        for frame in &frames {
            if let Some(w) = &agg.inner_where {
                if !ref_truthy(&self.eval(frame, w)?)? {
                    continue;
                }
            }
            match arg_shape(&agg.argument) {
                ArgShape::Scalar(_) => {
                    if bare_iter(&agg.argument).is_some() {
                        entity_elems += 1;
                    } else {
                        values.push(self.eval(frame, &agg.argument)?);
                    }
                }
                ArgShape::SetFromIterator(_) | ArgShape::SetFromVersionRoot => {
                    let Expr::Path(path) = &agg.argument else {
                        return Err("set aggregate argument must be a bare path".to_string());
                    };
                    let split = path
                        .steps
                        .iter()
                        .rposition(|s| s.kind.is_set_valued())
                        .map(|i| i + 1)
                        .unwrap_or(0);
                    let (prefix, suffix) = path.steps.split_at(split);
                    let mut current = match &path.root {
                        PathRoot::VersionSet(_) => {
                            let mut vs = Vec::new();
                            for vid in self.sorted_versions() {
                                let ent = Ent::Version(vid);
                                if self.filter_ok(&ent, &path.root_filter)? {
                                    vs.push(ent);
                                }
                            }
                            vs
                        }
                        PathRoot::Iterator(id) => vec![lookup(frame, &id.name)
                            .ok_or_else(|| format!("iterator {:?} unbound", id.name))?],
                    };
                    for step in prefix {
                        let mut next = Vec::new();
                        for ent in &current {
                            next.extend(self.step_entities(ent, step)?);
                        }
                        current = next;
                    }
                    for ent in current {
                        if suffix.is_empty() {
                            entity_elems += 1;
                        } else {
                            values.push(self.suffix_value(&ent, suffix)?);
                        }
                    }
                }
            }
        }
        fold(agg, entity_elems, &values)
    }

    fn suffix_value(&self, ent: &Ent, suffix: &[Step]) -> Result<Value, String> {
        let mut author: Option<(String, Option<String>)> = None;
        let mut value: Option<Value> = None;
        for step in suffix {
            if value.is_some() {
                return Err("cannot step past a scalar".to_string());
            }
            if let Some((name, email)) = &author {
                value = Some(match &step.kind {
                    StepKind::Field(f) if f == "name" => Value::Str(name.clone()),
                    StepKind::Field(f) if f == "email" => {
                        email.clone().map(Value::Str).unwrap_or(Value::Null)
                    }
                    other => return Err(format!("authors have no attribute {:?}", other.name())),
                });
                continue;
            }
            match &step.kind {
                StepKind::Author => author = Some(self.author(ent)?),
                StepKind::Field(f) => value = Some(self.attr(ent, f)?),
                other => return Err(format!("unexpected step .{}", other.name())),
            }
        }
        value.ok_or_else(|| "attribute path incomplete".to_string())
    }

    // ---- retrieve ----

    fn retrieve(&mut self, stmt: &RetrieveStmt) -> Result<Option<RefResult>, String> {
        let free = self.free_names(stmt);
        let order = self.in_decl_order(&free);
        let mut frames = Vec::new();
        self.enumerate(&order, &Vec::new(), &mut Vec::new(), &mut frames)?;

        let mut kept = Vec::new();
        for frame in frames {
            let keep = match &stmt.where_clause {
                None => true,
                Some(w) => ref_truthy(&self.eval(&frame, w)?)?,
            };
            if keep {
                kept.push(frame);
            }
        }

        enum Plan<'e> {
            All(String, Vec<String>),
            One(&'e Expr),
        }
        let mut plans = Vec::new();
        for target in &stmt.targets {
            match all_path(&target.expr) {
                Some(path) => {
                    let name = path
                        .root
                        .iterator_name()
                        .ok_or_else(|| ".all needs an iterator".to_string())?
                        .to_string();
                    let mut columns: Vec<String> = Vec::new();
                    for frame in &kept {
                        let ent = lookup(frame, &name)
                            .ok_or_else(|| format!("iterator {name:?} unbound"))?;
                        for (col, _) in self.all_fields(&ent)? {
                            if !columns.contains(&col) {
                                columns.push(col);
                            }
                        }
                    }
                    plans.push(Plan::All(name, columns));
                }
                None => plans.push(Plan::One(&target.expr)),
            }
        }

        let mut columns = Vec::new();
        for (plan, target) in plans.iter().zip(&stmt.targets) {
            match plan {
                Plan::All(_, cols) => columns.extend(cols.iter().cloned()),
                Plan::One(_) => {
                    columns.push(vquel_frontend::validate::display_column_name(target))
                }
            }
        }

        let mut rows: Vec<(Frame, Vec<Value>)> = Vec::new();
        for frame in kept {
            let mut row = Vec::new();
            for plan in &plans {
                match plan {
                    Plan::All(name, cols) => {
                        let ent = lookup(&frame, name).unwrap();
                        let map: BTreeMap<String, Value> =
                            self.all_fields(&ent)?.into_iter().collect();
                        for col in cols {
                            row.push(map.get(col).cloned().unwrap_or(Value::Null));
                        }
                    }
                    Plan::One(expr) => row.push(self.eval(&frame, expr)?),
                }
            }
            rows.push((frame, row));
        }

        if stmt.unique {
            let mut seen: HashSet<Vec<Value>> = HashSet::new();
            rows.retain(|(_, row)| seen.insert(row.clone()));
        }

        if !stmt.sort_by.is_empty() {
            let mut keyed = Vec::new();
            for (frame, row) in rows {
                let mut keys = Vec::new();
                for sk in &stmt.sort_by {
                    keys.push(self.eval(&frame, &sk.expr)?);
                }
                keyed.push((keys, frame, row));
            }
            keyed.sort_by(|(a, _, _), (b, _, _)| {
                for (i, sk) in stmt.sort_by.iter().enumerate() {
                    let ord = ref_sort_cmp(&a[i], &b[i]);
                    let ord = if sk.desc { ord.reverse() } else { ord };
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                Ordering::Equal
            });
            rows = keyed.into_iter().map(|(_, f, r)| (f, r)).collect();
        }

        match &stmt.into {
            None => Ok(Some(RefResult {
                columns,
                rows: rows.into_iter().map(|(_, r)| r).collect(),
            })),
            Some(into) => {
                let origins = match (plans.as_slice(), stmt.targets.len()) {
                    ([Plan::All(name, _)], 1) => Some(
                        rows.iter()
                            .map(|(frame, _)| lookup(frame, name).unwrap())
                            .collect::<Vec<Ent>>(),
                    ),
                    _ => None,
                };
                let set = DSet {
                    columns,
                    rows: rows.into_iter().map(|(_, r)| r).collect(),
                    origins,
                };
                self.decl_order.push(into.name.clone());
                self.decls.insert(into.name.clone(), Decl::Derived(set));
                Ok(None)
            }
        }
    }
}

// ---- helpers independent of state ----

fn lookup(frame: &Frame, name: &str) -> Option<Ent> {
    frame.iter().find(|(n, _)| n == name).map(|(_, e)| e.clone())
}

fn ent_kind(ent: &Ent) -> &'static str {
    match ent {
        Ent::Version(_) => "version",
        Ent::Relation(..) => "relation",
        Ent::File(..) => "file",
        Ent::Record(..) => "record",
        Ent::Row(..) => "derived row",
    }
}

fn lit_value(lit: &Literal) -> Value {
    match lit {
        Literal::Int(i) => Value::Int(*i),
        Literal::Float(f) => Value::Float(*f),
        Literal::Str(s) => Value::Str(s.clone()),
        Literal::Bool(b) => Value::Bool(*b),
    }
}

fn all_path(expr: &Expr) -> Option<&PathExpr> {
    if let Expr::Path(p) = expr {
        if matches!(p.steps.last(), Some(s) if s.kind == StepKind::All) {
            return Some(p);
        }
    }
    None
}

fn bare_iter(expr: &Expr) -> Option<&str> {
    if let Expr::Path(p) = expr {
        if p.steps.is_empty() {
            return p.root.iterator_name();
        }
    }
    None
}

enum ArgShape {
    SetFromIterator(String),
    SetFromVersionRoot,
    Scalar(String),
}

fn arg_shape(argument: &Expr) -> ArgShape {
    if let Expr::Path(p) = argument {
        match &p.root {
            PathRoot::VersionSet(_) => return ArgShape::SetFromVersionRoot,
            PathRoot::Iterator(id) => {
                if p.steps.iter().any(|s| s.kind.is_set_valued()) {
                    return ArgShape::SetFromIterator(id.name.clone());
                }
                return ArgShape::Scalar(id.name.clone());
            }
        }
    }
    let mut names: Vec<&str> = Vec::new();
    ast::all_iterators(argument, &mut names);
    ArgShape::Scalar(names.first().map(|s| s.to_string()).unwrap_or_default())
}

fn ref_truthy(v: &Value) -> Result<bool, String> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Null => Ok(false),
        other => Err(format!("predicate must be boolean, got {}", other.type_name())),
    }
}

fn parse_ts(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        let micros = t.with_timezone(&Utc).timestamp_micros();
        return Some(Utc.timestamp_micros(micros).unwrap());
    }
    chrono::NaiveDate::parse_from_str(s, "%m/%d/%Y")
        .ok()
        .map(|d| Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap()))
}

/// Comparison rules written out directly: Null never matches, Int/Float
/// coerce, Str coerces to Timestamp opposite a Timestamp, other cross-type
/// `=` is false / `!=` is true, cross-type ordering is an error.
fn ref_compare(op: CmpOp, a: &Value, b: &Value) -> Result<bool, String> {
    use Value::*;
    if matches!(a, Null) || matches!(b, Null) {
        return Ok(false);
    }
    let ord: Option<Ordering> = match (a, b) {
        (Int(x), Int(y)) => Some(x.cmp(y)),
        (Int(x), Float(y)) => (*x as f64).partial_cmp(y),
        (Float(x), Int(y)) => x.partial_cmp(&(*y as f64)),
        (Float(x), Float(y)) => x.partial_cmp(y),
        (Str(x), Str(y)) => Some(x.cmp(y)),
        (Bool(x), Bool(y)) => Some(x.cmp(y)),
        (Timestamp(x), Timestamp(y)) => Some(x.cmp(y)),
        (Timestamp(x), Str(s)) => match parse_ts(s) {
            Some(t) => Some(x.cmp(&t)),
            None => None,
        },
        (Str(s), Timestamp(y)) => match parse_ts(s) {
            Some(t) => Some(t.cmp(y)),
            None => None,
        },
        _ => None,
    };
    match ord {
        Some(ord) => Ok(match op {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }),
        None => match op {
            CmpOp::Eq => Ok(false),
            CmpOp::Ne => Ok(true),
            _ => Err(format!("cannot order {} against {}", a.type_name(), b.type_name())),
        },
    }
}

fn ref_arith(op: ArithOp, a: &Value, b: &Value) -> Result<Value, String> {
    use Value::*;
    if matches!(a, Null) || matches!(b, Null) {
        return Ok(Null);
    }
    match (a, b) {
        (Int(x), Int(y)) => Ok(match op {
            ArithOp::Add => Int(x.wrapping_add(*y)),
            ArithOp::Sub => Int(x.wrapping_sub(*y)),
            ArithOp::Mul => Int(x.wrapping_mul(*y)),
            ArithOp::Div => {
                if *y == 0 {
                    Null
                } else {
                    Float(*x as f64 / *y as f64)
                }
            }
        }),
        (Int(_) | Float(_), Int(_) | Float(_)) => {
            let x = if let Int(i) = a { *i as f64 } else if let Float(f) = a { *f } else { 0.0 };
            let y = if let Int(i) = b { *i as f64 } else if let Float(f) = b { *f } else { 0.0 };
            Ok(match op {
                ArithOp::Add => Float(x + y),
                ArithOp::Sub => Float(x - y),
                ArithOp::Mul => Float(x * y),
                ArithOp::Div => {
                    if y == 0.0 {
                        Null
                    } else {
                        Float(x / y)
                    }
                }
            })
        }
        _ => Err(format!("arithmetic on {} and {}", a.type_name(), b.type_name())),
    }
}

/// Total order for sorting: Null < Bool < numeric < Str < Timestamp.
fn ref_sort_cmp(a: &Value, b: &Value) -> Ordering {
    use Value::*;
    fn rank(v: &Value) -> u8 {
        match v {
            Null => 0,
            Bool(_) => 1,
            Int(_) | Float(_) => 2,
            Str(_) => 3,
            Timestamp(_) => 4,
        }
    }
    let (ra, rb) = (rank(a), rank(b));
    if ra != rb {
        return ra.cmp(&rb);
    }
    match (a, b) {
        (Bool(x), Bool(y)) => x.cmp(y),
        (Str(x), Str(y)) => x.cmp(y),
        (Timestamp(x), Timestamp(y)) => x.cmp(y),
        (Null, Null) => Ordering::Equal,
        _ => {
            let x = if let Int(i) = a { *i as f64 } else if let Float(f) = a { *f } else { 0.0 };
            let y = if let Int(i) = b { *i as f64 } else if let Float(f) = b { *f } else { 0.0 };
            x.partial_cmp(&y).unwrap_or(Ordering::Equal)
        }
    }
}

fn fold(agg: &AggregateExpr, entity_elems: usize, values: &[Value]) -> Result<Value, String> {
    let non_null: Vec<&Value> = values.iter().filter(|v| !v.is_null()).collect();
    let present = entity_elems + non_null.len();
    let no_entities = || {
        if entity_elems > 0 {
            Err(format!("{} needs an attribute value", agg.op_name()))
        } else {
            Ok(())
        }
    };
    match agg.kind {
        AggKind::Count => Ok(Value::Int(present as i64)),
        AggKind::Any => Ok(Value::Bool(present > 0)),
        AggKind::Sum => {
            no_entities()?;
            let mut int_sum = 0i64;
            let mut float_sum = 0.0f64;
            let mut seen_float = false;
            for v in &non_null {
                match v {
                    Value::Int(i) => {
                        int_sum = int_sum.wrapping_add(*i);
                        float_sum += *i as f64;
                    }
                    Value::Float(f) => {
                        seen_float = true;
                        float_sum += f;
                    }
                    other => return Err(format!("sum over {}", other.type_name())),
                }
            }
            Ok(if seen_float { Value::Float(float_sum) } else { Value::Int(int_sum) })
        }
        AggKind::Avg => {
            no_entities()?;
            if non_null.is_empty() {
                return Ok(Value::Null);
            }
            let mut sum = 0.0;
            for v in &non_null {
                match v {
                    Value::Int(i) => sum += *i as f64,
                    Value::Float(f) => sum += f,
                    other => return Err(format!("avg over {}", other.type_name())),
                }
            }
            Ok(Value::Float(sum / non_null.len() as f64))
        }
        AggKind::Min | AggKind::Max => {
            no_entities()?;
            let mut best: Option<&Value> = None;
            for v in non_null {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let better = if agg.kind == AggKind::Min {
                            ref_sort_cmp(v, b) == Ordering::Less
                        } else {
                            ref_sort_cmp(v, b) == Ordering::Greater
                        };
                        if better {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            Ok(best.cloned().unwrap_or(Value::Null))
        }
    }
}
