//! Statement execution: binding enumeration, retrieve evaluation, derived
//! sets, and the parse→desugar→validate→execute pipeline.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use vquel_core::repo::VersionRepo;
use vquel_core::value::sort_cmp;
use vquel_core::Value;

use vquel_frontend::analysis::{DeclSource, ProgramInfo};
use vquel_frontend::ast::*;
use vquel_frontend::validate::display_column_name;
use vquel_frontend::{desugar, parse, reject_reserved_names, validate, FrontendError, Severity};

use crate::aggregate::compute_all;
use crate::entity::{Ctx, DerivedSet, EntityRef};
use crate::error::EngineError;
use crate::eval::{eval_expr, filter_admits, truthy, Frame};
use crate::result::ResultSet;

pub type DeclMap = HashMap<String, RangeDecl>;

/// What one statement did.
#[derive(Debug)]
pub enum StatementOutcome {
    /// A range declaration was registered.
    Declared,
    /// A plain retrieve produced output.
    Output(ResultSet),
    /// A `retrieve into` stored a derived set under this name.
    Stored(String),
}

/// Incremental executor: feed statements in order, derived sets persist
/// between them. The REPL keeps one per session.
pub struct ExecSession<'r, R: VersionRepo + ?Sized> {
    ctx: Ctx<'r, R>,
    decls: DeclMap,
    info: ProgramInfo,
}

impl<'r, R: VersionRepo + ?Sized> ExecSession<'r, R> {
    pub fn new(repo: &'r R) -> ExecSession<'r, R> {
        ExecSession { ctx: Ctx::new(repo), decls: DeclMap::new(), info: ProgramInfo::default() }
    }

    /// Forget every declaration and derived set.
    pub fn reset(&mut self) {
        self.decls.clear();
        self.info = ProgramInfo::default();
        self.ctx.derived.clear();
    }

    pub fn statement(&mut self, stmt: &Statement) -> Result<StatementOutcome, EngineError> {
        match stmt {
            Statement::Range(decl) => {
                let root = decl.source.root.iterator_name().map(str::to_string);
                self.info.declare(&decl.iterator.name, DeclSource::Range { root });
                self.decls.insert(decl.iterator.name.clone(), decl.clone());
                Ok(StatementOutcome::Declared)
            }
            Statement::Retrieve(stmt) => self.retrieve(stmt),
        }
    }

    fn retrieve(&mut self, stmt: &RetrieveStmt) -> Result<StatementOutcome, EngineError> {
        let agg_env = compute_all(&self.ctx, &self.decls, &self.info, stmt)?;

        let free = self.info.free_set(stmt);
        let order = self.info.in_decl_order(&free);
        let mut frames = Vec::new();
        enumerate(&self.ctx, &self.decls, &order, &mut Frame::default(), &mut frames)?;

        let mut kept: Vec<Frame> = Vec::new();
        for frame in frames {
            let keep = match &stmt.where_clause {
                None => true,
                Some(w) => truthy(eval_expr(&self.ctx, &frame, w, &agg_env)?, w.span())?,
            };
            if keep {
                kept.push(frame);
            }
        }

        // plan targets: `.all` expands to the union of field names seen
        // across the surviving bindings, in first-seen order
        enum Plan<'a> {
            All { iterator: Ident, columns: Vec<String> },
            Single(&'a Expr),
        }
        let mut plans = Vec::with_capacity(stmt.targets.len());
        for target in &stmt.targets {
            let all_of = match &target.expr {
                Expr::Path(p)
                    if p.steps.len() == 1 && p.steps[0].kind == StepKind::All =>
                {
                    match &p.root {
                        PathRoot::Iterator(ident) => Some(ident.clone()),
                        PathRoot::VersionSet(span) => {
                            return Err(EngineError::new(
                                ".all needs an iterator, not the Version set",
                                *span,
                            ))
                        }
                    }
                }
                _ => None,
            };
            match all_of {
                Some(iterator) => {
                    let mut columns: Vec<String> = Vec::new();
                    for frame in &kept {
                        let entity = frame.require(&iterator)?;
                        for (name, _) in self.ctx.all_fields(entity, iterator.span)? {
                            if !columns.contains(&name) {
                                columns.push(name);
                            }
                        }
                    }
                    plans.push(Plan::All { iterator, columns });
                }
                None => plans.push(Plan::Single(&target.expr)),
            }
        }

        // column names
        let mut columns: Vec<String> = Vec::new();
        for (plan, target) in plans.iter().zip(&stmt.targets) {
            match plan {
                Plan::All { columns: cols, .. } => columns.extend(cols.iter().cloned()),
                Plan::Single(_) => columns.push(display_column_name(target)),
            }
        }

        // rows
        let mut rows: Vec<(Frame, Vec<Value>)> = Vec::with_capacity(kept.len());
        for frame in kept {
            let mut row = Vec::with_capacity(columns.len());
            for plan in &plans {
                match plan {
                    Plan::All { iterator, columns } => {
                        let entity = frame.require(iterator)?;
                        let fields: HashMap<String, Value> =
                            self.ctx.all_fields(entity, iterator.span)?.into_iter().collect();
                        for col in columns {
                            row.push(fields.get(col).cloned().unwrap_or(Value::Null));
                        }
                    }
                    Plan::Single(expr) => row.push(eval_expr(&self.ctx, &frame, expr, &agg_env)?),
                }
            }
            rows.push((frame, row));
        }

        if stmt.unique {
            let mut seen: HashSet<Vec<Value>> = HashSet::new();
            rows.retain(|(_, row)| seen.insert(row.clone()));
        }

        if !stmt.sort_by.is_empty() {
            let mut keyed: Vec<(Vec<Value>, Frame, Vec<Value>)> = Vec::with_capacity(rows.len());
            for (frame, row) in rows {
                let mut keys = Vec::with_capacity(stmt.sort_by.len());
                for sk in &stmt.sort_by {
                    keys.push(eval_expr(&self.ctx, &frame, &sk.expr, &agg_env)?);
                }
                keyed.push((keys, frame, row));
            }
            keyed.sort_by(|(a, _, _), (b, _, _)| {
                for (i, sk) in stmt.sort_by.iter().enumerate() {
                    let ord = sort_cmp(&a[i], &b[i]);
                    let ord = if sk.desc { ord.reverse() } else { ord };
                    if ord != std::cmp::Ordering::Equal {
                        return ord;
                    }
                }
                std::cmp::Ordering::Equal
            });
            rows = keyed.into_iter().map(|(_, f, r)| (f, r)).collect();
        }

        match &stmt.into {
            None => Ok(StatementOutcome::Output(ResultSet {
                columns,
                rows: rows.into_iter().map(|(_, r)| r).collect(),
            })),
            Some(into) => {
                let mut seen = HashSet::new();
                for col in &columns {
                    if !seen.insert(col.clone()) {
                        return Err(EngineError::new(
                            format!("duplicate column {col:?} in `into {}`", into.name),
                            into.span,
                        ));
                    }
                }
                // entity origins survive when the single target was `X.all`
                let origins = match (plans.as_slice(), stmt.targets.len()) {
                    ([Plan::All { iterator, .. }], 1) => {
                        let mut o = Vec::with_capacity(rows.len());
                        for (frame, _) in &rows {
                            o.push(frame.require(iterator)?.clone());
                        }
                        Some(o)
                    }
                    _ => None,
                };
                let set = DerivedSet {
                    columns,
                    rows: rows.into_iter().map(|(_, r)| r).collect(),
                    origins,
                };
                self.info.declare(&into.name, DeclSource::Derived);
                self.ctx.derived.insert(into.name.clone(), Rc::new(set));
                Ok(StatementOutcome::Stored(into.name.clone()))
            }
        }
    }
}

/// Enumerate binding frames for `order` (iterator names in declaration
/// order), appending to `out`.
pub(crate) fn enumerate<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    decls: &DeclMap,
    order: &[&str],
    frame: &mut Frame,
    out: &mut Vec<Frame>,
) -> Result<(), EngineError> {
    let Some((name, rest)) = order.split_first() else {
        out.push(frame.clone());
        return Ok(());
    };
    for entity in bindings_for(ctx, decls, name, frame)? {
        frame.push(name, entity);
        enumerate(ctx, decls, rest, frame, out)?;
        frame.pop();
    }
    Ok(())
}

fn bindings_for<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    decls: &DeclMap,
    name: &str,
    frame: &Frame,
) -> Result<Vec<EntityRef>, EngineError> {
    if let Some(set) = ctx.derived.get(name) {
        return Ok((0..set.rows.len())
            .map(|index| match &set.origins {
                Some(origins) => origins[index].clone(),
                None => EntityRef::Row { set: name.to_string(), index },
            })
            .collect());
    }
    let decl = decls
        .get(name)
        .ok_or_else(|| EngineError::plain(format!("iterator {name:?} has no declaration")))?;
    let mut current: Vec<EntityRef> = match &decl.source.root {
        PathRoot::VersionSet(_) => {
            let mut versions = Vec::new();
            for vid in ctx.repo.version_ids() {
                let entity = EntityRef::Version { vid };
                if decl.source.root_filter.is_empty()
                    || filter_admits(ctx, &entity, &decl.source.root_filter)?
                {
                    versions.push(entity);
                }
            }
            versions
        }
        PathRoot::Iterator(root) => vec![frame.require(root)?.clone()],
    };
    for step in &decl.source.steps {
        let mut next = Vec::new();
        for entity in &current {
            next.extend(ctx.enumerate_step(entity, step)?);
        }
        current = next;
    }
    Ok(current)
}

/// Execute a parsed (and normally desugared + validated) program.
pub fn execute_program<R: VersionRepo + ?Sized>(
    program: &Program,
    repo: &R,
) -> Result<Vec<ResultSet>, EngineError> {
    let mut session = ExecSession::new(repo);
    let mut out = Vec::new();
    for stmt in &program.statements {
        if let StatementOutcome::Output(rs) = session.statement(stmt)? {
            out.push(rs);
        }
    }
    Ok(out)
}

/// Full pipeline: parse → reserved-name check → desugar → validate →
/// execute. Returns the outputs plus any validation warnings.
pub fn run_pipeline<R: VersionRepo + ?Sized>(
    source: &str,
    repo: &R,
) -> Result<(Vec<ResultSet>, Vec<FrontendError>), EngineError> {
    let program = parse(source).map_err(from_frontend)?;
    if let Some(err) = reject_reserved_names(&program).into_iter().next() {
        return Err(from_frontend(err));
    }
    let desugared = desugar(&program);
    let issues = validate(&desugared);
    if let Some(err) = issues.iter().find(|i| i.severity == Severity::Error) {
        return Err(from_frontend(err.clone()));
    }
    let warnings: Vec<FrontendError> =
        issues.into_iter().filter(|i| i.severity == Severity::Warning).collect();
    let results = execute_program(&desugared, repo)?;
    Ok((results, warnings))
}

fn from_frontend(err: FrontendError) -> EngineError {
    EngineError::new(err.message.clone(), err.span)
}
