//! Grouped aggregate evaluation.
//!
//! An aggregate is computed once per statement from the iterator ranges
//! alone, independent of the enclosing where clause. Plain operators group
//! by the ancestor iterators of the aggregated set; `_all` operators group
//! by exactly their `group by` list (none: one global value). Group keys
//! are materialized from the dependency enumeration before the inner
//! `where` filters elements, and a group key absent at lookup time means
//! an empty group: count and sum are 0, any is false, avg/min/max are
//! Null.

use std::collections::HashMap;

use vquel_core::repo::VersionRepo;
use vquel_core::value::sort_cmp;
use vquel_core::Value;

use vquel_frontend::analysis::{classify_argument, split_set_path, AggArgument, ProgramInfo};
use vquel_frontend::ast::*;

use crate::entity::{Ctx, EntityRef};
use crate::error::EngineError;
use crate::eval::{eval_expr, filter_admits, truthy, Frame};
use crate::exec::{enumerate, DeclMap};

/// Elements flowing into one group: whole entities (countable) or scalar
/// attribute values. Null scalars are skipped by every operator.
#[derive(Debug, Clone)]
enum Element {
    Entity,
    Scalar(Value),
}

pub struct GroupedAgg {
    group_iters: Vec<String>,
    groups: HashMap<Vec<EntityRef>, Value>,
    empty: Value,
}

/// Pre-computed aggregate values for one statement, keyed by AST node.
#[derive(Default)]
pub struct AggEnv {
    values: HashMap<usize, GroupedAgg>,
}

impl AggEnv {
    pub fn lookup<R: VersionRepo + ?Sized>(
        &self,
        _ctx: &Ctx<'_, R>,
        frame: &Frame,
        agg: &AggregateExpr,
    ) -> Result<Value, EngineError> {
        let grouped = self
            .values
            .get(&(agg as *const AggregateExpr as usize))
            .ok_or_else(|| EngineError::new("aggregate was not precomputed", agg.span))?;
        let mut key = Vec::with_capacity(grouped.group_iters.len());
        for name in &grouped.group_iters {
            let entity = frame.get(name).ok_or_else(|| {
                EngineError::new(
                    format!("grouping iterator {name:?} is not bound in the outer statement"),
                    agg.span,
                )
            })?;
            key.push(entity.clone());
        }
        Ok(grouped.groups.get(&key).cloned().unwrap_or_else(|| grouped.empty.clone()))
    }
}

/// Compute every aggregate appearing in a retrieve statement.
pub fn compute_all<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    decls: &DeclMap,
    info: &ProgramInfo,
    stmt: &RetrieveStmt,
) -> Result<AggEnv, EngineError> {
    let mut aggs = Vec::new();
    for expr in statement_exprs(stmt) {
        collect_aggregates(expr, &mut aggs);
    }
    let mut env = AggEnv::default();
    for agg in aggs {
        let grouped = compute_one(ctx, decls, info, agg)?;
        env.values.insert(agg as *const AggregateExpr as usize, grouped);
    }
    Ok(env)
}

fn compute_one<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    decls: &DeclMap,
    info: &ProgramInfo,
    agg: &AggregateExpr,
) -> Result<GroupedAgg, EngineError> {
    let deps = info.agg_deps(agg);
    let order = info.in_decl_order(&deps);
    let mut frames = Vec::new();
    enumerate(ctx, decls, &order, &mut Frame::default(), &mut frames)?;

    // the effective key closes over the grouping iterators' root chains:
    // a grouping binding reached through different outer bindings (an
    // ancestor shared by several versions, say) stays scoped to its own
    // enumeration path
    let group_iters: Vec<String> = {
        let set = info.close_over_roots(info.group_key(agg).into_iter().collect());
        info.in_decl_order(&set).into_iter().map(str::to_string).collect()
    };
    let argument = classify_argument(&agg.argument);
    let inner_env = AggEnv::default(); // nested aggregates are rejected upstream

    let mut groups: HashMap<Vec<EntityRef>, Vec<Element>> = HashMap::new();
    for frame in &frames {
        let mut key = Vec::with_capacity(group_iters.len());
        for name in &group_iters {
            let entity = frame.get(name).ok_or_else(|| {
                EngineError::new(format!("grouping iterator {name:?} not enumerated"), agg.span)
            })?;
            key.push(entity.clone());
        }
        let bucket = groups.entry(key).or_default();
        if let Some(w) = &agg.inner_where {
            if !truthy(eval_expr(ctx, frame, w, &inner_env)?, w.span())? {
                continue;
            }
        }
        match &argument {
            AggArgument::SetPath(path) => {
                let (prefix, suffix) = split_set_path(path);
                let entities = expand_set_prefix(ctx, frame, path, prefix)?;
                for entity in entities {
                    bucket.push(element_from(ctx, &entity, suffix)?);
                }
            }
            AggArgument::Scalar { .. } => {
                if bare_iterator(&agg.argument).is_some() {
                    bucket.push(Element::Entity);
                } else {
                    let v = eval_expr(ctx, frame, &agg.argument, &inner_env)?;
                    bucket.push(Element::Scalar(v));
                }
            }
            AggArgument::Constant | AggArgument::Mixed | AggArgument::SetInCompound => {
                return Err(EngineError::new("unsupported aggregate argument", agg.span))
            }
        }
    }

    let mut finalized = HashMap::with_capacity(groups.len());
    for (key, elements) in groups {
        finalized.insert(key, finalize(agg, &elements)?);
    }
    Ok(GroupedAgg { group_iters, groups: finalized, empty: finalize(agg, &[])? })
}

fn bare_iterator(expr: &Expr) -> Option<&str> {
    if let Expr::Path(p) = expr {
        if p.steps.is_empty() {
            return p.root.iterator_name();
        }
    }
    None
}

/// Enumerate the entities the set prefix of an argument path denotes
/// for the current frame.
fn expand_set_prefix<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    frame: &Frame,
    path: &PathExpr,
    prefix: &[Step],
) -> Result<Vec<EntityRef>, EngineError> {
    let mut current: Vec<EntityRef> = match &path.root {
        PathRoot::VersionSet(_) => {
            let mut versions = Vec::new();
            for vid in ctx.repo.version_ids() {
                let entity = EntityRef::Version { vid };
                if path.root_filter.is_empty() || filter_admits(ctx, &entity, &path.root_filter)? {
                    versions.push(entity);
                }
            }
            versions
        }
        PathRoot::Iterator(ident) => vec![frame.require(ident)?.clone()],
    };
    for step in prefix {
        let mut next = Vec::new();
        for entity in &current {
            next.extend(ctx.enumerate_step(entity, step)?);
        }
        current = next;
    }
    Ok(current)
}

fn element_from<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    entity: &EntityRef,
    suffix: &[Step],
) -> Result<Element, EngineError> {
    if suffix.is_empty() {
        return Ok(Element::Entity);
    }
    let mut value: Option<Value> = None;
    let mut author: Option<vquel_core::model::Author> = None;
    for step in suffix {
        match (&step.kind, &value, &author) {
            (StepKind::Author, None, None) => author = Some(ctx.author_of(entity, step.span)?),
            (StepKind::Field(f), None, Some(a)) => {
                value = Some(match f.as_str() {
                    "name" => Value::Str(a.name.clone()),
                    "email" => a.email.clone().map(Value::Str).unwrap_or(Value::Null),
                    _ => {
                        return Err(EngineError::new(
                            format!("authors have no attribute {f:?}"),
                            step.span,
                        ))
                    }
                });
            }
            (StepKind::Field(f), None, None) => {
                value = Some(ctx.scalar_attr(entity, f, step.span)?);
            }
            _ => {
                return Err(EngineError::new(
                    format!("cannot apply .{} here", step.kind.name()),
                    step.span,
                ))
            }
        }
    }
    match value {
        Some(v) => Ok(Element::Scalar(v)),
        None => Err(EngineError::new("aggregate attribute path incomplete", suffix[0].span)),
    }
}

fn finalize(agg: &AggregateExpr, elements: &[Element]) -> Result<Value, EngineError> {
    let scalars = || {
        elements.iter().filter_map(|e| match e {
            Element::Entity => None,
            Element::Scalar(v) if v.is_null() => None,
            Element::Scalar(v) => Some(v),
        })
    };
    let present = elements
        .iter()
        .filter(|e| !matches!(e, Element::Scalar(Value::Null)))
        .count();
    let needs_values = || {
        if elements.iter().any(|e| matches!(e, Element::Entity)) {
            return Err(EngineError::new(
                format!("{} needs an attribute value, not a whole entity", agg.op_name()),
                agg.span,
            ));
        }
        Ok(())
    };
    match agg.kind {
        AggKind::Count => Ok(Value::Int(present as i64)),
        AggKind::Any => Ok(Value::Bool(present > 0)),
        AggKind::Sum => {
            needs_values()?;
            let mut int_sum: i64 = 0;
            let mut float_sum = 0.0;
            let mut seen_float = false;
            for v in scalars() {
                match v {
                    Value::Int(i) => {
                        int_sum = int_sum.wrapping_add(*i);
                        float_sum += *i as f64;
                    }
                    Value::Float(f) => {
                        seen_float = true;
                        float_sum += f;
                    }
                    other => {
                        return Err(EngineError::new(
                            format!("sum over non-numeric value ({})", other.type_name()),
                            agg.span,
                        ))
                    }
                }
            }
            Ok(if seen_float { Value::Float(float_sum) } else { Value::Int(int_sum) })
        }
        AggKind::Avg => {
            needs_values()?;
            let mut sum = 0.0;
            let mut n = 0u64;
            for v in scalars() {
                match v {
                    Value::Int(i) => sum += *i as f64,
                    Value::Float(f) => sum += f,
                    other => {
                        return Err(EngineError::new(
                            format!("avg over non-numeric value ({})", other.type_name()),
                            agg.span,
                        ))
                    }
                }
                n += 1;
            }
            Ok(if n == 0 { Value::Null } else { Value::Float(sum / n as f64) })
        }
        AggKind::Min | AggKind::Max => {
            needs_values()?;
            let mut best: Option<&Value> = None;
            for v in scalars() {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let keep_new = match agg.kind {
                            AggKind::Min => sort_cmp(v, b) == std::cmp::Ordering::Less,
                            _ => sort_cmp(v, b) == std::cmp::Ordering::Greater,
                        };
                        if keep_new {
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
