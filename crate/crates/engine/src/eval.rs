//! Expression evaluation over a binding frame.
//!
//! Comparison semantics: Null never satisfies any comparator, Int/Float
//! coerce, strings coerce to timestamps against timestamp operands, other
//! cross-type `=`/`!=` are false/true, cross-type ordering is an error.
//! `x.all` compares whole field maps and is only meaningful under `=`/`!=`.

use std::collections::BTreeMap;

use vquel_core::repo::VersionRepo;
use vquel_core::value::{self, CmpOp};
use vquel_core::Value;

use vquel_frontend::ast::*;

use crate::aggregate::AggEnv;
use crate::entity::{Ctx, EntityRef};
use crate::error::EngineError;

/// Bindings of the iterators a statement enumerates, in declaration order.
#[derive(Debug, Clone, Default)]
pub struct Frame {
    bindings: Vec<(String, EntityRef)>,
}

impl Frame {
    pub fn get(&self, name: &str) -> Option<&EntityRef> {
        self.bindings.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn require(&self, ident: &Ident) -> Result<&EntityRef, EngineError> {
        self.get(&ident.name).ok_or_else(|| {
            EngineError::new(format!("iterator {:?} is not bound here", ident.name), ident.span)
        })
    }

    pub fn push(&mut self, name: &str, entity: EntityRef) {
        self.bindings.push((name.to_string(), entity));
    }

    pub fn pop(&mut self) {
        self.bindings.pop();
    }
}

/// Intermediate state while folding scalar path steps.
enum Walk {
    Entity(EntityRef),
    Author(vquel_core::model::Author),
    Scalar(Value),
}

pub fn eval_expr<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    frame: &Frame,
    expr: &Expr,
    aggs: &AggEnv,
) -> Result<Value, EngineError> {
    match expr {
        Expr::Literal(lit, _) => Ok(literal_value(lit)),
        Expr::Path(path) => eval_scalar_path(ctx, frame, path),
        Expr::UpRef(upref) => eval_upref(ctx, frame, upref),
        Expr::Aggregate(agg) => aggs.lookup(ctx, frame, agg),
        Expr::Cmp { op, lhs, rhs, span } => {
            eval_cmp(ctx, frame, *op, lhs, rhs, *span, aggs).map(Value::Bool)
        }
        Expr::And(l, r) => {
            if !truthy(eval_expr(ctx, frame, l, aggs)?, l.span())? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(truthy(eval_expr(ctx, frame, r, aggs)?, r.span())?))
        }
        Expr::Or(l, r) => {
            if truthy(eval_expr(ctx, frame, l, aggs)?, l.span())? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(truthy(eval_expr(ctx, frame, r, aggs)?, r.span())?))
        }
        Expr::Not(e, span) => {
            let v = truthy(eval_expr(ctx, frame, e, aggs)?, *span)?;
            Ok(Value::Bool(!v))
        }
        Expr::Arith { op, lhs, rhs, span } => {
            let l = eval_expr(ctx, frame, lhs, aggs)?;
            let r = eval_expr(ctx, frame, rhs, aggs)?;
            value::arith(*op, &l, &r).map_err(|e| EngineError::new(e.to_string(), *span))
        }
        Expr::Neg(e, span) => {
            let v = eval_expr(ctx, frame, e, aggs)?;
            value::neg(&v).map_err(|e| EngineError::new(e.to_string(), *span))
        }
        Expr::Abs(e, span) => {
            let v = eval_expr(ctx, frame, e, aggs)?;
            value::abs(&v).map_err(|e| EngineError::new(e.to_string(), *span))
        }
    }
}

pub fn literal_value(lit: &Literal) -> Value {
    match lit {
        Literal::Int(i) => Value::Int(*i),
        Literal::Float(f) => Value::Float(*f),
        Literal::Str(s) => Value::Str(s.clone()),
        Literal::Bool(b) => Value::Bool(*b),
    }
}

pub fn truthy(v: Value, span: Span) -> Result<bool, EngineError> {
    match v {
        Value::Bool(b) => Ok(b),
        Value::Null => Ok(false),
        other => Err(EngineError::new(
            format!("predicate must be boolean, got {}", other.type_name()),
            span,
        )),
    }
}

fn eval_cmp<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    frame: &Frame,
    op: CmpOp,
    lhs: &Expr,
    rhs: &Expr,
    span: Span,
    aggs: &AggEnv,
) -> Result<bool, EngineError> {
    // `.all` comparisons work on whole field maps
    let lhs_all = all_operand(lhs);
    let rhs_all = all_operand(rhs);
    match (lhs_all, rhs_all) {
        (None, None) => {
            let l = eval_expr(ctx, frame, lhs, aggs)?;
            let r = eval_expr(ctx, frame, rhs, aggs)?;
            value::compare(op, &l, &r).map_err(|e| EngineError::new(e.to_string(), span))
        }
        (Some(l), Some(r)) => {
            let lf = entity_field_map(ctx, frame, l)?;
            let rf = entity_field_map(ctx, frame, r)?;
            match op {
                CmpOp::Eq => Ok(lf == rf),
                CmpOp::Ne => Ok(lf != rf),
                _ => Err(EngineError::new("only = and != apply to .all", span)),
            }
        }
        _ => Err(EngineError::new(".all must appear on both sides of a comparison", span)),
    }
}

/// `X.all` when the expression is exactly that shape.
fn all_operand(expr: &Expr) -> Option<&PathExpr> {
    if let Expr::Path(p) = expr {
        if matches!(p.steps.last(), Some(s) if s.kind == StepKind::All) {
            return Some(p);
        }
    }
    None
}

fn entity_field_map<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    frame: &Frame,
    path: &PathExpr,
) -> Result<BTreeMap<String, Value>, EngineError> {
    let span = path.span();
    if path.steps.len() != 1 {
        return Err(EngineError::new(".all must directly follow an iterator", span));
    }
    let root = match &path.root {
        PathRoot::Iterator(ident) => frame.require(ident)?.clone(),
        PathRoot::VersionSet(s) => {
            return Err(EngineError::new("the Version set cannot be used as a scalar expression", *s))
        }
    };
    Ok(ctx.all_fields(&root, span)?.into_iter().collect())
}

pub fn eval_scalar_path<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    frame: &Frame,
    path: &PathExpr,
) -> Result<Value, EngineError> {
    let root = match &path.root {
        PathRoot::Iterator(ident) => frame.require(ident)?.clone(),
        PathRoot::VersionSet(span) => {
            return Err(EngineError::new(
                "the Version set cannot be used as a scalar expression",
                *span,
            ))
        }
    };
    if path.steps.is_empty() {
        return Err(EngineError::new(
            "a bare iterator is not a value; name an attribute",
            path.span(),
        ));
    }
    let mut state = Walk::Entity(root);
    for step in &path.steps {
        state = walk_step(ctx, state, step)?;
    }
    match state {
        Walk::Scalar(v) => Ok(v),
        Walk::Entity(_) => Err(EngineError::new(
            "path ends at an entity; name an attribute",
            path.steps.last().unwrap().span,
        )),
        Walk::Author(_) => Err(EngineError::new(
            "author reference needs .name or .email",
            path.steps.last().unwrap().span,
        )),
    }
}

fn walk_step<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    state: Walk,
    step: &Step,
) -> Result<Walk, EngineError> {
    match state {
        Walk::Scalar(_) => Err(EngineError::new(
            format!("cannot step into scalar attribute with .{}", step.kind.name()),
            step.span,
        )),
        Walk::Author(author) => match &step.kind {
            StepKind::Field(f) if f == "name" => Ok(Walk::Scalar(Value::Str(author.name))),
            StepKind::Field(f) if f == "email" => Ok(Walk::Scalar(
                author.email.map(Value::Str).unwrap_or(Value::Null),
            )),
            other => Err(EngineError::new(
                format!("authors have no attribute {:?}", other.name()),
                step.span,
            )),
        },
        Walk::Entity(entity) => match &step.kind {
            StepKind::Author => Ok(Walk::Author(ctx.author_of(&entity, step.span)?)),
            StepKind::Field(name) => Ok(Walk::Scalar(ctx.scalar_attr(&entity, name, step.span)?)),
            StepKind::All => Err(EngineError::new(
                ".all is not a scalar value; use it in a target list or an =/!= comparison",
                step.span,
            )),
            set_step => Err(EngineError::new(
                format!(".{} yields a set and cannot be used as a scalar", set_step.name()),
                step.span,
            )),
        },
    }
}

pub fn eval_upref<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    frame: &Frame,
    upref: &UpRef,
) -> Result<Value, EngineError> {
    let entity = lineage_entity(frame.require(&upref.iterator)?, upref)?;
    if upref.trail.is_empty() {
        return Err(EngineError::new(
            format!("{}({}) needs a trailing attribute", upref.kind.name(), upref.iterator.name),
            upref.span,
        ));
    }
    let mut state = Walk::Entity(entity);
    for ident in &upref.trail {
        let step = Step::plain(
            if ident.name == "author" {
                StepKind::Author
            } else {
                StepKind::Field(ident.name.clone())
            },
            ident.span,
        );
        state = walk_step(ctx, state, &step)?;
    }
    match state {
        Walk::Scalar(v) => Ok(v),
        _ => Err(EngineError::new("up-reference must end in an attribute", upref.span)),
    }
}

/// The enclosing entity an up-reference names: identity on a matching
/// binding, otherwise a walk up the containment lineage.
pub fn lineage_entity(bound: &EntityRef, upref: &UpRef) -> Result<EntityRef, EngineError> {
    use vquel_core::model::ContainerKey;
    let missing = || {
        EngineError::new(
            format!(
                "{}({}) cannot resolve: a {} has no such enclosing entity",
                upref.kind.name(),
                upref.iterator.name,
                bound.kind_name()
            ),
            upref.span,
        )
    };
    match upref.kind {
        UpRefKind::Version => match bound {
            EntityRef::Version { .. } => Ok(bound.clone()),
            EntityRef::Relation { vid, .. }
            | EntityRef::File { vid, .. }
            | EntityRef::Record { vid, .. } => Ok(EntityRef::Version { vid: vid.clone() }),
            EntityRef::Row { .. } => Err(missing()),
        },
        UpRefKind::Relation => match bound {
            EntityRef::Relation { .. } => Ok(bound.clone()),
            EntityRef::Record { vid, container: ContainerKey::Relation(name), .. } => {
                Ok(EntityRef::Relation { vid: vid.clone(), name: name.clone() })
            }
            _ => Err(missing()),
        },
        UpRefKind::File => match bound {
            EntityRef::File { .. } => Ok(bound.clone()),
            EntityRef::Record { vid, container: ContainerKey::File(path), .. } => {
                Ok(EntityRef::File { vid: vid.clone(), path: path.clone() })
            }
            _ => Err(missing()),
        },
    }
}

/// Inline filter admission for one enumerated entity (conjunctive,
/// literal right-hand sides).
pub fn filter_admits<R: VersionRepo + ?Sized>(
    ctx: &Ctx<'_, R>,
    entity: &EntityRef,
    filter: &[FilterCmp],
) -> Result<bool, EngineError> {
    for cmp in filter {
        let lhs = ctx.scalar_attr(entity, &cmp.attr.name, cmp.span)?;
        let rhs = literal_value(&cmp.value);
        let ok = value::compare(cmp.op, &lhs, &rhs)
            .map_err(|e| EngineError::new(e.to_string(), cmp.span))?;
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}
