//! Semantic validation. Issues are data; only `Severity::Error` blocks
//! execution.

use std::collections::HashMap;

use crate::analysis::{classify_argument, AggArgument, ProgramInfo};
use crate::ast::*;
use crate::error::FrontendError;
use crate::FRESH_PREFIX;

/// Entity kind an iterator binds, as far as it can be known statically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Version,
    Relation,
    File,
    Record,
    /// Derived-set row with statically unknown columns.
    Row,
    AuthorRef,
    Scalar,
    Unknown,
}

/// Reject user programs that use the reserved fresh-iterator prefix. Run
/// on parsed input *before* desugaring; the desugarer itself may introduce
/// such names.
pub fn reject_reserved_names(program: &Program) -> Vec<FrontendError> {
    let mut out = Vec::new();
    for stmt in &program.statements {
        let ident = match stmt {
            Statement::Range(r) => Some(&r.iterator),
            Statement::Retrieve(r) => r.into.as_ref(),
        };
        if let Some(ident) = ident {
            if ident.name.starts_with(FRESH_PREFIX) {
                out.push(FrontendError::error(
                    format!("iterator name {:?} uses the reserved prefix {FRESH_PREFIX}", ident.name),
                    ident.span,
                ));
            }
        }
    }
    out
}

/// Validate a program (desugared or not): declaration discipline, step
/// applicability, aggregate shape, and target naming.
pub fn validate(program: &Program) -> Vec<FrontendError> {
    let mut v = Validator {
        info: ProgramInfo::build(&program.statements),
        kinds: HashMap::new(),
        declared: HashMap::new(),
        issues: Vec::new(),
    };
    v.run(program);
    v.issues
}

struct Validator {
    info: ProgramInfo,
    kinds: HashMap<String, Kind>,
    /// Names declared so far, with the statement index that declared them.
    declared: HashMap<String, usize>,
    issues: Vec<FrontendError>,
}

impl Validator {
    fn error(&mut self, message: impl Into<String>, span: Span) {
        self.issues.push(FrontendError::error(message, span));
    }

    fn warn(&mut self, message: impl Into<String>, span: Span) {
        self.issues.push(FrontendError::warning(message, span));
    }

    fn run(&mut self, program: &Program) {
        for (index, stmt) in program.statements.iter().enumerate() {
            match stmt {
                Statement::Range(decl) => self.range_decl(index, decl),
                Statement::Retrieve(stmt) => self.retrieve(index, stmt),
            }
        }
    }

    fn declare(&mut self, ident: &Ident, index: usize, kind: Kind) {
        if ident.name == "Version" || ident.name == "Relation" || ident.name == "File" {
            self.error(format!("{:?} cannot be used as an iterator name", ident.name), ident.span);
            return;
        }
        if self.declared.insert(ident.name.clone(), index).is_some() {
            self.error(format!("iterator {:?} declared more than once", ident.name), ident.span);
            return;
        }
        self.kinds.insert(ident.name.clone(), kind);
    }

    fn check_declared(&mut self, ident: &Ident) -> bool {
        if self.declared.contains_key(&ident.name) {
            true
        } else {
            self.error(format!("iterator {:?} is not declared at this point", ident.name), ident.span);
            false
        }
    }

    fn range_decl(&mut self, index: usize, decl: &RangeDecl) {
        let kind = self.check_path(&decl.source, PathContext::RangeSource);
        self.declare(&decl.iterator, index, kind);
    }

    fn retrieve(&mut self, index: usize, stmt: &RetrieveStmt) {
        for target in &stmt.targets {
            self.check_expr(&target.expr, ExprContext::Scalar);
        }
        if let Some(w) = &stmt.where_clause {
            self.check_expr(w, ExprContext::Scalar);
        }
        for key in &stmt.sort_by {
            let mut aggs = Vec::new();
            collect_aggregates(&key.expr, &mut aggs);
            if !aggs.is_empty() {
                self.error("aggregates are not allowed in sort by", key.expr.span());
            }
            self.check_expr(&key.expr, ExprContext::Scalar);
            let in_targets = stmt.targets.iter().any(|t| t.expr == key.expr);
            if !in_targets {
                self.warn(
                    "sort key is not in the target list; sorting on the underlying binding value",
                    key.expr.span(),
                );
            }
        }
        // aggregate shape checks
        let mut aggs = Vec::new();
        for expr in statement_exprs(stmt) {
            collect_aggregates(expr, &mut aggs);
        }
        for agg in aggs {
            self.check_aggregate(agg);
        }
        // into: derivable, collision-free column names
        if let Some(into) = &stmt.into {
            let mut names: Vec<String> = Vec::new();
            for target in &stmt.targets {
                match derived_column_name(target) {
                    Some(name) if name == "all" => {} // expands at run time
                    Some(name) => {
                        if names.contains(&name) {
                            self.error(
                                format!("duplicate column {name:?} in `into {}`", into.name),
                                target.expr.span(),
                            );
                        }
                        names.push(name);
                    }
                    None => self.error(
                        format!("target needs an `as` alias to become a column of {}", into.name),
                        target.expr.span(),
                    ),
                }
            }
            let kind = self.into_kind(stmt);
            self.declare(into, index, kind);
        }
    }

    /// A derived set keeps entity behavior when its rows are whole
    /// entities, i.e. the single target is `X.all`.
    fn into_kind(&self, stmt: &RetrieveStmt) -> Kind {
        if stmt.targets.len() != 1 {
            return Kind::Row;
        }
        if let Expr::Path(p) = &stmt.targets[0].expr {
            if matches!(p.steps.last(), Some(s) if s.kind == StepKind::All) {
                let prefix = PathExpr {
                    root: p.root.clone(),
                    root_filter: p.root_filter.clone(),
                    steps: p.steps[..p.steps.len() - 1].to_vec(),
                };
                let mut probe = Validator {
                    info: self.info.clone(),
                    kinds: self.kinds.clone(),
                    declared: self.declared.clone(),
                    issues: Vec::new(),
                };
                return probe.check_path(&prefix, PathContext::RangeSource);
            }
        }
        Kind::Row
    }

    fn check_aggregate(&mut self, agg: &AggregateExpr) {
        let mut nested = Vec::new();
        collect_aggregates(&agg.argument, &mut nested);
        if let Some(w) = &agg.inner_where {
            collect_aggregates(w, &mut nested);
        }
        if !nested.is_empty() {
            self.error("nested aggregates are not supported", agg.span);
        }
        if !agg.all && !agg.group_by.is_empty() {
            self.error(
                format!("`group by` requires the _all form ({}_all)", agg.kind.name()),
                agg.span,
            );
        }
        self.check_expr(&agg.argument, ExprContext::AggArgument);
        if let Some(w) = &agg.inner_where {
            self.check_expr(w, ExprContext::Scalar);
        }
        // grouping by the aggregated set itself (or anything rooted at it)
        // would make every group a singleton; reject it
        let enumerated: Option<String> = match classify_argument(&agg.argument) {
            AggArgument::SetPath(_) => None, // elements are anonymous
            AggArgument::Scalar { iterator } => Some(iterator),
            AggArgument::Constant => {
                self.error("aggregate argument must reference an iterator", agg.span);
                return;
            }
            AggArgument::Mixed => {
                self.error("aggregate argument must reference exactly one iterator", agg.span);
                return;
            }
            AggArgument::SetInCompound => {
                self.error(
                    "set-valued path cannot appear inside a compound aggregate argument",
                    agg.span,
                );
                return;
            }
        };
        for g in &agg.group_by {
            if !self.check_declared(g) {
                continue;
            }
            if let Some(enumerated) = &enumerated {
                let grouping_on_elements = g.name == *enumerated
                    || self.info.ancestor_chain(&g.name).iter().any(|a| a == enumerated);
                if grouping_on_elements {
                    self.error(
                        format!(
                            "group by {:?} would group the aggregated iterator by itself",
                            g.name
                        ),
                        g.span,
                    );
                }
            }
        }
    }

    fn check_expr(&mut self, expr: &Expr, ctx: ExprContext) {
        match expr {
            Expr::Literal(..) => {}
            Expr::Path(p) => {
                let path_ctx = match ctx {
                    ExprContext::AggArgument => PathContext::AggArgument,
                    ExprContext::Scalar => PathContext::Scalar,
                };
                self.check_path(p, path_ctx);
            }
            Expr::UpRef(u) => {
                if self.check_declared(&u.iterator) {
                    let kind = self.kinds.get(&u.iterator.name).copied().unwrap_or(Kind::Unknown);
                    if matches!(kind, Kind::Scalar | Kind::AuthorRef) {
                        self.error(
                            format!("{}({}) needs an entity iterator", u.kind.name(), u.iterator.name),
                            u.span,
                        );
                    }
                    // statically known lineage mismatches
                    let bad = matches!(
                        (u.kind, kind),
                        (UpRefKind::Relation, Kind::Version)
                            | (UpRefKind::File, Kind::Version)
                            | (UpRefKind::Relation, Kind::File)
                            | (UpRefKind::File, Kind::Relation)
                    );
                    if bad {
                        self.error(
                            format!(
                                "{}({}) cannot resolve: {:?} iterators have no such enclosing entity",
                                u.kind.name(),
                                u.iterator.name,
                                kind
                            ),
                            u.span,
                        );
                    }
                }
                if u.trail.is_empty() && ctx == ExprContext::Scalar {
                    self.error(
                        format!("{}({}) needs a trailing attribute", u.kind.name(), u.iterator.name),
                        u.span,
                    );
                }
                if u.kind == UpRefKind::Version {
                    if let Some(first) = u.trail.first() {
                        self.check_version_attr(first);
                    }
                }
            }
            Expr::Aggregate(_) => {
                if ctx == ExprContext::AggArgument {
                    // reported as nested aggregates by check_aggregate
                }
            }
            Expr::Cmp { lhs, rhs, .. } => {
                self.check_expr(lhs, ctx);
                self.check_expr(rhs, ctx);
            }
            Expr::And(l, r) | Expr::Or(l, r) => {
                self.check_expr(l, ctx);
                self.check_expr(r, ctx);
            }
            Expr::Arith { lhs, rhs, .. } => {
                self.check_expr(lhs, ctx);
                self.check_expr(rhs, ctx);
            }
            Expr::Not(e, _) | Expr::Neg(e, _) | Expr::Abs(e, _) => self.check_expr(e, ctx),
        }
    }

    fn check_version_attr(&mut self, attr: &Ident) {
        const KNOWN: &[&str] = &[
            "id", "commit_id", "creation_ts", "commit_ts", "commit_msg", "commit_message",
        ];
        if !KNOWN.contains(&attr.name.as_str()) && attr.name != "author" {
            self.error(format!("versions have no attribute {:?}", attr.name), attr.span);
        }
    }

    /// Infer the kind a path produces and report inapplicable steps.
    fn check_path(&mut self, path: &PathExpr, ctx: PathContext) -> Kind {
        let mut kind = match &path.root {
            PathRoot::VersionSet(span) => {
                if ctx == PathContext::Scalar {
                    self.error("the Version set cannot be used as a scalar expression", *span);
                }
                Kind::Version
            }
            PathRoot::Iterator(ident) => {
                if !self.check_declared(ident) {
                    return Kind::Unknown;
                }
                self.kinds.get(&ident.name).copied().unwrap_or(Kind::Unknown)
            }
        };
        if !path.root_filter.is_empty() && !matches!(path.root, PathRoot::VersionSet(_)) {
            self.error("filters may only follow the Version root", path.span());
        }
        for (i, step) in path.steps.iter().enumerate() {
            if kind == Kind::Scalar {
                self.error(
                    format!("cannot step into scalar attribute with .{}", step.kind.name()),
                    step.span,
                );
                return Kind::Unknown;
            }
            if !step.filter.is_empty() && !step.kind.is_set_valued() {
                self.error(
                    format!("inline filter is not allowed on .{}", step.kind.name()),
                    step.span,
                );
            }
            if step.kind.is_set_valued() {
                if ctx == PathContext::Scalar {
                    self.error(
                        format!(".{} yields a set and cannot be used as a scalar", step.kind.name()),
                        step.span,
                    );
                }
            }
            kind = self.step_kind(kind, step);
            if step.kind == StepKind::All && i + 1 != path.steps.len() {
                self.error(".all must be the final step", step.span);
            }
        }
        if ctx == PathContext::RangeSource {
            if matches!(kind, Kind::Scalar | Kind::AuthorRef) {
                self.error(
                    "a range must be declared over a set of entities, not an attribute",
                    path.span(),
                );
            }
        }
        kind
    }

    fn step_kind(&mut self, from: Kind, step: &Step) -> Kind {
        use Kind::*;
        use StepKind::*;
        let err = |v: &mut Self, from: Kind| {
            v.error(
                format!("attribute .{} does not apply to a {:?} binding", step.kind.name(), from),
                step.span,
            );
            Unknown
        };
        match (&step.kind, from) {
            // rows keep entity behavior when they carry entity origins;
            // resolved at evaluation time
            (Field(_) | All, Unknown | Row) => Scalar,
            (Author, Unknown | Row) => AuthorRef,
            (_, Unknown | Row) => Unknown,
            (Relations, Version) => Relation,
            (Relations, k) => err(self, k),
            (Files, Version) => File,
            (Files, k) => err(self, k),
            (Tuples, Relation) => Record,
            (Tuples, k) => err(self, k),
            (Records, File) => Record,
            (Records, k) => err(self, k),
            (Parents | Children, Version) => Version,
            (Parents | Children, Record) => Record,
            (Parents | Children, k) => err(self, k),
            (Ancestors | Descendants | Neighbors, Version) => {
                if step.kind == Neighbors && step.hops.is_none() {
                    self.error("N requires a hop count", step.span);
                }
                Version
            }
            (Ancestors | Descendants | Neighbors, k) => err(self, k),
            (Author, Version) => AuthorRef,
            (Author, k) => err(self, k),
            (All, _) => Scalar,
            (Field(name), Version) => {
                self.check_version_attr(&Ident::new(name.clone(), step.span));
                Scalar
            }
            (Field(name), Relation) => {
                if name != "name" && name != "changed" {
                    self.error(format!("relations have no attribute {name:?}"), step.span);
                }
                Scalar
            }
            (Field(name), File) => {
                if name != "full_path" && name != "changed" {
                    self.error(format!("files have no attribute {name:?}"), step.span);
                }
                Scalar
            }
            (Field(_), Record) => Scalar,
            (Field(name), AuthorRef) => {
                if name != "name" && name != "email" {
                    self.error(format!("authors have no attribute {name:?}"), step.span);
                }
                Scalar
            }
            (Field(_), Scalar) => Unknown, // unreachable: scalar guarded above
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ExprContext {
    Scalar,
    AggArgument,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PathContext {
    RangeSource,
    Scalar,
    AggArgument,
}

/// Column name a target would get in a derived set.
pub fn derived_column_name(target: &Target) -> Option<String> {
    if let Some(alias) = &target.alias {
        return Some(alias.name.clone());
    }
    match &target.expr {
        Expr::Path(p) => match p.steps.last() {
            Some(step) => match &step.kind {
                StepKind::Field(f) => Some(f.clone()),
                StepKind::All => Some("all".to_string()),
                _ => None,
            },
            None => None,
        },
        Expr::UpRef(u) => u.trail.last().map(|t| t.name.clone()),
        Expr::Aggregate(a) => Some(a.op_name()),
        _ => None,
    }
}

/// Display column name for plain retrieve output.
pub fn display_column_name(target: &Target) -> String {
    if let Some(alias) = &target.alias {
        return alias.name.clone();
    }
    match &target.expr {
        Expr::Path(p) => match p.steps.last() {
            Some(step) => step.kind.name().to_string(),
            None => p
                .root
                .iterator_name()
                .map(str::to_string)
                .unwrap_or_else(|| "Version".to_string()),
        },
        Expr::UpRef(u) => u
            .trail
            .last()
            .map(|t| t.name.clone())
            .unwrap_or_else(|| u.kind.name().to_string()),
        Expr::Aggregate(a) => a.op_name(),
        _ => "expr".to_string(),
    }
}
