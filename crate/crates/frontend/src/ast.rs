//! Abstract syntax. Spans compare equal everywhere so structural equality
//! of two ASTs ignores source positions.

use std::fmt;

pub use vquel_core::value::{ArithOp, CmpOp};

/// Source position (1-based line and column).
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: Span) -> Ident {
        Ident { name: name.into(), span }
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub statements: Vec<Statement>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    Range(RangeDecl),
    Retrieve(RetrieveStmt),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RangeDecl {
    pub iterator: Ident,
    pub source: PathExpr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PathRoot {
    /// The root set of all versions, optionally filtered:
    /// `Version(id = "v01")`.
    VersionSet(Span),
    Iterator(Ident),
}

impl PathRoot {
    pub fn span(&self) -> Span {
        match self {
            PathRoot::VersionSet(s) => *s,
            PathRoot::Iterator(i) => i.span,
        }
    }

    pub fn iterator_name(&self) -> Option<&str> {
        match self {
            PathRoot::VersionSet(_) => None,
            PathRoot::Iterator(i) => Some(&i.name),
        }
    }
}

/// One attribute step along a path. `P`/`D`/`N` carry an optional hop
/// count; set-valued steps may carry an inline filter.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub kind: StepKind,
    pub hops: Option<u64>,
    /// `true` when the step was written with parentheses (`P()` vs `P`).
    pub explicit_parens: bool,
    pub filter: Vec<FilterCmp>,
    pub span: Span,
}

impl Step {
    pub fn plain(kind: StepKind, span: Span) -> Step {
        Step { kind, hops: None, explicit_parens: false, filter: Vec::new(), span }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StepKind {
    Relations,
    Files,
    Tuples,
    Records,
    /// `parents`: parent versions of a version, or provenance parents of a
    /// record.
    Parents,
    Children,
    /// Version-graph ancestors, `P(k)` / `P()`.
    Ancestors,
    /// Version-graph descendants, `D(k)` / `D()`.
    Descendants,
    /// Version-graph neighborhood, `N(k)`.
    Neighbors,
    Author,
    All,
    Field(String),
}

impl StepKind {
    pub fn is_set_valued(&self) -> bool {
        matches!(
            self,
            StepKind::Relations
                | StepKind::Files
                | StepKind::Tuples
                | StepKind::Records
                | StepKind::Parents
                | StepKind::Children
                | StepKind::Ancestors
                | StepKind::Descendants
                | StepKind::Neighbors
        )
    }

    pub fn is_traversal(&self) -> bool {
        matches!(self, StepKind::Ancestors | StepKind::Descendants | StepKind::Neighbors)
    }

    pub fn name(&self) -> &str {
        match self {
            StepKind::Relations => "Relations",
            StepKind::Files => "Files",
            StepKind::Tuples => "Tuples",
            StepKind::Records => "Records",
            StepKind::Parents => "parents",
            StepKind::Children => "children",
            StepKind::Ancestors => "P",
            StepKind::Descendants => "D",
            StepKind::Neighbors => "N",
            StepKind::Author => "author",
            StepKind::All => "all",
            StepKind::Field(f) => f,
        }
    }
}

/// Inline filter comparison: attribute against a literal, conjunctive.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterCmp {
    pub attr: Ident,
    pub op: CmpOp,
    pub value: Literal,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathExpr {
    pub root: PathRoot,
    /// Filter attached to a `Version(...)` root.
    pub root_filter: Vec<FilterCmp>,
    pub steps: Vec<Step>,
}

impl PathExpr {
    pub fn iterator(name: Ident) -> PathExpr {
        PathExpr { root: PathRoot::Iterator(name), root_filter: Vec::new(), steps: Vec::new() }
    }

    pub fn span(&self) -> Span {
        self.root.span()
    }

    pub fn has_filters(&self) -> bool {
        !self.root_filter.is_empty() || self.steps.iter().any(|s| !s.filter.is_empty())
    }

    pub fn has_set_steps(&self) -> bool {
        matches!(self.root, PathRoot::VersionSet(_)) && !self.steps.is_empty()
            || self.steps.iter().any(|s| s.kind.is_set_valued())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpRefKind {
    Version,
    Relation,
    File,
}

impl UpRefKind {
    pub fn name(self) -> &'static str {
        match self {
            UpRefKind::Version => "Version",
            UpRefKind::Relation => "Relation",
            UpRefKind::File => "File",
        }
    }
}

/// Up-reference to an enclosing entity: `Version(S).id`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpRef {
    pub kind: UpRefKind,
    pub iterator: Ident,
    pub trail: Vec<Ident>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggKind {
    Count,
    Sum,
    Avg,
    Min,
    Max,
    Any,
}

impl AggKind {
    pub fn name(self) -> &'static str {
        match self {
            AggKind::Count => "count",
            AggKind::Sum => "sum",
            AggKind::Avg => "avg",
            AggKind::Min => "min",
            AggKind::Max => "max",
            AggKind::Any => "any",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateExpr {
    pub kind: AggKind,
    /// `count_all` vs `count`: `_all` groups by exactly the `group by`
    /// list; the plain form groups by the argument's ancestor iterators.
    pub all: bool,
    pub argument: Expr,
    pub group_by: Vec<Ident>,
    pub inner_where: Option<Expr>,
    pub span: Span,
}

impl AggregateExpr {
    pub fn op_name(&self) -> String {
        if self.all {
            format!("{}_all", self.kind.name())
        } else {
            self.kind.name().to_string()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Literal(Literal, Span),
    Path(PathExpr),
    UpRef(UpRef),
    Aggregate(Box<AggregateExpr>),
    Cmp { op: CmpOp, lhs: Box<Expr>, rhs: Box<Expr>, span: Span },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>, Span),
    Arith { op: ArithOp, lhs: Box<Expr>, rhs: Box<Expr>, span: Span },
    Neg(Box<Expr>, Span),
    Abs(Box<Expr>, Span),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Literal(_, s) => *s,
            Expr::Path(p) => p.span(),
            Expr::UpRef(u) => u.span,
            Expr::Aggregate(a) => a.span,
            Expr::Cmp { span, .. } => *span,
            Expr::And(l, _) | Expr::Or(l, _) => l.span(),
            Expr::Not(_, s) => *s,
            Expr::Arith { span, .. } => *span,
            Expr::Neg(_, s) | Expr::Abs(_, s) => *s,
        }
    }

    /// Conjoin, treating `None` as `true`.
    pub fn and_opt(lhs: Option<Expr>, rhs: Expr) -> Expr {
        match lhs {
            None => rhs,
            Some(l) => Expr::And(Box::new(l), Box::new(rhs)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub expr: Expr,
    pub alias: Option<Ident>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SortKey {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrieveStmt {
    pub into: Option<Ident>,
    pub unique: bool,
    pub targets: Vec<Target>,
    pub where_clause: Option<Expr>,
    pub sort_by: Vec<SortKey>,
    pub span: Span,
}

/// Walk every expression of a statement (targets, where, sort keys).
pub fn statement_exprs(stmt: &RetrieveStmt) -> impl Iterator<Item = &Expr> {
    stmt.targets
        .iter()
        .map(|t| &t.expr)
        .chain(stmt.where_clause.iter())
        .chain(stmt.sort_by.iter().map(|k| &k.expr))
}

/// Visit `expr` and every sub-expression, including aggregate internals.
pub fn walk_expr<'a>(expr: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
    f(expr);
    match expr {
        Expr::Literal(..) | Expr::Path(_) | Expr::UpRef(_) => {}
        Expr::Aggregate(agg) => {
            walk_expr(&agg.argument, f);
            if let Some(w) = &agg.inner_where {
                walk_expr(w, f);
            }
        }
        Expr::Cmp { lhs, rhs, .. } | Expr::Arith { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        Expr::And(l, r) | Expr::Or(l, r) => {
            walk_expr(l, f);
            walk_expr(r, f);
        }
        Expr::Not(e, _) | Expr::Neg(e, _) | Expr::Abs(e, _) => walk_expr(e, f),
    }
}

/// Iterator names referenced by an expression *outside* any aggregate.
/// Aggregate sub-expressions are skipped entirely.
pub fn free_iterators<'a>(expr: &'a Expr, out: &mut Vec<&'a str>) {
    match expr {
        Expr::Literal(..) => {}
        Expr::Path(p) => {
            if let Some(name) = p.root.iterator_name() {
                out.push(name);
            }
        }
        Expr::UpRef(u) => out.push(&u.iterator.name),
        Expr::Aggregate(_) => {}
        Expr::Cmp { lhs, rhs, .. } | Expr::Arith { lhs, rhs, .. } => {
            free_iterators(lhs, out);
            free_iterators(rhs, out);
        }
        Expr::And(l, r) | Expr::Or(l, r) => {
            free_iterators(l, out);
            free_iterators(r, out);
        }
        Expr::Not(e, _) | Expr::Neg(e, _) | Expr::Abs(e, _) => free_iterators(e, out),
    }
}

/// Iterator names referenced anywhere in an expression, aggregates included.
pub fn all_iterators<'a>(expr: &'a Expr, out: &mut Vec<&'a str>) {
    walk_expr(expr, &mut |e| match e {
        Expr::Path(p) => {
            if let Some(name) = p.root.iterator_name() {
                out.push(name);
            }
        }
        Expr::UpRef(u) => out.push(&u.iterator.name),
        Expr::Aggregate(a) => {
            for g in &a.group_by {
                out.push(&g.name);
            }
        }
        _ => {}
    });
}

/// Every aggregate expression within `expr`, in traversal order.
pub fn collect_aggregates<'a>(expr: &'a Expr, out: &mut Vec<&'a AggregateExpr>) {
    walk_expr(expr, &mut |e| {
        if let Expr::Aggregate(a) = e {
            out.push(a);
        }
    });
}
