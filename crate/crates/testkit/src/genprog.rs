//! Random valid VQuel programs over the generator's schema catalog.
//!
//! Programs are valid by construction (declaration order, grouping rules,
//! typed comparisons) and avoid runtime type errors: field names map to a
//! single type everywhere, ordering comparisons stay within a type, and
//! numeric aggregates only target int fields. Missing fields read as Null,
//! which every comparator rejects without erroring.

use rand::prelude::*;

use vquel_core::model::ColumnType;
use vquel_core::value::{ArithOp, CmpOp};

use vquel_frontend::ast::*;

use crate::genrepo::{FILE_CATALOG, RELATION_CATALOG, STR_POOL};

/// What the generator knows about the repository under test.
pub struct Vocab {
    pub version_ids: Vec<String>,
}

pub struct ProgGenConfig {
    pub max_ranges: usize,
    pub allow_filters: bool,
    pub allow_into: bool,
}

impl Default for ProgGenConfig {
    fn default() -> Self {
        ProgGenConfig { max_ranges: 4, allow_filters: true, allow_into: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GKind {
    Version,
    /// Relation iterator; the name when pinned by a filter.
    Relation(Option<String>),
    File,
    /// Record iterator; Some(relation name) when the source relation is
    /// known, None for provenance-derived or mixed records.
    RelRecord(Option<String>),
    FileRecord,
    /// Provenance-derived record (container kind unknown).
    AnyRecord,
    Row(Vec<(String, ColumnType)>),
}

#[derive(Debug, Clone)]
struct GIter {
    name: String,
    kind: GKind,
    /// Parent iterator chain, nearest first (user iterators only).
    chain: Vec<String>,
}

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    vocab: &'a Vocab,
    cfg: &'a ProgGenConfig,
    iters: Vec<GIter>,
    next_name: usize,
    statements: Vec<Statement>,
}

pub fn random_program(rng: &mut impl Rng, vocab: &Vocab, cfg: &ProgGenConfig) -> Program {
    let mut gen = Gen { rng, vocab, cfg, iters: Vec::new(), next_name: 0, statements: Vec::new() };
    gen.build();
    Program { statements: gen.statements }
}

const SP: Span = Span { line: 0, col: 0 };

fn id(name: &str) -> Ident {
    Ident::new(name, SP)
}

impl<R: Rng> Gen<'_, R> {
    fn fresh_name(&mut self) -> String {
        const NAMES: &[&str] = &["V", "R", "E", "F", "P", "W", "X", "Y", "Z", "N2", "M"];
        let name = NAMES[self.next_name % NAMES.len()];
        let suffix = self.next_name / NAMES.len();
        self.next_name += 1;
        if suffix == 0 {
            name.to_string()
        } else {
            format!("{name}{suffix}")
        }
    }

    fn build(&mut self) {
        let n_ranges = self.rng.gen_range(1..=self.cfg.max_ranges);
        for _ in 0..n_ranges {
            self.add_range();
        }
        let two_part = self.cfg.allow_into && self.rng.gen_bool(0.3);
        if two_part {
            if let Some(set) = self.add_into_retrieve() {
                self.add_final_retrieve(Some(set));
                return;
            }
        }
        self.add_final_retrieve(None);
    }

    // ---- ranges ----

    fn add_range(&mut self) {
        let name = self.fresh_name();
        // after the first range, root at an existing iterator most of the time
        let base = if self.iters.is_empty() || self.rng.gen_bool(0.3) {
            None
        } else {
            Some(self.rng.gen_range(0..self.iters.len()))
        };
        let (source, kind, chain) = match base {
            None => {
                let filter = self.cfg.allow_filters && self.rng.gen_bool(0.3);
                let mut path = PathExpr {
                    root: PathRoot::VersionSet(SP),
                    root_filter: Vec::new(),
                    steps: Vec::new(),
                };
                if filter {
                    path.root_filter = vec![self.version_filter()];
                }
                // sometimes descend straight into containers/records
                match self.rng.gen_range(0..4) {
                    0 => {
                        let (step, kind) = self.container_step();
                        path.steps.push(step);
                        if matches!(kind, GKind::Relation(_)) && self.rng.gen_bool(0.6) {
                            path.steps.push(Step::plain(StepKind::Tuples, SP));
                            let rel = relation_of(&path.steps[0]);
                            (path, GKind::RelRecord(rel), vec![])
                        } else {
                            (path, kind, vec![])
                        }
                    }
                    _ => (path, GKind::Version, vec![]),
                }
            }
            Some(i) => {
                let parent = self.iters[i].clone();
                let mut chain = vec![parent.name.clone()];
                chain.extend(parent.chain.clone());
                let mut path = PathExpr {
                    root: PathRoot::Iterator(id(&parent.name)),
                    root_filter: Vec::new(),
                    steps: Vec::new(),
                };
                let kind = match &parent.kind {
                    GKind::Version => match self.rng.gen_range(0..6) {
                        0 | 1 => {
                            let (step, kind) = self.container_step();
                            path.steps.push(step);
                            if matches!(kind, GKind::Relation(_)) && self.rng.gen_bool(0.5) {
                                path.steps.push(Step::plain(StepKind::Tuples, SP));
                                GKind::RelRecord(relation_of(&path.steps[0]))
                            } else {
                                kind
                            }
                        }
                        2 => {
                            let kind = [StepKind::Ancestors, StepKind::Descendants]
                                .choose(self.rng)
                                .unwrap()
                                .clone();
                            let hops = if self.rng.gen_bool(0.5) {
                                Some(self.rng.gen_range(0..4))
                            } else {
                                None
                            };
                            path.steps.push(Step {
                                kind,
                                hops,
                                explicit_parens: true,
                                filter: Vec::new(),
                                span: SP,
                            });
                            GKind::Version
                        }
                        3 => {
                            path.steps.push(Step {
                                kind: StepKind::Neighbors,
                                hops: Some(self.rng.gen_range(1..4)),
                                explicit_parens: true,
                                filter: Vec::new(),
                                span: SP,
                            });
                            GKind::Version
                        }
                        _ => {
                            let kind = [StepKind::Parents, StepKind::Children]
                                .choose(self.rng)
                                .unwrap()
                                .clone();
                            path.steps.push(Step::plain(kind, SP));
                            GKind::Version
                        }
                    },
                    GKind::Relation(rel) => {
                        path.steps.push(Step::plain(StepKind::Tuples, SP));
                        GKind::RelRecord(rel.clone())
                    }
                    GKind::File => {
                        path.steps.push(Step::plain(StepKind::Records, SP));
                        GKind::FileRecord
                    }
                    GKind::RelRecord(_) | GKind::FileRecord | GKind::AnyRecord => {
                        let kind = [StepKind::Parents, StepKind::Children]
                            .choose(self.rng)
                            .unwrap()
                            .clone();
                        path.steps.push(Step::plain(kind, SP));
                        GKind::AnyRecord
                    }
                    GKind::Row(_) => {
                        // plain alias over the derived rows
                        parent.kind.clone()
                    }
                };
                (path, kind, chain)
            }
        };
        self.statements.push(Statement::Range(RangeDecl {
            iterator: id(&name),
            source,
            span: SP,
        }));
        self.iters.push(GIter { name, kind, chain });
    }

    fn version_filter(&mut self) -> FilterCmp {
        let value = if self.rng.gen_bool(0.8) && !self.vocab.version_ids.is_empty() {
            self.vocab.version_ids.choose(self.rng).unwrap().clone()
        } else {
            "nope".to_string()
        };
        FilterCmp { attr: id("id"), op: CmpOp::Eq, value: Literal::Str(value), span: SP }
    }

    fn container_step(&mut self) -> (Step, GKind) {
        if self.rng.gen_bool(0.75) {
            let mut step = Step::plain(StepKind::Relations, SP);
            let pinned = self.cfg.allow_filters && self.rng.gen_bool(0.5);
            let rel = if pinned {
                let (name, _) = RELATION_CATALOG.choose(self.rng).unwrap();
                step.filter = vec![FilterCmp {
                    attr: id("name"),
                    op: CmpOp::Eq,
                    value: Literal::Str(name.to_string()),
                    span: SP,
                }];
                Some(name.to_string())
            } else {
                None
            };
            (step, GKind::Relation(rel))
        } else {
            (Step::plain(StepKind::Files, SP), GKind::File)
        }
    }

    // ---- expressions ----

    /// A typed scalar attribute path of an iterator: (expr, type).
    fn scalar_of(&mut self, it: &GIter) -> (Expr, ColumnType) {
        let path = |steps: Vec<Step>| {
            Expr::Path(PathExpr {
                root: PathRoot::Iterator(id(&it.name)),
                root_filter: Vec::new(),
                steps,
            })
        };
        let field = |name: &str| Step::plain(StepKind::Field(name.to_string()), SP);
        match &it.kind {
            GKind::Version => match self.rng.gen_range(0..4) {
                0 => (path(vec![field("id")]), ColumnType::Str),
                1 => (path(vec![field("creation_ts")]), ColumnType::Timestamp),
                2 => (path(vec![field("commit_msg")]), ColumnType::Str),
                _ => (
                    path(vec![Step::plain(StepKind::Author, SP), field("name")]),
                    ColumnType::Str,
                ),
            },
            GKind::Relation(_) => {
                if self.rng.gen_bool(0.6) {
                    (path(vec![field("name")]), ColumnType::Str)
                } else {
                    (path(vec![field("changed")]), ColumnType::Bool)
                }
            }
            GKind::File => {
                if self.rng.gen_bool(0.6) {
                    (path(vec![field("full_path")]), ColumnType::Str)
                } else {
                    (path(vec![field("changed")]), ColumnType::Bool)
                }
            }
            GKind::RelRecord(rel) => {
                let (name, ty) = self.record_field(rel.as_deref(), false);
                (path(vec![field(&name)]), ty)
            }
            GKind::FileRecord => {
                let (_, schema) = FILE_CATALOG.choose(self.rng).unwrap();
                let (name, ty) = schema.choose(self.rng).unwrap();
                (path(vec![field(name)]), *ty)
            }
            GKind::AnyRecord => {
                let (name, ty) = self.record_field(None, true);
                (path(vec![field(&name)]), ty)
            }
            GKind::Row(columns) => {
                let (name, ty) = columns[self.rng.gen_range(0..columns.len())].clone();
                (path(vec![field(&name)]), ty)
            }
        }
    }

    /// Field from a known relation, the whole catalog, or the record id.
    fn record_field(&mut self, rel: Option<&str>, any: bool) -> (String, ColumnType) {
        if self.rng.gen_bool(0.15) {
            return ("id".to_string(), ColumnType::Int);
        }
        let schema: Vec<(String, ColumnType)> = match (rel, any) {
            (Some(rel), _) => RELATION_CATALOG
                .iter()
                .find(|(n, _)| *n == rel)
                .map(|(_, s)| s.iter().map(|(f, t)| (f.to_string(), *t)).collect())
                .unwrap_or_default(),
            _ => RELATION_CATALOG
                .iter()
                .flat_map(|(_, s)| s.iter().map(|(f, t)| (f.to_string(), *t)))
                .collect(),
        };
        let (f, t) = schema[self.rng.gen_range(0..schema.len())].clone();
        (f, t)
    }

    fn literal_for(&mut self, ty: ColumnType) -> Literal {
        match ty {
            ColumnType::Int => Literal::Int(self.rng.gen_range(0..60)),
            ColumnType::Float => Literal::Float(self.rng.gen_range(0..100) as f64 / 4.0),
            ColumnType::Bool => Literal::Bool(self.rng.gen_bool(0.5)),
            ColumnType::Str => Literal::Str(STR_POOL.choose(self.rng).unwrap().to_string()),
            ColumnType::Timestamp => Literal::Str("01/01/2015".to_string()),
        }
    }

    fn cmp_for(&mut self, ty: ColumnType) -> CmpOp {
        match ty {
            ColumnType::Bool => *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).unwrap(),
            _ => *[CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]
                .choose(self.rng)
                .unwrap(),
        }
    }

    /// An aggregate over the declared iterators, valid by construction.
    fn aggregate(&mut self) -> Option<Expr> {
        let candidates: Vec<GIter> = self
            .iters
            .iter()
            .filter(|it| !matches!(it.kind, GKind::Row(_)))
            .cloned()
            .collect();
        let target = candidates.choose(self.rng)?.clone();
        let numeric_field = |g: &mut Self, it: &GIter| -> Option<(Expr, bool)> {
            // (expr, is_numeric)
            let (expr, ty) = g.scalar_of(it);
            Some((expr, matches!(ty, ColumnType::Int | ColumnType::Float)))
        };
        let (kind, argument, numeric_ok) = match self.rng.gen_range(0..3) {
            // count/any over the iterator itself
            0 => (
                *[AggKind::Count, AggKind::Any].choose(self.rng).unwrap(),
                Expr::Path(PathExpr::iterator(id(&target.name))),
                false,
            ),
            // aggregate over an attribute
            1 => {
                let (expr, numeric) = numeric_field(self, &target)?;
                let kind = if numeric {
                    *[AggKind::Count, AggKind::Sum, AggKind::Avg, AggKind::Min, AggKind::Max]
                        .choose(self.rng)
                        .unwrap()
                } else {
                    *[AggKind::Count, AggKind::Min, AggKind::Max].choose(self.rng).unwrap()
                };
                (kind, expr, numeric)
            }
            // count over a set path hanging off the iterator
            _ => {
                if !matches!(target.kind, GKind::Version) {
                    (
                        AggKind::Count,
                        Expr::Path(PathExpr::iterator(id(&target.name))),
                        false,
                    )
                } else {
                    let mut steps = vec![Step::plain(StepKind::Relations, SP)];
                    if self.rng.gen_bool(0.7) {
                        steps.push(Step::plain(StepKind::Tuples, SP));
                    }
                    (
                        AggKind::Count,
                        Expr::Path(PathExpr {
                            root: PathRoot::Iterator(id(&target.name)),
                            root_filter: Vec::new(),
                            steps,
                        }),
                        false,
                    )
                }
            }
        };
        let _ = numeric_ok;
        // grouping iterators: ancestors of the enumerated set, plus the
        // occasional correlated sibling
        let (enumerated, mut allowed): (Option<String>, Vec<String>) = match classify(&argument) {
            ArgClass::SetFromIterator(root) => {
                let mut c = vec![root.clone()];
                c.extend(self.chain_of(&root));
                (None, c)
            }
            ArgClass::Scalar(root) => (Some(root.clone()), self.chain_of(&root)),
        };
        if self.rng.gen_bool(0.25) {
            for it in self.iters.clone() {
                if matches!(it.kind, GKind::Row(_)) || allowed.contains(&it.name) {
                    continue;
                }
                let on_elements = Some(&it.name) == enumerated.as_ref()
                    || self.chain_of(&it.name).iter().any(|a| Some(a) == enumerated.as_ref());
                if !on_elements && self.rng.gen_bool(0.3) {
                    allowed.push(it.name.clone());
                }
            }
        }
        let all = self.rng.gen_bool(0.4) && !allowed.is_empty();
        let group_by: Vec<Ident> = if all {
            let n = self.rng.gen_range(0..=allowed.len());
            let mut picks = allowed.clone();
            picks.shuffle(self.rng);
            picks.truncate(n);
            // keep declaration order for readability
            let mut picked: Vec<Ident> = Vec::new();
            for it in &self.iters {
                if picks.contains(&it.name) {
                    picked.push(id(&it.name));
                }
            }
            picked
        } else {
            Vec::new()
        };
        let inner_where = if self.rng.gen_bool(0.4) {
            let root = match classify(&argument) {
                ArgClass::SetFromIterator(_) => None, // elements are unnamed
                ArgClass::Scalar(root) => {
                    self.iters.iter().find(|i| i.name == root).cloned()
                }
            };
            root.map(|it| {
                let (lhs, ty) = self.scalar_of(&it);
                let op = self.cmp_for(ty);
                let rhs = Expr::Literal(self.literal_for(ty), SP);
                Expr::Cmp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span: SP }
            })
        } else {
            None
        };
        Some(Expr::Aggregate(Box::new(AggregateExpr {
            kind,
            all,
            argument,
            group_by,
            inner_where,
            span: SP,
        })))
    }

    fn chain_of(&self, name: &str) -> Vec<String> {
        self.iters
            .iter()
            .find(|i| i.name == name)
            .map(|i| i.chain.clone())
            .unwrap_or_default()
    }

    fn upref(&mut self) -> Option<Expr> {
        let target = self
            .iters
            .iter()
            .filter(|it| {
                matches!(
                    it.kind,
                    GKind::Relation(_) | GKind::File | GKind::RelRecord(_) | GKind::FileRecord
                )
            })
            .cloned()
            .collect::<Vec<_>>()
            .choose(self.rng)?
            .clone();
        let kind = match &target.kind {
            GKind::RelRecord(_) if self.rng.gen_bool(0.4) => UpRefKind::Relation,
            GKind::FileRecord if self.rng.gen_bool(0.4) => UpRefKind::File,
            _ => UpRefKind::Version,
        };
        let trail = match kind {
            UpRefKind::Version => vec![id(if self.rng.gen_bool(0.7) { "id" } else { "creation_ts" })],
            UpRefKind::Relation => vec![id("name")],
            UpRefKind::File => vec![id("full_path")],
        };
        Some(Expr::UpRef(UpRef { kind, iterator: id(&target.name), trail, span: SP }))
    }

    fn comparison(&mut self) -> Expr {
        match self.rng.gen_range(0..5) {
            // attribute vs literal
            0 | 1 => {
                let it = self.iters[self.rng.gen_range(0..self.iters.len())].clone();
                let (lhs, ty) = self.scalar_of(&it);
                let op = self.cmp_for(ty);
                let rhs = Expr::Literal(self.literal_for(ty), SP);
                Expr::Cmp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span: SP }
            }
            // attribute vs attribute of another iterator (equality only,
            // types may differ at runtime)
            2 => {
                let a = self.iters[self.rng.gen_range(0..self.iters.len())].clone();
                let b = self.iters[self.rng.gen_range(0..self.iters.len())].clone();
                let (lhs, _) = self.scalar_of(&a);
                let (rhs, _) = self.scalar_of(&b);
                let op = *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).unwrap();
                Expr::Cmp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span: SP }
            }
            // aggregate vs literal
            3 => match self.aggregate() {
                Some(agg) => {
                    let numericish = matches!(
                        &agg,
                        Expr::Aggregate(a) if matches!(a.kind, AggKind::Count | AggKind::Sum)
                    );
                    let (op, rhs) = if numericish {
                        (self.cmp_for(ColumnType::Int), Expr::Literal(Literal::Int(self.rng.gen_range(0..8)), SP))
                    } else {
                        (CmpOp::Ne, Expr::Literal(Literal::Int(-1), SP))
                    };
                    Expr::Cmp { op, lhs: Box::new(agg), rhs: Box::new(rhs), span: SP }
                }
                None => Expr::Literal(Literal::Bool(true), SP),
            },
            // .all comparison between two iterators
            _ => {
                let records: Vec<GIter> = self
                    .iters
                    .iter()
                    .filter(|i| {
                        matches!(i.kind, GKind::RelRecord(_) | GKind::FileRecord | GKind::AnyRecord)
                    })
                    .cloned()
                    .collect();
                if records.len() >= 2 {
                    let a = records.choose(self.rng).unwrap();
                    let b = records.choose(self.rng).unwrap();
                    let all = |n: &str| {
                        Expr::Path(PathExpr {
                            root: PathRoot::Iterator(id(n)),
                            root_filter: Vec::new(),
                            steps: vec![Step::plain(StepKind::All, SP)],
                        })
                    };
                    let op = *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).unwrap();
                    Expr::Cmp {
                        op,
                        lhs: Box::new(all(&a.name)),
                        rhs: Box::new(all(&b.name)),
                        span: SP,
                    }
                } else {
                    let it = self.iters[self.rng.gen_range(0..self.iters.len())].clone();
                    let (lhs, ty) = self.scalar_of(&it);
                    let rhs = Expr::Literal(self.literal_for(ty), SP);
                    Expr::Cmp { op: CmpOp::Eq, lhs: Box::new(lhs), rhs: Box::new(rhs), span: SP }
                }
            }
        }
    }

    fn predicate(&mut self, depth: usize) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.5) {
            let cmp = self.comparison();
            if self.rng.gen_bool(0.15) {
                return Expr::Not(Box::new(cmp), SP);
            }
            return cmp;
        }
        let l = self.predicate(depth - 1);
        let r = self.predicate(depth - 1);
        if self.rng.gen_bool(0.6) {
            Expr::And(Box::new(l), Box::new(r))
        } else {
            Expr::Or(Box::new(l), Box::new(r))
        }
    }

    fn targets(&mut self, for_into: bool) -> Vec<Target> {
        let n = self.rng.gen_range(1..=3);
        let mut targets = Vec::new();
        let mut used_names: Vec<String> = Vec::new();
        for k in 0..n {
            let expr = match self.rng.gen_range(0..10) {
                0 | 1 | 2 | 3 | 4 => {
                    let it = self.iters[self.rng.gen_range(0..self.iters.len())].clone();
                    self.scalar_of(&it).0
                }
                5 | 6 => self.aggregate().unwrap_or(Expr::Literal(Literal::Int(1), SP)),
                7 => self.upref().unwrap_or(Expr::Literal(Literal::Int(7), SP)),
                8 if !for_into => {
                    // .all of some iterator
                    let it = self.iters[self.rng.gen_range(0..self.iters.len())].clone();
                    Expr::Path(PathExpr {
                        root: PathRoot::Iterator(id(&it.name)),
                        root_filter: Vec::new(),
                        steps: vec![Step::plain(StepKind::All, SP)],
                    })
                }
                _ => {
                    // arithmetic over an int attribute
                    let numeric: Vec<GIter> = self
                        .iters
                        .iter()
                        .filter(|i| matches!(i.kind, GKind::RelRecord(_) | GKind::AnyRecord))
                        .cloned()
                        .collect();
                    match numeric.choose(self.rng) {
                        Some(it) => {
                            let lhs = Expr::Path(PathExpr {
                                root: PathRoot::Iterator(id(&it.name)),
                                root_filter: Vec::new(),
                                steps: vec![Step::plain(StepKind::Field("age".into()), SP)],
                            });
                            Expr::Arith {
                                op: *[ArithOp::Add, ArithOp::Sub, ArithOp::Mul]
                                    .choose(self.rng)
                                    .unwrap(),
                                lhs: Box::new(lhs),
                                rhs: Box::new(Expr::Literal(Literal::Int(self.rng.gen_range(1..5)), SP)),
                                span: SP,
                            }
                        }
                        None => Expr::Literal(Literal::Int(k as i64), SP),
                    }
                }
            };
            let alias = if for_into {
                let name = format!("c{k}");
                used_names.push(name.clone());
                Some(id(&name))
            } else if self.rng.gen_bool(0.2) {
                Some(id(&format!("out{k}")))
            } else {
                None
            };
            targets.push(Target { expr, alias });
        }
        targets
    }

    fn add_into_retrieve(&mut self) -> Option<String> {
        // a derived set with typed columns: first column a version id,
        // second a count, so the follow-up can aggregate it
        let version_iters: Vec<GIter> = self
            .iters
            .iter()
            .filter(|i| matches!(i.kind, GKind::Version))
            .cloned()
            .collect();
        let v = version_iters.choose(self.rng)?.clone();
        let agg = self.aggregate()?;
        let name = "T0".to_string();
        let targets = vec![
            Target {
                expr: Expr::Path(PathExpr {
                    root: PathRoot::Iterator(id(&v.name)),
                    root_filter: Vec::new(),
                    steps: vec![Step::plain(StepKind::Field("id".into()), SP)],
                }),
                alias: Some(id("vid")),
            },
            Target { expr: agg, alias: Some(id("c")) },
        ];
        self.statements.push(Statement::Retrieve(RetrieveStmt {
            into: Some(id(&name)),
            unique: false,
            targets,
            where_clause: None,
            sort_by: Vec::new(),
            span: SP,
        }));
        self.iters.push(GIter {
            name: name.clone(),
            kind: GKind::Row(vec![("vid".into(), ColumnType::Str), ("c".into(), ColumnType::Int)]),
            chain: vec![],
        });
        Some(name)
    }

    fn add_final_retrieve(&mut self, over: Option<String>) {
        if let Some(set) = over {
            // the Query-11 pattern: pick rows maximizing the counted column
            let t_c = Expr::Path(PathExpr {
                root: PathRoot::Iterator(id(&set)),
                root_filter: Vec::new(),
                steps: vec![Step::plain(StepKind::Field("c".into()), SP)],
            });
            let where_clause = Expr::Cmp {
                op: CmpOp::Eq,
                lhs: Box::new(t_c.clone()),
                rhs: Box::new(Expr::Aggregate(Box::new(AggregateExpr {
                    kind: AggKind::Max,
                    all: false,
                    argument: t_c,
                    group_by: Vec::new(),
                    inner_where: None,
                    span: SP,
                }))),
                span: SP,
            };
            self.statements.push(Statement::Retrieve(RetrieveStmt {
                into: None,
                unique: false,
                targets: vec![Target {
                    expr: Expr::Path(PathExpr {
                        root: PathRoot::Iterator(id(&set)),
                        root_filter: Vec::new(),
                        steps: vec![Step::plain(StepKind::Field("vid".into()), SP)],
                    }),
                    alias: None,
                }],
                where_clause: Some(where_clause),
                sort_by: Vec::new(),
                span: SP,
            }));
            return;
        }
        let targets = self.targets(false);
        let where_clause = if self.rng.gen_bool(0.8) { Some(self.predicate(2)) } else { None };
        let unique = self.rng.gen_bool(0.3);
        let mut sort_by = Vec::new();
        if self.rng.gen_bool(0.4) {
            for target in &targets {
                if sort_by.len() >= 2 {
                    break;
                }
                let scalar = match &target.expr {
                    Expr::Path(p) => {
                        matches!(p.steps.last(), Some(s) if matches!(s.kind, StepKind::Field(_)))
                    }
                    Expr::UpRef(_) => true,
                    _ => false,
                };
                if scalar && self.rng.gen_bool(0.7) {
                    sort_by.push(SortKey { expr: target.expr.clone(), desc: self.rng.gen_bool(0.5) });
                }
            }
        }
        self.statements.push(Statement::Retrieve(RetrieveStmt {
            into: None,
            unique,
            targets,
            where_clause,
            sort_by,
            span: SP,
        }));
    }
}

enum ArgClass {
    SetFromIterator(String),
    Scalar(String),
}

fn classify(argument: &Expr) -> ArgClass {
    if let Expr::Path(p) = argument {
        if let Some(root) = p.root.iterator_name() {
            if p.steps.iter().any(|s| s.kind.is_set_valued()) {
                return ArgClass::SetFromIterator(root.to_string());
            }
            return ArgClass::Scalar(root.to_string());
        }
    }
    let mut names: Vec<&str> = Vec::new();
    vquel_frontend::ast::all_iterators(argument, &mut names);
    ArgClass::Scalar(names.first().map(|s| s.to_string()).unwrap_or_default())
}

fn relation_of(step: &Step) -> Option<String> {
    step.filter
        .iter()
        .find(|f| f.attr.name == "name" && f.op == CmpOp::Eq)
        .and_then(|f| match &f.value {
            Literal::Str(s) => Some(s.clone()),
            _ => None,
        })
}
