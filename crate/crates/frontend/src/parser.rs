//! Recursive-descent parser.

use vquel_core::value::{ArithOp, CmpOp};

use crate::ast::*;
use crate::error::FrontendError;
use crate::lexer::{tokenize, Token, TokenKind};

pub fn parse(source: &str) -> Result<Program, FrontendError> {
    let statements = parse_statements(source)?;
    if statements.is_empty() {
        return Err(FrontendError::error("empty program", Span { line: 1, col: 1 }));
    }
    Ok(Program { statements })
}

/// Parse a statement sequence; an empty input yields an empty list (used by
/// the REPL, which accumulates statements across submissions).
pub fn parse_statements(source: &str) -> Result<Vec<Statement>, FrontendError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut statements = Vec::new();
    while !parser.peek_is(&TokenKind::Eof) {
        statements.push(parser.statement()?);
    }
    Ok(statements)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const AGG_NAMES: &[(&str, AggKind, bool)] = &[
    ("count", AggKind::Count, false),
    ("sum", AggKind::Sum, false),
    ("avg", AggKind::Avg, false),
    ("min", AggKind::Min, false),
    ("max", AggKind::Max, false),
    ("any", AggKind::Any, false),
    ("count_all", AggKind::Count, true),
    ("sum_all", AggKind::Sum, true),
    ("avg_all", AggKind::Avg, true),
    ("min_all", AggKind::Min, true),
    ("max_all", AggKind::Max, true),
    ("any_all", AggKind::Any, true),
];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &TokenKind {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn peek_is(&self, kind: &TokenKind) -> bool {
        &self.peek().kind == kind
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek_is(kind) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<Token, FrontendError> {
        if self.peek_is(&kind) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> FrontendError {
        let t = self.peek();
        FrontendError::error(format!("expected {what}, found {}", t.kind.describe()), t.span)
    }

    fn ident(&mut self, what: &str) -> Result<Ident, FrontendError> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                let span = self.peek().span;
                self.advance();
                Ok(Ident::new(name, span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn statement(&mut self) -> Result<Statement, FrontendError> {
        match self.peek().kind {
            TokenKind::Range => Ok(Statement::Range(self.range_decl()?)),
            TokenKind::Retrieve => Ok(Statement::Retrieve(self.retrieve()?)),
            _ => Err(self.unexpected("`range` or `retrieve`")),
        }
    }

    fn range_decl(&mut self) -> Result<RangeDecl, FrontendError> {
        let span = self.expect(TokenKind::Range, "`range`")?.span;
        self.expect(TokenKind::Of, "`of`")?;
        let iterator = self.ident("iterator name")?;
        self.expect(TokenKind::Is, "`is`")?;
        let source = self.path()?;
        Ok(RangeDecl { iterator, source, span })
    }

    fn retrieve(&mut self) -> Result<RetrieveStmt, FrontendError> {
        let span = self.expect(TokenKind::Retrieve, "`retrieve`")?.span;
        let into = if self.eat(&TokenKind::Into) {
            Some(self.ident("iterator name after `into`")?)
        } else {
            None
        };
        let unique = self.eat(&TokenKind::Unique);
        let targets = self.target_list()?;
        let where_clause = if self.eat(&TokenKind::Where) {
            Some(self.expr()?)
        } else {
            None
        };
        let mut sort_by = Vec::new();
        if self.eat(&TokenKind::Sort) {
            self.expect(TokenKind::By, "`by`")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat(&TokenKind::Desc) {
                    true
                } else {
                    self.eat(&TokenKind::Asc);
                    false
                };
                sort_by.push(SortKey { expr, desc });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        Ok(RetrieveStmt { into, unique, targets, where_clause, sort_by, span })
    }

    /// A target list is either bare or wrapped in parentheses as a whole.
    /// `(x)` is ambiguous with a parenthesized expression; resolved by
    /// checking whether anything continues the expression after `)`.
    fn target_list(&mut self) -> Result<Vec<Target>, FrontendError> {
        if self.peek_is(&TokenKind::LParen) {
            let save = self.pos;
            self.advance();
            match self.targets_inner() {
                Ok(targets) if self.peek_is(&TokenKind::RParen) => {
                    self.advance();
                    if self.continues_expression() {
                        self.pos = save;
                    } else {
                        return Ok(targets);
                    }
                }
                _ => self.pos = save,
            }
        }
        self.targets_inner()
    }

    fn continues_expression(&self) -> bool {
        matches!(
            self.peek().kind,
            TokenKind::As
                | TokenKind::Dot
                | TokenKind::Plus
                | TokenKind::Minus
                | TokenKind::Star
                | TokenKind::Slash
                | TokenKind::Eq
                | TokenKind::Ne
                | TokenKind::Lt
                | TokenKind::Le
                | TokenKind::Gt
                | TokenKind::Ge
                | TokenKind::And
                | TokenKind::Or
                | TokenKind::Comma
        )
    }

    fn targets_inner(&mut self) -> Result<Vec<Target>, FrontendError> {
        let mut targets = Vec::new();
        loop {
            let expr = self.expr()?;
            let alias = if self.eat(&TokenKind::As) {
                Some(self.ident("alias after `as`")?)
            } else {
                None
            };
            targets.push(Target { expr, alias });
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        Ok(targets)
    }

    // ---- paths ----

    fn path(&mut self) -> Result<PathExpr, FrontendError> {
        let ident = self.ident("path root (`Version` or an iterator)")?;
        self.path_from_root(ident)
    }

    fn path_from_root(&mut self, ident: Ident) -> Result<PathExpr, FrontendError> {
        let (root, root_filter) = if ident.name == "Version" {
            let filter = if self.peek_is(&TokenKind::LParen) {
                self.advance();
                let f = self.filter_list()?;
                self.expect(TokenKind::RParen, "`)` after filter")?;
                f
            } else {
                Vec::new()
            };
            (PathRoot::VersionSet(ident.span), filter)
        } else {
            (PathRoot::Iterator(ident), Vec::new())
        };
        let mut steps = Vec::new();
        while self.eat(&TokenKind::Dot) {
            steps.push(self.step()?);
        }
        Ok(PathExpr { root, root_filter, steps })
    }

    fn step(&mut self) -> Result<Step, FrontendError> {
        let (name, span) = match &self.peek().kind {
            TokenKind::All => {
                let span = self.advance().span;
                return Ok(Step::plain(StepKind::All, span));
            }
            TokenKind::Ident(name) => {
                let name = name.clone();
                let span = self.peek().span;
                self.advance();
                (name, span)
            }
            _ => return Err(self.unexpected("attribute name after `.`")),
        };
        let kind = match name.as_str() {
            "P" => StepKind::Ancestors,
            "D" => StepKind::Descendants,
            "N" => StepKind::Neighbors,
            _ => match name.to_ascii_lowercase().as_str() {
                "relations" => StepKind::Relations,
                "files" => StepKind::Files,
                "tuples" => StepKind::Tuples,
                "records" => StepKind::Records,
                "parents" => StepKind::Parents,
                "children" => StepKind::Children,
                "author" => StepKind::Author,
                _ => StepKind::Field(name),
            },
        };
        let mut step = Step::plain(kind, span);
        if self.peek_is(&TokenKind::LParen) {
            self.advance();
            step.explicit_parens = step.kind.is_traversal();
            if step.kind.is_traversal() {
                if let TokenKind::Int(n) = self.peek().kind {
                    if n < 0 {
                        return Err(FrontendError::error("hop count must be non-negative", self.peek().span));
                    }
                    step.hops = Some(n as u64);
                    self.advance();
                }
                self.expect(TokenKind::RParen, "`)` after hop count")?;
            } else {
                step.filter = self.filter_list()?;
                self.expect(TokenKind::RParen, "`)` after filter")?;
            }
        }
        Ok(step)
    }

    fn filter_list(&mut self) -> Result<Vec<FilterCmp>, FrontendError> {
        let mut filters = Vec::new();
        loop {
            let attr = self.ident("attribute name in filter")?;
            let op = self.cmp_op()?;
            let value = self.literal()?;
            let span = attr.span;
            filters.push(FilterCmp { attr, op, value, span });
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        Ok(filters)
    }

    fn cmp_op(&mut self) -> Result<CmpOp, FrontendError> {
        let op = match self.peek().kind {
            TokenKind::Eq => CmpOp::Eq,
            TokenKind::Ne => CmpOp::Ne,
            TokenKind::Lt => CmpOp::Lt,
            TokenKind::Le => CmpOp::Le,
            TokenKind::Gt => CmpOp::Gt,
            TokenKind::Ge => CmpOp::Ge,
            _ => return Err(self.unexpected("comparison operator")),
        };
        self.advance();
        Ok(op)
    }

    fn literal(&mut self) -> Result<Literal, FrontendError> {
        let lit = match &self.peek().kind {
            TokenKind::Int(i) => Literal::Int(*i),
            TokenKind::Float(f) => Literal::Float(*f),
            TokenKind::Str(s) => Literal::Str(s.clone()),
            TokenKind::True => Literal::Bool(true),
            TokenKind::False => Literal::Bool(false),
            TokenKind::Minus => {
                self.advance();
                return match &self.peek().kind {
                    TokenKind::Int(i) => {
                        let v = Literal::Int(-*i);
                        self.advance();
                        Ok(v)
                    }
                    TokenKind::Float(f) => {
                        let v = Literal::Float(-*f);
                        self.advance();
                        Ok(v)
                    }
                    _ => Err(self.unexpected("number after `-`")),
                };
            }
            _ => return Err(self.unexpected("literal")),
        };
        self.advance();
        Ok(lit)
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&TokenKind::Or) {
            let rhs = self.and_expr()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.not_expr()?;
        while self.eat(&TokenKind::And) {
            let rhs = self.not_expr()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, FrontendError> {
        if self.peek_is(&TokenKind::Not) {
            let span = self.advance().span;
            let inner = self.not_expr()?;
            return Ok(Expr::Not(Box::new(inner), span));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, FrontendError> {
        let lhs = self.additive()?;
        let op = match self.peek().kind {
            TokenKind::Eq => Some(CmpOp::Eq),
            TokenKind::Ne => Some(CmpOp::Ne),
            TokenKind::Lt => Some(CmpOp::Lt),
            TokenKind::Le => Some(CmpOp::Le),
            TokenKind::Gt => Some(CmpOp::Gt),
            TokenKind::Ge => Some(CmpOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            let span = self.advance().span;
            let rhs = self.additive()?;
            return Ok(Expr::Cmp { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span });
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => ArithOp::Add,
                TokenKind::Minus => ArithOp::Sub,
                _ => break,
            };
            let span = self.advance().span;
            let rhs = self.multiplicative()?;
            lhs = Expr::Arith { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => ArithOp::Mul,
                TokenKind::Slash => ArithOp::Div,
                _ => break,
            };
            let span = self.advance().span;
            let rhs = self.unary()?;
            lhs = Expr::Arith { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        if self.peek_is(&TokenKind::Minus) {
            let span = self.advance().span;
            // fold minus into numeric literals so -1 is a literal
            match self.peek().kind {
                TokenKind::Int(i) => {
                    self.advance();
                    return Ok(Expr::Literal(Literal::Int(-i), span));
                }
                TokenKind::Float(f) => {
                    self.advance();
                    return Ok(Expr::Literal(Literal::Float(-f), span));
                }
                _ => {}
            }
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        let span = self.peek().span;
        match &self.peek().kind {
            TokenKind::Int(i) => {
                let e = Expr::Literal(Literal::Int(*i), span);
                self.advance();
                Ok(e)
            }
            TokenKind::Float(f) => {
                let e = Expr::Literal(Literal::Float(*f), span);
                self.advance();
                Ok(e)
            }
            TokenKind::Str(s) => {
                let e = Expr::Literal(Literal::Str(s.clone()), span);
                self.advance();
                Ok(e)
            }
            TokenKind::True => {
                self.advance();
                Ok(Expr::Literal(Literal::Bool(true), span))
            }
            TokenKind::False => {
                self.advance();
                Ok(Expr::Literal(Literal::Bool(false), span))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                let name = name.clone();
                if self.peek_at(1) == &TokenKind::LParen {
                    if name.eq_ignore_ascii_case("abs") {
                        self.advance();
                        self.advance();
                        let inner = self.expr()?;
                        self.expect(TokenKind::RParen, "`)` after abs argument")?;
                        return Ok(Expr::Abs(Box::new(inner), span));
                    }
                    if let Some((_, kind, all)) = AGG_NAMES
                        .iter()
                        .find(|(n, _, _)| name.eq_ignore_ascii_case(n))
                    {
                        return self.aggregate(*kind, *all, span);
                    }
                    // `Version(S)` is an up-reference; `Version(id = "x")`
                    // is a filtered root. Peek past the identifier.
                    let upref_kind = match name.as_str() {
                        "Version" => Some(UpRefKind::Version),
                        "Relation" => Some(UpRefKind::Relation),
                        "File" => Some(UpRefKind::File),
                        _ => None,
                    };
                    if let Some(kind) = upref_kind {
                        let is_upref = matches!(self.peek_at(2), TokenKind::Ident(_))
                            && self.peek_at(3) == &TokenKind::RParen;
                        if is_upref {
                            return self.upref(kind, span);
                        }
                        if kind != UpRefKind::Version {
                            return Err(FrontendError::error(
                                format!("{}(...) expects an iterator name", kind.name()),
                                span,
                            ));
                        }
                    }
                }
                let ident = self.ident("identifier")?;
                let path = self.path_from_root(ident)?;
                Ok(Expr::Path(path))
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn aggregate(&mut self, kind: AggKind, all: bool, span: Span) -> Result<Expr, FrontendError> {
        self.advance(); // op name
        self.advance(); // (
        let argument = self.expr()?;
        let mut group_by = Vec::new();
        if self.eat(&TokenKind::Group) {
            self.expect(TokenKind::By, "`by` after `group`")?;
            loop {
                group_by.push(self.ident("iterator name in group by")?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        let inner_where = if self.eat(&TokenKind::Where) {
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(TokenKind::RParen, "`)` closing aggregate")?;
        Ok(Expr::Aggregate(Box::new(AggregateExpr {
            kind,
            all,
            argument,
            group_by,
            inner_where,
            span,
        })))
    }

    fn upref(&mut self, kind: UpRefKind, span: Span) -> Result<Expr, FrontendError> {
        self.advance(); // kind name
        self.advance(); // (
        let iterator = self.ident("iterator name")?;
        self.expect(TokenKind::RParen, "`)`")?;
        let mut trail = Vec::new();
        while self.eat(&TokenKind::Dot) {
            trail.push(self.ident("attribute name")?);
        }
        Ok(Expr::UpRef(UpRef { kind, iterator, trail, span }))
    }
}
