//! Pretty-printer. Printing then re-parsing yields a structurally equal
//! program (spans aside).

use std::fmt::Write;

use vquel_core::value::{ArithOp, CmpOp};

use crate::ast::*;

pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for stmt in &program.statements {
        match stmt {
            Statement::Range(r) => {
                let _ = writeln!(out, "range of {} is {}", r.iterator, print_path(&r.source));
            }
            Statement::Retrieve(r) => {
                out.push_str(&print_retrieve(r));
            }
        }
    }
    out
}

fn print_retrieve(stmt: &RetrieveStmt) -> String {
    let mut out = String::from("retrieve ");
    if let Some(into) = &stmt.into {
        let _ = write!(out, "into {} ", into);
    }
    if stmt.unique {
        out.push_str("unique ");
    }
    let targets: Vec<String> = stmt
        .targets
        .iter()
        .map(|t| match &t.alias {
            Some(a) => format!("{} as {}", print_expr(&t.expr), a),
            None => print_expr(&t.expr),
        })
        .collect();
    if stmt.into.is_some() {
        let _ = write!(out, "({})", targets.join(", "));
    } else {
        out.push_str(&targets.join(", "));
    }
    if let Some(w) = &stmt.where_clause {
        let _ = write!(out, "\nwhere {}", print_expr(w));
    }
    if !stmt.sort_by.is_empty() {
        let keys: Vec<String> = stmt
            .sort_by
            .iter()
            .map(|k| {
                if k.desc {
                    format!("{} desc", print_expr(&k.expr))
                } else {
                    print_expr(&k.expr)
                }
            })
            .collect();
        let _ = write!(out, "\nsort by {}", keys.join(", "));
    }
    out.push('\n');
    out
}

pub fn print_path(path: &PathExpr) -> String {
    let mut out = String::new();
    match &path.root {
        PathRoot::VersionSet(_) => {
            out.push_str("Version");
            if !path.root_filter.is_empty() {
                let _ = write!(out, "({})", print_filter(&path.root_filter));
            }
        }
        PathRoot::Iterator(name) => out.push_str(&name.name),
    }
    for step in &path.steps {
        out.push('.');
        out.push_str(step.kind.name());
        if step.kind.is_traversal() {
            match step.hops {
                Some(h) => {
                    let _ = write!(out, "({h})");
                }
                None => {
                    if step.explicit_parens {
                        out.push_str("()");
                    }
                }
            }
        } else if !step.filter.is_empty() {
            let _ = write!(out, "({})", print_filter(&step.filter));
        }
    }
    out
}

fn print_filter(filter: &[FilterCmp]) -> String {
    filter
        .iter()
        .map(|f| format!("{} {} {}", f.attr, f.op, print_literal(&f.value)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn print_literal(lit: &Literal) -> String {
    match lit {
        Literal::Int(i) => i.to_string(),
        Literal::Float(f) => format!("{f:?}"),
        Literal::Str(s) => format!("{:?}", s),
        Literal::Bool(b) => b.to_string(),
    }
}

pub fn print_expr(expr: &Expr) -> String {
    print_prec(expr, 0)
}

// precedence levels: 0 or, 1 and, 2 not, 3 cmp, 4 add, 5 mul, 6 unary
fn print_prec(expr: &Expr, min: u8) -> String {
    let (text, prec) = match expr {
        Expr::Literal(lit, _) => (print_literal(lit), 7),
        Expr::Path(p) => (print_path(p), 7),
        Expr::UpRef(u) => {
            let mut s = format!("{}({})", u.kind.name(), u.iterator);
            for t in &u.trail {
                s.push('.');
                s.push_str(&t.name);
            }
            (s, 7)
        }
        Expr::Aggregate(a) => {
            let mut s = format!("{}({}", a.op_name(), print_expr(&a.argument));
            if !a.group_by.is_empty() {
                let names: Vec<&str> = a.group_by.iter().map(|g| g.name.as_str()).collect();
                let _ = write!(s, " group by {}", names.join(", "));
            }
            if let Some(w) = &a.inner_where {
                let _ = write!(s, " where {}", print_expr(w));
            }
            s.push(')');
            (s, 7)
        }
        Expr::Cmp { op, lhs, rhs, .. } => {
            (format!("{} {} {}", print_prec(lhs, 4), op, print_prec(rhs, 4)), 3)
        }
        Expr::And(l, r) => (format!("{} and {}", print_prec(l, 2), print_prec(r, 2)), 1),
        Expr::Or(l, r) => (format!("{} or {}", print_prec(l, 1), print_prec(r, 1)), 0),
        Expr::Not(e, _) => (format!("not {}", print_prec(e, 3)), 2),
        Expr::Arith { op, lhs, rhs, .. } => {
            let prec = match op {
                ArithOp::Add | ArithOp::Sub => 4,
                ArithOp::Mul | ArithOp::Div => 5,
            };
            // left-associative: the right child needs one level more
            (
                format!("{} {} {}", print_prec(lhs, prec), op, print_prec(rhs, prec + 1)),
                prec,
            )
        }
        Expr::Neg(e, _) => (format!("-{}", print_prec(e, 6)), 6),
        Expr::Abs(e, _) => (format!("abs({})", print_expr(e)), 7),
    };
    if prec < min {
        format!("({text})")
    } else {
        text
    }
}

// used by error messages
impl std::fmt::Display for Literal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_literal(self))
    }
}

/// Comparison operators are shared with core; re-exported for printing.
pub fn cmp_name(op: CmpOp) -> String {
    op.to_string()
}
