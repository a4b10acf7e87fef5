//! Program rewrite used by the aggregate-coherence check: every plain
//! aggregate is replaced by its `_all` twin grouped explicitly by the
//! argument's ancestor iterator chain. Results must be unchanged.

use vquel_frontend::analysis::ProgramInfo;
use vquel_frontend::ast::*;

pub fn plain_aggregates_to_all_twins(program: &Program) -> Program {
    let info = ProgramInfo::build(&program.statements);
    let mut out = program.clone();
    for stmt in &mut out.statements {
        if let Statement::Retrieve(r) = stmt {
            for target in &mut r.targets {
                rewrite(&mut target.expr, &info);
            }
            if let Some(w) = &mut r.where_clause {
                rewrite(w, &info);
            }
            for k in &mut r.sort_by {
                rewrite(&mut k.expr, &info);
            }
        }
    }
    out
}

fn rewrite(expr: &mut Expr, info: &ProgramInfo) {
    match expr {
        Expr::Aggregate(agg) => {
            if !agg.all {
                let chain = info.implicit_group(&agg.argument);
                agg.all = true;
                agg.group_by = chain
                    .into_iter()
                    .map(|name| Ident::new(name, Span::default()))
                    .collect();
            }
        }
        Expr::Cmp { lhs, rhs, .. } | Expr::Arith { lhs, rhs, .. } => {
            rewrite(lhs, info);
            rewrite(rhs, info);
        }
        Expr::And(l, r) | Expr::Or(l, r) => {
            rewrite(l, info);
            rewrite(r, info);
        }
        Expr::Not(e, _) | Expr::Neg(e, _) | Expr::Abs(e, _) => rewrite(e, info),
        Expr::Literal(..) | Expr::Path(_) | Expr::UpRef(_) => {}
    }
}
