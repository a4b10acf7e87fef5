//! Parser, desugarer, and validator behavior on representative programs.

use vquel_frontend::ast::*;
use vquel_frontend::printer::print_program;
use vquel_frontend::{desugar, parse, reject_reserved_names, validate, Severity};

fn assert_valid(program: &Program) {
    let errors: Vec<_> = validate(program)
        .into_iter()
        .filter(|i| i.severity == Severity::Error)
        .collect();
    assert!(errors.is_empty(), "unexpected validation errors: {errors:?}");
}

#[test]
fn query_1_shape() {
    let program = parse("range of V is Version\nretrieve V.author.name\nwhere V.id = \"v01\"").unwrap();
    assert_eq!(program.statements.len(), 2);
    let Statement::Range(range) = &program.statements[0] else { panic!("expected range") };
    assert_eq!(range.iterator.name, "V");
    assert!(matches!(range.source.root, PathRoot::VersionSet(_)));
    assert!(range.source.steps.is_empty());
    let Statement::Retrieve(ret) = &program.statements[1] else { panic!("expected retrieve") };
    assert_eq!(ret.targets.len(), 1);
    let Expr::Path(path) = &ret.targets[0].expr else { panic!("expected path target") };
    assert_eq!(path.root.iterator_name(), Some("V"));
    assert_eq!(path.steps.len(), 2);
    assert_eq!(path.steps[0].kind, StepKind::Author);
    assert_eq!(path.steps[1].kind, StepKind::Field("name".into()));
    assert!(ret.where_clause.is_some());
    assert_valid(&program);
}

#[test]
fn inline_filters_parse_on_root_and_steps() {
    let program = parse(
        "range of E1 is Version(id = \"v01\").Relations(name = \"Employee\").Tuples\nretrieve E1.all",
    )
    .unwrap();
    let Statement::Range(range) = &program.statements[0] else { panic!() };
    assert_eq!(range.source.root_filter.len(), 1);
    assert_eq!(range.source.root_filter[0].attr.name, "id");
    assert_eq!(range.source.steps[0].kind, StepKind::Relations);
    assert_eq!(range.source.steps[0].filter[0].attr.name, "name");
    assert_eq!(range.source.steps[1].kind, StepKind::Tuples);
    assert_valid(&program);
}

#[test]
fn retrieve_without_valid_source_is_an_error() {
    assert!(parse("retrieve").is_err());
    let program = parse("retrieve X.id").unwrap();
    let issues = validate(&program);
    assert!(issues.iter().any(|i| i.message.contains("not declared")));
}

#[test]
fn parse_error_carries_position() {
    let err = parse("range of V Version").unwrap_err();
    assert!(err.message.contains("expected `is`"), "{err}");
    assert_eq!(err.span.line, 1);
    assert_eq!(err.span.col, 12);
}

#[test]
fn traversal_steps_and_hops() {
    let program = parse(
        "range of V is Version\nrange of P is V.P()\nrange of D is V.D(2)\nrange of N is V.N(1)\nretrieve P.id, D.id, N.id",
    )
    .unwrap();
    let Statement::Range(p) = &program.statements[1] else { panic!() };
    assert_eq!(p.source.steps[0].kind, StepKind::Ancestors);
    assert_eq!(p.source.steps[0].hops, None);
    let Statement::Range(d) = &program.statements[2] else { panic!() };
    assert_eq!(d.source.steps[0].hops, Some(2));
    assert_valid(&program);

    let missing = parse("range of V is Version\nrange of N is V.N()\nretrieve N.id").unwrap();
    assert!(validate(&missing).iter().any(|i| i.message.contains("N requires a hop count")));
}

#[test]
fn aggregate_parse_with_group_by_and_where() {
    let program = parse(
        "range of V is Version\nrange of R is V.Relations\nrange of E is R.Tuples\n\
         retrieve V.commit_id\nwhere count_all(E.employee_id group by R, V where E.last_name = \"Smith\") = 100",
    )
    .unwrap();
    let Statement::Retrieve(ret) = &program.statements[3] else { panic!() };
    let Some(Expr::Cmp { lhs, .. }) = &ret.where_clause else { panic!() };
    let Expr::Aggregate(agg) = lhs.as_ref() else { panic!("expected aggregate") };
    assert_eq!(agg.kind, AggKind::Count);
    assert!(agg.all);
    assert_eq!(agg.group_by.len(), 2);
    assert!(agg.inner_where.is_some());
    assert_valid(&program);
}

#[test]
fn upref_vs_filtered_root() {
    let program = parse(
        "range of V is Version\nrange of S is V.Relations(name = \"S\").Tuples\nretrieve Version(S).id",
    )
    .unwrap();
    let Statement::Retrieve(ret) = &program.statements[2] else { panic!() };
    let Expr::UpRef(u) = &ret.targets[0].expr else { panic!("expected upref") };
    assert_eq!(u.kind, UpRefKind::Version);
    assert_eq!(u.trail[0].name, "id");
    assert_valid(&program);

    // Version(id = "x") in expression position parses as a filtered root
    let program = parse("retrieve count(Version(id = \"x\").Relations.Tuples)").unwrap();
    let Statement::Retrieve(ret) = &program.statements[0] else { panic!() };
    let Expr::Aggregate(agg) = &ret.targets[0].expr else { panic!() };
    let Expr::Path(p) = &agg.argument else { panic!() };
    assert!(matches!(p.root, PathRoot::VersionSet(_)));
    assert_eq!(p.root_filter.len(), 1);
}

#[test]
fn desugar_root_filter_to_retrieve_into() {
    // the (a1) shorthand becomes the (b1) form with a fresh iterator
    let program = parse("range of V is Version(id = \"v01\")\nretrieve V.id").unwrap();
    let desugared = desugar(&program);
    assert_eq!(desugared.statements.len(), 3);
    let Statement::Range(aux) = &desugared.statements[0] else { panic!() };
    assert!(aux.iterator.name.starts_with("__g"));
    assert!(matches!(aux.source.root, PathRoot::VersionSet(_)));
    assert!(aux.source.root_filter.is_empty());
    let Statement::Retrieve(into) = &desugared.statements[1] else { panic!() };
    assert_eq!(into.into.as_ref().unwrap().name, "V");
    assert_eq!(into.targets.len(), 1);
    let Expr::Path(p) = &into.targets[0].expr else { panic!() };
    assert_eq!(p.root.iterator_name(), Some(aux.iterator.name.as_str()));
    assert_eq!(p.steps[0].kind, StepKind::All);
    let Some(Expr::Cmp { op, lhs, rhs, .. }) = &into.where_clause else { panic!() };
    assert_eq!(*op, CmpOp::Eq);
    let Expr::Path(l) = lhs.as_ref() else { panic!() };
    assert_eq!(l.root.iterator_name(), Some(aux.iterator.name.as_str()));
    assert_eq!(l.steps[0].kind, StepKind::Field("id".into()));
    assert!(matches!(rhs.as_ref(), Expr::Literal(Literal::Str(s), _) if s == "v01"));
    assert_valid(&desugared);
}

#[test]
fn desugar_iterator_rooted_filter_keeps_correlation() {
    let program = parse(
        "range of V is Version\nrange of E is V.Relations(name = \"Employee\").Tuples\nretrieve E.all",
    )
    .unwrap();
    let desugared = desugar(&program);
    // V, fresh over V.Relations, E over fresh.Tuples, retrieve with conjunct
    assert_eq!(desugared.statements.len(), 4);
    let Statement::Range(mid) = &desugared.statements[1] else { panic!() };
    assert!(mid.iterator.name.starts_with("__g"));
    assert_eq!(mid.source.root.iterator_name(), Some("V"));
    assert!(mid.source.steps[0].filter.is_empty());
    let Statement::Range(e) = &desugared.statements[2] else { panic!() };
    assert_eq!(e.iterator.name, "E");
    assert_eq!(e.source.root.iterator_name(), Some(mid.iterator.name.as_str()));
    let Statement::Retrieve(ret) = &desugared.statements[3] else { panic!() };
    let Some(Expr::Cmp { lhs, .. }) = &ret.where_clause else {
        panic!("filter conjunct must join the retrieve: {ret:?}")
    };
    let Expr::Path(p) = lhs.as_ref() else { panic!() };
    assert_eq!(p.root.iterator_name(), Some(mid.iterator.name.as_str()));
    assert_valid(&desugared);
}

#[test]
fn desugar_pushes_filters_into_aggregates() {
    let program = parse(
        "range of V is Version\nrange of E is V.Relations(name = \"Employee\").Tuples\n\
         retrieve V.id\nwhere count(E.employee_id where E.last_name = \"Smith\") = 100",
    )
    .unwrap();
    let desugared = desugar(&program);
    let Statement::Retrieve(ret) = desugared.statements.last().unwrap() else { panic!() };
    // outer where must NOT gain the conjunct (E appears only in the aggregate)
    let Some(Expr::Cmp { lhs, .. }) = &ret.where_clause else { panic!("{ret:?}") };
    let Expr::Aggregate(agg) = lhs.as_ref() else { panic!() };
    // the aggregate's inner where gains the relation-name conjunct
    let inner = agg.inner_where.as_ref().unwrap();
    let printed = vquel_frontend::printer::print_expr(inner);
    assert!(printed.contains("last_name = \"Smith\""), "{printed}");
    assert!(printed.contains(".name = \"Employee\""), "{printed}");
    assert_valid(&desugared);
}

#[test]
fn desugar_is_idempotent_and_fixed_point_without_filters() {
    let plain = parse("range of V is Version\nretrieve V.id\nwhere V.id = \"x\"").unwrap();
    assert_eq!(desugar(&plain), plain);

    let sugared = parse(
        "range of E is Version(id = \"v01\").Relations(name = \"S\").Tuples\nrange of P is E.parents\nretrieve E.id, P.id",
    )
    .unwrap();
    let once = desugar(&sugared);
    let twice = desugar(&once);
    assert_eq!(once, twice);
    assert_valid(&once);
}

#[test]
fn group_by_must_name_ancestors() {
    // grouping by the aggregated iterator itself is rejected
    let program = parse(
        "range of V is Version\nrange of R is V.Relations\nrange of E is R.Tuples\n\
         retrieve V.id\nwhere count_all(E.age group by E) = 1",
    )
    .unwrap();
    let issues = validate(&program);
    assert_eq!(
        issues.iter().filter(|i| i.message.contains("group by")).count(),
        1,
        "{issues:?}"
    );

    // grouping by the path root of a set argument is fine
    let ok = parse(
        "range of V is Version\nrange of R is V.Relations\nrange of T is R.Tuples\n\
         retrieve V.id\nwhere count_all(T group by V) = 100",
    )
    .unwrap();
    assert_valid(&ok);
}

#[test]
fn reserved_prefix_rejected_in_user_programs() {
    let program = parse("range of __g1 is Version\nretrieve __g1.id").unwrap();
    let issues = reject_reserved_names(&program);
    assert_eq!(issues.len(), 1);
    // but the desugarer's own output passes the ordinary validator
    assert_valid(&desugar(&program));
}

#[test]
fn validator_rejects_misapplied_steps() {
    let tuples_on_version = parse("range of V is Version\nrange of T is V.Tuples\nretrieve T.all").unwrap();
    assert!(validate(&tuples_on_version)
        .iter()
        .any(|i| i.message.contains("does not apply")));

    let traversal_on_record = parse(
        "range of V is Version\nrange of R is V.Relations\nrange of T is R.Tuples\nrange of P is T.P(1)\nretrieve P.id",
    )
    .unwrap();
    assert!(validate(&traversal_on_record)
        .iter()
        .any(|i| i.message.contains("does not apply")));

    let dup = parse("range of V is Version\nrange of V is Version\nretrieve V.id").unwrap();
    assert!(validate(&dup).iter().any(|i| i.message.contains("more than once")));
}

#[test]
fn aggregates_are_rejected_in_sort_by() {
    let program = parse(
        "range of V is Version\nrange of R is V.Relations\nretrieve V.id, count(R)\nsort by count(R)",
    )
    .unwrap();
    assert!(validate(&program)
        .iter()
        .any(|i| i.message.contains("not allowed in sort by")));
}

#[test]
fn aggregate_names_stay_usable_as_field_names() {
    // `count` is an operator only in call position; as an attribute it is
    // an ordinary field
    let program = parse(
        "range of V is Version\nrange of R is V.Relations\nrange of E is R.Tuples\nretrieve E.count\nwhere E.count > 2",
    )
    .unwrap();
    let Statement::Retrieve(ret) = &program.statements[3] else { panic!() };
    let Expr::Path(p) = &ret.targets[0].expr else { panic!() };
    assert_eq!(p.steps[0].kind, StepKind::Field("count".into()));
    assert_valid(&program);
}

#[test]
fn sort_on_non_target_is_a_warning() {
    let program = parse(
        "range of V is Version\nretrieve V.id\nsort by V.creation_ts desc",
    )
    .unwrap();
    let issues = validate(&program);
    assert!(issues.iter().all(|i| i.severity == Severity::Warning));
    assert_eq!(issues.len(), 1);
}

#[test]
fn print_parse_round_trip() {
    let sources = [
        "range of V is Version\nretrieve V.author.name\nwhere V.id = \"v01\"",
        "range of V is Version\nrange of R is V.Relations\nretrieve V.creation_ts, V.author.name, V.commit_message\nwhere R.name = \"Employee\" and R.changed = true\nsort by V.creation_ts desc",
        "range of V is Version\nrange of E is V.Relations(name = \"Employee\").Tuples\nretrieve into T (V.id as id, count(E.id where E.age > 50) as c)\nretrieve T.id\nwhere T.c = max(T.c)",
        "range of V is Version\nrange of P is V.P(1)\nretrieve unique V.all\nwhere abs(count(V.Relations.Tuples) - count(P.Relations.Tuples)) > 100",
        "retrieve 1 + 2 * 3, -4.5, not (1 = 2) and 3 != 4",
    ];
    for src in sources {
        let ast = parse(src).unwrap();
        let printed = print_program(&ast);
        let reparsed = parse(&printed).unwrap_or_else(|e| panic!("reparse {printed:?}: {e}"));
        assert_eq!(ast, reparsed, "round trip failed for {src:?} -> {printed:?}");
        // and printing is a fixed point of print∘parse
        assert_eq!(print_program(&reparsed), printed);
    }
}

#[test]
fn multi_statement_programs_parse() {
    let program = parse(
        "range of V is Version\n\
         range of S is V.Relations(name = \"S\").Tuples\n\
         range of T is V.Relations(name = \"T\").Tuples\n\
         retrieve into Q(V.id as id,\n\
             count_all(S.id group by V where S.id = T.s_id and Version(S).id = Version(T).id) as c)\n\
         retrieve Q.id\n\
         where Q.c >= 100",
    )
    .unwrap();
    assert_eq!(program.statements.len(), 5);
    assert_valid(&program);
    let desugared = desugar(&program);
    assert_valid(&desugared);
}
