use std::collections::{BTreeSet, HashMap, HashSet};

use super::ast::*;
use super::{Diagnostic, DiagnosticKind, Span};
use crate::model::*;

struct Scope<'a> {
    units: HashMap<&'a str, &'a UnitDecl>,
    measures: HashMap<&'a str, MeasureType>,
}

/// Checks a parsed program and lowers it to a conceptual model plus its
/// single query.
pub fn validate(program: &Program) -> Result<(ConceptualModel, Query), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut scope = Scope { units: HashMap::new(), measures: HashMap::new() };
    let mut variables = Vec::new();

    for item in &program.items {
        if let Item::Unit(u) = item {
            scope.units.insert(&u.name.name, u);
        }
    }
    for item in &program.items {
        match item {
            Item::Unit(u) => {
                if let Some(c) = &u.cardinality {
                    if c.value < 1 {
                        diags.push(Diagnostic::new(
                            DiagnosticKind::InvalidCardinality,
                            c.span,
                            format!("unit `{}` must have cardinality of at least 1", u.name.name),
                        ));
                    }
                }
                variables.push(VariableDecl {
                    name: u.name.name.clone(),
                    kind: VariableKind::Unit { id_column: u.id_column.as_ref().map(|c| c.value.clone()) },
                    cardinality: u.cardinality.as_ref().map(|c| c.value),
                });
            }
            Item::Measure(m) => {
                let mtype = measure_type(m, &mut diags);
                if !scope.units.contains_key(m.owner.name.as_str()) {
                    diags.push(Diagnostic::new(
                        DiagnosticKind::UnknownUnit,
                        m.owner.span,
                        format!("measure `{}` names `{}` as its unit, but no such unit is declared", m.name.name, m.owner.name),
                    ));
                }
                scope.measures.insert(&m.name.name, mtype.clone());
                variables.push(VariableDecl {
                    name: m.name.name.clone(),
                    kind: VariableKind::Measure { owner: m.owner.name.clone(), mtype },
                    cardinality: m.cardinality.as_ref().map(|c| c.value),
                });
            }
            _ => {}
        }
    }

    let mut relationships = Vec::new();
    let mut seen_pairs: HashMap<(String, String), RelKind> = HashMap::new();
    for item in &program.items {
        let Item::Relationship(r) = item else { continue };
        let a_ok = check_measure(&scope, &r.first, &mut diags);
        let b_ok = check_measure(&scope, &r.second, &mut diags);
        if !(a_ok && b_ok) {
            continue;
        }
        if r.first.name == r.second.name {
            diags.push(Diagnostic::new(
                DiagnosticKind::SelfRelationship,
                r.span,
                format!("`{}` cannot be related to itself", r.first.name),
            ));
            continue;
        }
        if let Some(msg) = duplicate_of(&mut seen_pairs, r) {
            diags.push(Diagnostic::new(DiagnosticKind::DuplicateRelationship, r.span, msg));
            continue;
        }
        let when = r.when.as_ref().and_then(|c| comparison(&scope, c, &r.first, "when", &mut diags));
        let then = r.then.as_ref().and_then(|c| comparison(&scope, c, &r.second, "then", &mut diags));
        let (a, b) = (r.first.name.clone(), r.second.name.clone());
        let shape = match r.kind {
            RelKind::Causes => RelationshipShape::Causes { cause: a, effect: b },
            RelKind::Relates => RelationshipShape::Relates { a, b },
        };
        relationships.push(Relationship { shape, certainty: r.certainty, when, then });
    }

    let mut interactions = Vec::new();
    for item in &program.items {
        let Item::Interaction(i) = item else { continue };
        let mut names = Vec::new();
        let mut seen = HashSet::new();
        let mut ok = true;
        for v in &i.variables {
            ok &= check_measure(&scope, v, &mut diags);
            if !seen.insert(v.name.as_str()) {
                ok = false;
                diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateInteractionVariable,
                    v.span,
                    format!("`{}` is listed more than once in this interaction", v.name),
                ));
            } else {
                names.push(v.name.clone());
            }
        }
        if seen.len() < 2 {
            ok = false;
            diags.push(Diagnostic::new(
                DiagnosticKind::InteractionArity,
                i.span,
                "an interaction needs at least two distinct variables",
            ));
        }
        if ok {
            interactions.push(InteractionAnnotation { variables: names });
        }
    }

    let queries: Vec<&QueryDecl> = program
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Query(q) => Some(q),
            _ => None,
        })
        .collect();
    let query = match queries.as_slice() {
        [] => {
            let span = program.items.last().map(item_span).unwrap_or_default();
            diags.push(Diagnostic::new(
                DiagnosticKind::MissingQuery,
                Span { start: span.end, end: span.end, line: span.line.max(1), col: span.col.max(1) },
                "program has no `query ace(iv -> dv)` statement",
            ));
            None
        }
        [q] => check_query(&scope, q, &relationships, &mut diags),
        [_, rest @ ..] => {
            for q in rest {
                diags.push(Diagnostic::new(
                    DiagnosticKind::MultipleQueries,
                    q.span,
                    "only one query is allowed per program",
                ));
            }
            None
        }
    };

    if !diags.is_empty() {
        diags.sort_by_key(|d| (d.span.start, d.span.end));
        return Err(diags);
    }
    let model = ConceptualModel { variables, relationships, interactions };
    Ok((model, query.expect("query checked above")))
}

fn item_span(item: &Item) -> Span {
    match item {
        Item::Unit(u) => u.span,
        Item::Measure(m) => m.span,
        Item::Relationship(r) => r.span,
        Item::Interaction(i) => i.span,
        Item::Query(q) => q.span,
    }
}

fn measure_type(m: &MeasureDecl, diags: &mut Vec<Diagnostic>) -> MeasureType {
    match &m.mtype.value {
        TypeExpr::Continuous => {
            check_min_cardinality(m, 1, diags);
            MeasureType::continuous()
        }
        TypeExpr::Counts => {
            check_min_cardinality(m, 1, diags);
            MeasureType::counts()
        }
        TypeExpr::Categories { levels, ordered, condition } => {
            check_min_cardinality(m, 2, diags);
            let mut seen = BTreeSet::new();
            for l in levels {
                if !seen.insert(l.value.as_str()) {
                    diags.push(Diagnostic::new(
                        DiagnosticKind::DuplicateLevel,
                        l.span,
                        format!("level {:?} appears more than once", l.value),
                    ));
                }
            }
            let levels: Vec<String> = levels.iter().map(|l| l.value.clone()).collect();
            let kind = if *ordered {
                MeasureKind::OrderedCategories { levels }
            } else {
                MeasureKind::UnorderedCategories { levels }
            };
            MeasureType { kind, is_condition: *condition }
        }
    }
}

fn check_min_cardinality(m: &MeasureDecl, min: u64, diags: &mut Vec<Diagnostic>) {
    if let Some(c) = &m.cardinality {
        if c.value < min {
            diags.push(Diagnostic::new(
                DiagnosticKind::InvalidCardinality,
                c.span,
                format!("measure `{}` must have cardinality of at least {min}", m.name.name),
            ));
        }
    }
}

fn check_measure(scope: &Scope<'_>, id: &Ident, diags: &mut Vec<Diagnostic>) -> bool {
    if scope.measures.contains_key(id.name.as_str()) {
        return true;
    }
    let msg = if scope.units.contains_key(id.name.as_str()) {
        format!("`{}` is a unit; only measures can appear here", id.name)
    } else {
        format!("unknown variable `{}`", id.name)
    };
    diags.push(Diagnostic::new(DiagnosticKind::UnknownVariable, id.span, msg));
    false
}

fn duplicate_of(seen: &mut HashMap<(String, String), RelKind>, r: &RelDecl) -> Option<String> {
    let (a, b) = (r.first.name.clone(), r.second.name.clone());
    let unordered = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
    let forward = seen.get(&(a.clone(), b.clone())).copied();
    let backward = seen.get(&(b.clone(), a.clone())).copied();
    let clash = match r.kind {
        RelKind::Causes => match (forward, backward) {
            (Some(RelKind::Causes), _) => Some(format!("`{a}` is already declared to cause `{b}`")),
            (Some(RelKind::Relates), _) | (_, Some(RelKind::Relates)) => {
                Some(format!("`{a}` and `{b}` already have a `relates` relationship"))
            }
            _ => None,
        },
        RelKind::Relates => match (forward, backward) {
            (None, None) => None,
            _ => Some(format!("`{a}` and `{b}` are already related")),
        },
    };
    if clash.is_some() {
        return clash;
    }
    match r.kind {
        RelKind::Causes => {
            seen.insert((a, b), RelKind::Causes);
        }
        RelKind::Relates => {
            seen.insert(unordered.clone(), RelKind::Relates);
            seen.insert((unordered.1, unordered.0), RelKind::Relates);
        }
    }
    None
}

fn comparison(
    scope: &Scope<'_>,
    c: &CmpExpr,
    expected: &Ident,
    clause: &str,
    diags: &mut Vec<Diagnostic>,
) -> Option<Comparison> {
    if c.variable.name != expected.name {
        diags.push(Diagnostic::new(
            DiagnosticKind::ComparisonVariableMismatch,
            c.variable.span,
            format!("`{clause}` must describe `{}`, not `{}`", expected.name, c.variable.name),
        ));
        return None;
    }
    let mtype = scope.measures.get(c.variable.name.as_str())?;
    let mismatch = |diags: &mut Vec<Diagnostic>, span: Span, msg: String| {
        diags.push(Diagnostic::new(DiagnosticKind::ComparisonTypeMismatch, span, msg));
        None
    };
    let op = match &c.op {
        CmpOpExpr::Increases | CmpOpExpr::Decreases => {
            if !mtype.is_ordinal() {
                let word = if c.op == CmpOpExpr::Increases { "increases" } else { "decreases" };
                return mismatch(
                    diags,
                    c.span,
                    format!("`{word}` needs an ordered measure, but `{}` has unordered categories", c.variable.name),
                );
            }
            if c.op == CmpOpExpr::Increases {
                ComparisonOp::Increases
            } else {
                ComparisonOp::Decreases
            }
        }
        CmpOpExpr::Equals(lit) | CmpOpExpr::NotEquals(lit) => {
            let value = match (mtype.levels(), &lit.value) {
                (Some(levels), Literal::Str(s)) => {
                    if !levels.contains(s) {
                        return mismatch(
                            diags,
                            lit.span,
                            format!("{s:?} is not a declared level of `{}`", c.variable.name),
                        );
                    }
                    Value::Text(s.clone())
                }
                (Some(_), Literal::Num(n)) => {
                    return mismatch(
                        diags,
                        lit.span,
                        format!("`{}` is categorical; compare it with a quoted level, not {n}", c.variable.name),
                    )
                }
                (None, Literal::Num(n)) => Value::Number(n.parse().expect("lexer only produces numeric lexemes")),
                (None, Literal::Str(s)) => {
                    return mismatch(
                        diags,
                        lit.span,
                        format!("`{}` is {}; compare it with a number, not {s:?}", c.variable.name, mtype.describe()),
                    )
                }
            };
            if matches!(c.op, CmpOpExpr::Equals(_)) {
                ComparisonOp::Equals(value)
            } else {
                ComparisonOp::NotEquals(value)
            }
        }
    };
    Some(Comparison { variable: c.variable.name.clone(), op })
}

fn check_query(
    scope: &Scope<'_>,
    q: &QueryDecl,
    relationships: &[Relationship],
    diags: &mut Vec<Diagnostic>,
) -> Option<Query> {
    let iv_ok = check_measure(scope, &q.iv, diags);
    let dv_ok = check_measure(scope, &q.dv, diags);
    if !(iv_ok && dv_ok) {
        return None;
    }
    if q.iv.name == q.dv.name {
        diags.push(Diagnostic::new(
            DiagnosticKind::SelfRelationship,
            q.span,
            "the query's independent and dependent variables must differ",
        ));
        return None;
    }
    let related = relationships.iter().any(|r| {
        let (a, b) = r.shape.endpoints();
        (a == q.iv.name && b == q.dv.name) || (a == q.dv.name && b == q.iv.name)
    });
    if !related {
        diags.push(Diagnostic::new(
            DiagnosticKind::QueryWithoutRelationship,
            q.span,
            format!(
                "no relationship connects `{}` and `{}`; assume or hypothesize one before querying",
                q.iv.name, q.dv.name
            ),
        ));
        return None;
    }
    Some(Query { iv: q.iv.name.clone(), dv: q.dv.name.clone() })
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    const HEADER: &str = "unit p\nmeasure age = continuous(p)\nmeasure income = continuous(p)\n\
                          measure race = categories[\"a\", \"b\"](p)\nmeasure employment = counts(p)\n";

    fn check(body: &str) -> Result<(ConceptualModel, Query), Vec<Diagnostic>> {
        validate(&parse_program(&format!("{HEADER}{body}")).unwrap())
    }

    fn kinds(body: &str) -> Vec<DiagnosticKind> {
        check(body).unwrap_err().into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn valid_single_relationship() {
        let (cm, q) = check("assume causes(age, income)\nquery ace(age -> income)").unwrap();
        assert_eq!(cm.relationships.len(), 1);
        assert_eq!(q, Query { iv: "age".into(), dv: "income".into() });
        assert_eq!(cm.measures().count(), 4);
    }

    #[test]
    fn increases_on_nominal_is_rejected() {
        let ks = kinds("assume causes(race, income, when = race increases)\nquery ace(race -> income)");
        assert_eq!(ks, vec![DiagnosticKind::ComparisonTypeMismatch]);
    }

    #[test]
    fn equals_on_nominal_needs_declared_level() {
        check("assume causes(race, income, when = race == \"a\", then = income increases)\nquery ace(race -> income)")
            .unwrap();
        assert_eq!(
            kinds("assume causes(race, income, when = race == \"z\")\nquery ace(race -> income)"),
            vec![DiagnosticKind::ComparisonTypeMismatch]
        );
        assert_eq!(
            kinds("assume causes(age, income, when = age == \"old\")\nquery ace(age -> income)"),
            vec![DiagnosticKind::ComparisonTypeMismatch]
        );
    }

    #[test]
    fn comparison_must_name_its_endpoint() {
        assert_eq!(
            kinds("assume causes(age, income, when = income increases)\nquery ace(age -> income)"),
            vec![DiagnosticKind::ComparisonVariableMismatch]
        );
    }

    #[test]
    fn query_without_relationship() {
        assert_eq!(
            kinds("assume causes(age, income)\nquery ace(employment -> income)"),
            vec![DiagnosticKind::QueryWithoutRelationship]
        );
    }

    #[test]
    fn missing_and_multiple_queries() {
        assert_eq!(kinds("assume causes(age, income)"), vec![DiagnosticKind::MissingQuery]);
        assert_eq!(
            kinds("assume causes(age, income)\nquery ace(age -> income)\nquery ace(age -> income)"),
            vec![DiagnosticKind::MultipleQueries]
        );
        let empty = validate(&parse_program("").unwrap()).unwrap_err();
        assert_eq!(empty[0].kind, DiagnosticKind::MissingQuery);
    }

    #[test]
    fn unknown_unit_points_at_owner() {
        let src = "measure income = continuous(participant)";
        let diags = validate(&parse_program(src).unwrap()).unwrap_err();
        assert_eq!(diags[0].kind, DiagnosticKind::UnknownUnit);
        let at = src.find("participant").unwrap();
        assert_eq!((diags[0].span.start, diags[0].span.end), (at, at + "participant".len()));
    }

    #[test]
    fn self_and_duplicate_relationships() {
        assert_eq!(
            kinds("assume causes(age, age)\nassume causes(age, income)\nquery ace(age -> income)"),
            vec![DiagnosticKind::SelfRelationship]
        );
        assert_eq!(
            kinds("assume causes(age, income)\nhypothesize causes(age, income)\nquery ace(age -> income)"),
            vec![DiagnosticKind::DuplicateRelationship]
        );
        assert_eq!(
            kinds("assume relates(age, income)\nhypothesize relates(income, age)\nquery ace(age -> income)"),
            vec![DiagnosticKind::DuplicateRelationship]
        );
        assert_eq!(
            kinds("assume causes(age, income)\nhypothesize relates(income, age)\nquery ace(age -> income)"),
            vec![DiagnosticKind::DuplicateRelationship]
        );
        // Opposed causes are a cycle, not a duplicate.
        check("assume causes(age, income)\nhypothesize causes(income, age)\nquery ace(age -> income)").unwrap();
    }

    #[test]
    fn interaction_checks() {
        assert_eq!(
            kinds("assume causes(age, income)\ninteracts(age)\nquery ace(age -> income)"),
            vec![DiagnosticKind::InteractionArity]
        );
        assert_eq!(
            kinds("assume causes(age, income)\ninteracts(age, nope)\nquery ace(age -> income)"),
            vec![DiagnosticKind::UnknownVariable]
        );
        let ks = kinds("assume causes(age, income)\ninteracts(age, age)\nquery ace(age -> income)");
        assert_eq!(ks, vec![DiagnosticKind::InteractionArity, DiagnosticKind::DuplicateInteractionVariable]);
    }

    #[test]
    fn units_cannot_be_related() {
        assert_eq!(
            kinds("assume causes(p, income)\nassume causes(age, income)\nquery ace(age -> income)"),
            vec![DiagnosticKind::UnknownVariable]
        );
    }

    #[test]
    fn cardinality_bounds() {
        let src = "unit p cardinality = 0\nmeasure c = categories[\"x\"](p, cardinality = 1)\n";
        let ks: Vec<_> = validate(&parse_program(src).unwrap()).unwrap_err().into_iter().map(|d| d.kind).collect();
        assert_eq!(
            ks,
            vec![DiagnosticKind::InvalidCardinality, DiagnosticKind::InvalidCardinality, DiagnosticKind::MissingQuery]
        );
    }

    #[test]
    fn participant_and_condition_desugar() {
        let src = "participant s\nmeasure t = condition[\"a\", \"b\"](s)\nmeasure y = continuous(s)\n\
                   assume causes(t, y)\nquery ace(t -> y)";
        let (cm, _) = validate(&parse_program(src).unwrap()).unwrap();
        assert!(matches!(cm.variables[0].kind, VariableKind::Unit { .. }));
        let t = cm.measure_type("t").unwrap();
        assert!(t.is_condition);
        assert!(matches!(t.kind, MeasureKind::UnorderedCategories { .. }));
    }

    #[test]
    fn validation_is_deterministic() {
        let p = parse_program(&format!("{HEADER}assume causes(age, income)\nquery ace(age -> income)")).unwrap();
        assert_eq!(validate(&p).unwrap(), validate(&p).unwrap());
    }
}
