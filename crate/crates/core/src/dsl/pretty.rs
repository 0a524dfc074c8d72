use std::fmt::Write;

use super::ast::*;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn literal(l: &Literal) -> String {
    match l {
        Literal::Str(s) => quote(s),
        Literal::Num(n) => n.clone(),
    }
}

fn comparison(c: &CmpExpr) -> String {
    let v = &c.variable.name;
    match &c.op {
        CmpOpExpr::Increases => format!("{v} increases"),
        CmpOpExpr::Decreases => format!("{v} decreases"),
        CmpOpExpr::Equals(l) => format!("{v} == {}", literal(&l.value)),
        CmpOpExpr::NotEquals(l) => format!("{v} != {}", literal(&l.value)),
    }
}

/// Renders a program in canonical layout: one statement per line, sugar
/// preserved.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for item in &program.items {
        match item {
            Item::Unit(u) => {
                out.push_str(match u.sugar {
                    UnitSugar::Unit => "unit ",
                    UnitSugar::Participant => "participant ",
                });
                out.push_str(&u.name.name);
                if let Some(c) = &u.id_column {
                    write!(out, " {}", quote(&c.value)).unwrap();
                }
                if let Some(c) = &u.cardinality {
                    write!(out, " cardinality = {}", c.value).unwrap();
                }
            }
            Item::Measure(m) => {
                write!(out, "measure {} = ", m.name.name).unwrap();
                match &m.mtype.value {
                    TypeExpr::Continuous => out.push_str("continuous"),
                    TypeExpr::Counts => out.push_str("counts"),
                    TypeExpr::Categories { levels, ordered, condition } => {
                        out.push_str(if *condition { "condition" } else { "categories" });
                        let levels: Vec<String> = levels.iter().map(|l| quote(&l.value)).collect();
                        write!(out, "[{}]", levels.join(", ")).unwrap();
                        if *ordered {
                            out.push_str(" ordered");
                        }
                    }
                }
                write!(out, "({}", m.owner.name).unwrap();
                if let Some(c) = &m.cardinality {
                    write!(out, ", cardinality = {}", c.value).unwrap();
                }
                out.push(')');
            }
            Item::Relationship(r) => {
                let kind = match r.kind {
                    RelKind::Causes => "causes",
                    RelKind::Relates => "relates",
                };
                write!(out, "{} {kind}({}, {}", r.certainty.keyword(), r.first.name, r.second.name).unwrap();
                if let Some(w) = &r.when {
                    write!(out, ", when = {}", comparison(w)).unwrap();
                }
                if let Some(t) = &r.then {
                    write!(out, ", then = {}", comparison(t)).unwrap();
                }
                out.push(')');
            }
            Item::Interaction(i) => {
                let names: Vec<&str> = i.variables.iter().map(|v| v.name.as_str()).collect();
                write!(out, "interacts({})", names.join(", ")).unwrap();
            }
            Item::Query(q) => {
                write!(out, "query ace({} -> {})", q.iv.name, q.dv.name).unwrap();
            }
        }
        out.push('\n');
    }
    out
}
