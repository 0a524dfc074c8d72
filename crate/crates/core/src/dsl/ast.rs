//! Syntax tree for `.cms` programs. Every node keeps its source span.

use serde::Serialize;

use super::Span;
use crate::model::Certainty;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spanned<T> {
    pub value: T,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnitSugar {
    Unit,
    Participant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitDecl {
    pub sugar: UnitSugar,
    pub name: Ident,
    pub id_column: Option<Spanned<String>>,
    pub cardinality: Option<Spanned<u64>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TypeExpr {
    Continuous,
    Counts,
    /// `categories[...]` or, with `condition`, `condition[...]`.
    Categories { levels: Vec<Spanned<String>>, ordered: bool, condition: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureDecl {
    pub name: Ident,
    pub mtype: Spanned<TypeExpr>,
    pub owner: Ident,
    pub cardinality: Option<Spanned<u64>>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RelKind {
    Causes,
    Relates,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Literal {
    Str(String),
    /// Numeric lexeme as written, so printing reproduces it.
    Num(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CmpOpExpr {
    Increases,
    Decreases,
    Equals(Spanned<Literal>),
    NotEquals(Spanned<Literal>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmpExpr {
    pub variable: Ident,
    pub op: CmpOpExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelDecl {
    pub certainty: Certainty,
    pub kind: RelKind,
    pub first: Ident,
    pub second: Ident,
    pub when: Option<CmpExpr>,
    pub then: Option<CmpExpr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractDecl {
    pub variables: Vec<Ident>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryDecl {
    pub iv: Ident,
    pub dv: Ident,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Item {
    Unit(UnitDecl),
    Measure(MeasureDecl),
    Relationship(RelDecl),
    Interaction(InteractDecl),
    Query(QueryDecl),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Program {
    /// Copy of the tree with every span zeroed, for comparing structure
    /// independent of layout.
    pub fn without_spans(&self) -> Program {
        let mut p = self.clone();
        p.visit_spans(&mut |s| *s = Span::default());
        p
    }

    fn visit_spans(&mut self, f: &mut impl FnMut(&mut Span)) {
        fn ident(i: &mut Ident, f: &mut impl FnMut(&mut Span)) {
            f(&mut i.span);
        }
        fn cmp(c: &mut CmpExpr, f: &mut impl FnMut(&mut Span)) {
            f(&mut c.span);
            ident(&mut c.variable, f);
            match &mut c.op {
                CmpOpExpr::Equals(v) | CmpOpExpr::NotEquals(v) => f(&mut v.span),
                _ => {}
            }
        }
        for item in &mut self.items {
            match item {
                Item::Unit(u) => {
                    f(&mut u.span);
                    ident(&mut u.name, f);
                    if let Some(c) = &mut u.id_column {
                        f(&mut c.span);
                    }
                    if let Some(c) = &mut u.cardinality {
                        f(&mut c.span);
                    }
                }
                Item::Measure(m) => {
                    f(&mut m.span);
                    ident(&mut m.name, f);
                    ident(&mut m.owner, f);
                    f(&mut m.mtype.span);
                    if let TypeExpr::Categories { levels, .. } = &mut m.mtype.value {
                        for l in levels {
                            f(&mut l.span);
                        }
                    }
                    if let Some(c) = &mut m.cardinality {
                        f(&mut c.span);
                    }
                }
                Item::Relationship(r) => {
                    f(&mut r.span);
                    ident(&mut r.first, f);
                    ident(&mut r.second, f);
                    if let Some(c) = &mut r.when {
                        cmp(c, f);
                    }
                    if let Some(c) = &mut r.then {
                        cmp(c, f);
                    }
                }
                Item::Interaction(i) => {
                    f(&mut i.span);
                    for v in &mut i.variables {
                        ident(v, f);
                    }
                }
                Item::Query(q) => {
                    f(&mut q.span);
                    ident(&mut q.iv, f);
                    ident(&mut q.dv, f);
                }
            }
        }
    }
}
