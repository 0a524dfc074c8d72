use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::{Diagnostic, DiagnosticKind, Span};
use crate::model::Certainty;

const STATEMENT_KEYWORDS: &[&str] = &["unit", "participant", "measure", "assume", "hypothesize", "interacts", "query"];

/// Parses a `.cms` program. Returns every diagnostic found rather than
/// stopping at the first; the tree is only returned when there are none.
pub fn parse_program(src: &str) -> Result<Program, Vec<Diagnostic>> {
    let (tokens, mut diags) = tokenize(src);
    let mut parser = Parser { tokens, pos: 0, eof: eof_span(src), diags: Vec::new(), declared: HashMap::new() };
    let program = parser.program();
    diags.extend(parser.diags);
    if diags.is_empty() {
        Ok(program)
    } else {
        diags.sort_by_key(|d| (d.span.start, d.span.end));
        Err(diags)
    }
}

fn eof_span(src: &str) -> Span {
    let line = 1 + src.matches('\n').count() as u32;
    let last_line = src.rsplit('\n').next().unwrap_or("");
    Span { start: src.len(), end: src.len(), line, col: 1 + last_line.chars().count() as u32 }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof: Span,
    diags: Vec<Diagnostic>,
    declared: HashMap<String, Span>,
}

/// Marker for "a diagnostic has been recorded, resynchronise".
struct Bail;

type PResult<T> = Result<T, Bail>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> Span {
        self.peek().map(|t| t.span).unwrap_or(self.eof)
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].span.end
        }
    }

    fn error<T>(&mut self, expected: &str) -> PResult<T> {
        let (span, found) = match self.peek() {
            Some(t) => (t.span, t.kind.describe()),
            None => (self.eof, "end of input".to_string()),
        };
        self.diags.push(Diagnostic::new(
            DiagnosticKind::UnexpectedToken,
            span,
            format!("expected {expected}, found {found}"),
        ));
        Err(Bail)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Span> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                let span = t.span;
                self.pos += 1;
                Ok(span)
            }
            _ => self.error(&kind.describe()),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Ident(s), .. }) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.at_keyword(kw) {
            let span = self.here();
            self.pos += 1;
            Ok(span)
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(name), span }) => {
                let id = Ident { name: name.clone(), span: *span };
                self.pos += 1;
                Ok(id)
            }
            _ => self.error("an identifier"),
        }
    }

    fn int(&mut self) -> PResult<Spanned<u64>> {
        match self.peek() {
            Some(Token { kind: TokenKind::Int(v), span }) => {
                let out = Spanned { value: *v, span: *span };
                self.pos += 1;
                Ok(out)
            }
            _ => self.error("an integer"),
        }
    }

    fn string(&mut self) -> PResult<Spanned<String>> {
        match self.peek() {
            Some(Token { kind: TokenKind::Str(s), span }) => {
                let out = Spanned { value: s.clone(), span: *span };
                self.pos += 1;
                Ok(out)
            }
            _ => self.error("a string"),
        }
    }

    fn span_from(&self, start: Span) -> Span {
        Span { start: start.start, end: self.prev_end(), line: start.line, col: start.col }
    }

    fn program(&mut self) -> Program {
        let mut items = Vec::new();
        while let Some(tok) = self.peek() {
            let start = self.pos;
            let result = match &tok.kind {
                TokenKind::Ident(kw) if STATEMENT_KEYWORDS.contains(&kw.as_str()) => self.item(),
                TokenKind::Ident(kw) => {
                    let msg = format!("unknown keyword `{kw}`; statements start with one of {}", STATEMENT_KEYWORDS.join(", "));
                    self.diags.push(Diagnostic::new(DiagnosticKind::UnknownKeyword, tok.span, msg));
                    Err(Bail)
                }
                _ => self.error("a statement"),
            };
            match result {
                Ok(item) => items.push(item),
                Err(Bail) => {
                    if self.pos == start {
                        self.pos += 1;
                    }
                    self.synchronize();
                }
            }
        }
        Program { items }
    }

    fn synchronize(&mut self) {
        while let Some(tok) = self.peek() {
            if let TokenKind::Ident(kw) = &tok.kind {
                if STATEMENT_KEYWORDS.contains(&kw.as_str()) {
                    return;
                }
            }
            self.pos += 1;
        }
    }

    fn item(&mut self) -> PResult<Item> {
        let start = self.here();
        let TokenKind::Ident(kw) = &self.peek().expect("caller checked").kind else { unreachable!() };
        let kw = kw.clone();
        self.pos += 1;
        match kw.as_str() {
            "unit" | "participant" => self.unit(kw == "participant", start).map(Item::Unit),
            "measure" => self.measure(start).map(Item::Measure),
            "assume" => self.relationship(Certainty::Assume, start).map(Item::Relationship),
            "hypothesize" => self.relationship(Certainty::Hypothesize, start).map(Item::Relationship),
            "interacts" => self.interacts(start).map(Item::Interaction),
            "query" => self.query(start).map(Item::Query),
            _ => unreachable!(),
        }
    }

    fn declare(&mut self, name: &Ident) {
        if let Some(first) = self.declared.get(&name.name) {
            let msg = format!(
                "`{}` is already declared at line {}, column {}",
                name.name, first.line, first.col
            );
            self.diags.push(Diagnostic::new(DiagnosticKind::DuplicateDeclaration, name.span, msg));
        } else {
            self.declared.insert(name.name.clone(), name.span);
        }
    }

    fn cardinality_clause(&mut self) -> PResult<Spanned<u64>> {
        self.expect_keyword("cardinality")?;
        self.expect(TokenKind::Assign)?;
        self.int()
    }

    fn unit(&mut self, participant: bool, start: Span) -> PResult<UnitDecl> {
        let name = self.ident()?;
        let id_column = match self.peek() {
            Some(Token { kind: TokenKind::Str(_), .. }) => Some(self.string()?),
            _ => None,
        };
        let cardinality = if self.at_keyword("cardinality") { Some(self.cardinality_clause()?) } else { None };
        self.declare(&name);
        Ok(UnitDecl {
            sugar: if participant { UnitSugar::Participant } else { UnitSugar::Unit },
            name,
            id_column,
            cardinality,
            span: self.span_from(start),
        })
    }

    fn measure(&mut self, start: Span) -> PResult<MeasureDecl> {
        let name = self.ident()?;
        self.expect(TokenKind::Assign)?;
        let mtype = self.type_expr()?;
        self.expect(TokenKind::LParen)?;
        let owner = self.ident()?;
        let cardinality = if self.eat(&TokenKind::Comma) { Some(self.cardinality_clause()?) } else { None };
        self.expect(TokenKind::RParen)?;
        self.declare(&name);
        Ok(MeasureDecl { name, mtype, owner, cardinality, span: self.span_from(start) })
    }

    fn type_expr(&mut self) -> PResult<Spanned<TypeExpr>> {
        let start = self.here();
        let value = if self.eat_keyword("continuous") {
            TypeExpr::Continuous
        } else if self.eat_keyword("counts") {
            TypeExpr::Counts
        } else if self.at_keyword("categories") || self.at_keyword("condition") {
            let condition = self.at_keyword("condition");
            self.pos += 1;
            self.expect(TokenKind::LBracket)?;
            let mut levels = vec![self.string()?];
            while self.eat(&TokenKind::Comma) {
                levels.push(self.string()?);
            }
            self.expect(TokenKind::RBracket)?;
            let ordered = self.eat_keyword("ordered");
            TypeExpr::Categories { levels, ordered, condition }
        } else {
            return self.error("a measure type (`continuous`, `counts`, `categories` or `condition`)");
        };
        Ok(Spanned { value, span: self.span_from(start) })
    }

    fn relationship(&mut self, certainty: Certainty, start: Span) -> PResult<RelDecl> {
        let kind = if self.eat_keyword("causes") {
            RelKind::Causes
        } else if self.eat_keyword("relates") {
            RelKind::Relates
        } else {
            return self.error("`causes` or `relates`");
        };
        self.expect(TokenKind::LParen)?;
        let first = self.ident()?;
        self.expect(TokenKind::Comma)?;
        let second = self.ident()?;
        let mut when = None;
        let mut then = None;
        if self.eat(&TokenKind::Comma) {
            if self.eat_keyword("when") {
                self.expect(TokenKind::Assign)?;
                when = Some(self.comparison()?);
                if self.eat(&TokenKind::Comma) {
                    self.expect_keyword("then")?;
                    self.expect(TokenKind::Assign)?;
                    then = Some(self.comparison()?);
                }
            } else if self.eat_keyword("then") {
                self.expect(TokenKind::Assign)?;
                then = Some(self.comparison()?);
            } else {
                return self.error("`when` or `then`");
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(RelDecl { certainty, kind, first, second, when, then, span: self.span_from(start) })
    }

    fn comparison(&mut self) -> PResult<CmpExpr> {
        let start = self.here();
        let variable = self.ident()?;
        let op = if self.eat_keyword("increases") {
            CmpOpExpr::Increases
        } else if self.eat_keyword("decreases") {
            CmpOpExpr::Decreases
        } else if self.eat(&TokenKind::EqEq) {
            CmpOpExpr::Equals(self.literal()?)
        } else if self.eat(&TokenKind::NotEq) {
            CmpOpExpr::NotEquals(self.literal()?)
        } else {
            return self.error("`increases`, `decreases`, `==` or `!=`");
        };
        Ok(CmpExpr { variable, op, span: self.span_from(start) })
    }

    fn literal(&mut self) -> PResult<Spanned<Literal>> {
        let out = match self.peek() {
            Some(Token { kind: TokenKind::Str(s), span }) => Spanned { value: Literal::Str(s.clone()), span: *span },
            Some(Token { kind: TokenKind::Int(i), span }) => Spanned { value: Literal::Num(i.to_string()), span: *span },
            Some(Token { kind: TokenKind::Number(n), span }) => Spanned { value: Literal::Num(n.clone()), span: *span },
            _ => return self.error("a string or number"),
        };
        self.pos += 1;
        Ok(out)
    }

    fn interacts(&mut self, start: Span) -> PResult<InteractDecl> {
        self.expect(TokenKind::LParen)?;
        let mut variables = vec![self.ident()?];
        while self.eat(&TokenKind::Comma) {
            variables.push(self.ident()?);
        }
        self.expect(TokenKind::RParen)?;
        Ok(InteractDecl { variables, span: self.span_from(start) })
    }

    fn query(&mut self, start: Span) -> PResult<QueryDecl> {
        self.expect_keyword("ace")?;
        self.expect(TokenKind::LParen)?;
        let iv = self.ident()?;
        self.expect(TokenKind::Arrow)?;
        let dv = self.ident()?;
        self.expect(TokenKind::RParen)?;
        Ok(QueryDecl { iv, dv, span: self.span_from(start) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<DiagnosticKind> {
        parse_program(src).unwrap_err().into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn minimal_program() {
        let p = parse_program("unit participant \"pid\"\nmeasure income = continuous(participant)").unwrap();
        assert_eq!(p.items.len(), 2);
        assert!(matches!(&p.items[0], Item::Unit(u) if u.id_column.as_ref().unwrap().value == "pid"));
        assert!(matches!(&p.items[1], Item::Measure(m) if m.mtype.value == TypeExpr::Continuous));
    }

    #[test]
    fn empty_program() {
        assert_eq!(parse_program("").unwrap(), Program::default());
        assert_eq!(parse_program("  # only a comment\n").unwrap(), Program::default());
    }

    #[test]
    fn full_relationship_syntax() {
        let src = r#"hypothesize relates(a, b, when = a == "x", then = b != -1.5)"#;
        let p = parse_program(src).unwrap();
        let Item::Relationship(r) = &p.items[0] else { panic!() };
        assert_eq!(r.kind, RelKind::Relates);
        assert!(matches!(&r.when.as_ref().unwrap().op, CmpOpExpr::Equals(l) if l.value == Literal::Str("x".into())));
        assert!(matches!(&r.then.as_ref().unwrap().op, CmpOpExpr::NotEquals(l) if l.value == Literal::Num("-1.5".into())));
        assert_eq!(r.span.end, src.len());
    }

    #[test]
    fn categories_and_conditions() {
        let p = parse_program(
            "participant p cardinality = 40\nmeasure t = condition[\"a\", \"b\"](p)\nmeasure e = categories[\"lo\", \"hi\"] ordered(p, cardinality = 2)",
        )
        .unwrap();
        let Item::Measure(m) = &p.items[1] else { panic!() };
        assert!(matches!(&m.mtype.value, TypeExpr::Categories { condition: true, ordered: false, .. }));
        let Item::Measure(m) = &p.items[2] else { panic!() };
        assert!(matches!(&m.mtype.value, TypeExpr::Categories { condition: false, ordered: true, .. }));
        assert_eq!(m.cardinality.as_ref().unwrap().value, 2);
    }

    #[test]
    fn duplicate_declaration() {
        let diags = parse_program("unit p\nmeasure x = continuous(p)\nmeasure x = counts(p)").unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::DuplicateDeclaration);
        assert_eq!(diags[0].span.line, 3);
    }

    #[test]
    fn unknown_keyword_and_recovery() {
        let diags = parse_program("unit p\nmesure x = continuous(p)\nquery ace(x y)").unwrap_err();
        let ks: Vec<_> = diags.iter().map(|d| d.kind).collect();
        assert_eq!(ks, vec![DiagnosticKind::UnknownKeyword, DiagnosticKind::UnexpectedToken]);
        assert_eq!(diags[1].span.line, 3);
    }

    #[test]
    fn unexpected_end_of_input() {
        assert_eq!(kinds("query ace(a ->"), vec![DiagnosticKind::UnexpectedToken]);
    }

    #[test]
    fn unterminated_string() {
        assert!(kinds("unit p \"pid").contains(&DiagnosticKind::UnterminatedString));
    }

    #[test]
    fn stray_symbols_are_reported() {
        assert_eq!(kinds("unit p\n) ) @"), vec![DiagnosticKind::UnexpectedToken, DiagnosticKind::UnexpectedToken]);
    }
}
