use super::{Diagnostic, DiagnosticKind, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(u64),
    /// Any numeric literal that is not a plain non-negative integer.
    Number(String),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Assign,
    EqEq,
    NotEq,
    Arrow,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Int(i) => format!("`{i}`"),
            TokenKind::Number(s) => format!("`{s}`"),
            TokenKind::Str(s) => format!("string {s:?}"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Assign => "`=`".into(),
            TokenKind::EqEq => "`==`".into(),
            TokenKind::NotEq => "`!=`".into(),
            TokenKind::Arrow => "`->`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: usize, line: u32, col: u32) -> Span {
        Span { start, end: self.pos, line, col }
    }
}

/// Splits source text into tokens. Lexing keeps going after an error so a
/// single run reports every bad character.
pub fn tokenize(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    while let Some(c) = cur.peek() {
        let (start, line, col) = (cur.pos, cur.line, cur.col);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            Some(TokenKind::Ident(src[start..cur.pos].to_string()))
        } else if c.is_ascii_digit() || (c == '-' && matches!(cur.peek2(), Some(d) if d.is_ascii_digit())) {
            lex_number(&mut cur, start, line, col, &mut diags)
        } else if c == '"' {
            lex_string(&mut cur, start, line, col, &mut diags)
        } else {
            cur.bump();
            match c {
                '(' => Some(TokenKind::LParen),
                ')' => Some(TokenKind::RParen),
                '[' => Some(TokenKind::LBracket),
                ']' => Some(TokenKind::RBracket),
                ',' => Some(TokenKind::Comma),
                '=' if cur.peek() == Some('=') => {
                    cur.bump();
                    Some(TokenKind::EqEq)
                }
                '=' => Some(TokenKind::Assign),
                '!' if cur.peek() == Some('=') => {
                    cur.bump();
                    Some(TokenKind::NotEq)
                }
                '-' if cur.peek() == Some('>') => {
                    cur.bump();
                    Some(TokenKind::Arrow)
                }
                other => {
                    diags.push(Diagnostic::new(
                        DiagnosticKind::UnexpectedToken,
                        cur.span_from(start, line, col),
                        format!("unexpected character {other:?}"),
                    ));
                    None
                }
            }
        };
        if let Some(kind) = kind {
            tokens.push(Token { kind, span: cur.span_from(start, line, col) });
        }
    }
    (tokens, diags)
}

fn lex_number(cur: &mut Cursor<'_>, start: usize, line: u32, col: u32, diags: &mut Vec<Diagnostic>) -> Option<TokenKind> {
    if cur.peek() == Some('-') {
        cur.bump();
    }
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') && matches!(cur.peek2(), Some(d) if d.is_ascii_digit()) {
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
    }
    let text = &cur.src[start..cur.pos];
    if text.starts_with('-') || text.contains('.') {
        return Some(TokenKind::Number(text.to_string()));
    }
    match text.parse::<u64>() {
        Ok(v) => Some(TokenKind::Int(v)),
        Err(_) => {
            diags.push(Diagnostic::new(
                DiagnosticKind::UnexpectedToken,
                cur.span_from(start, line, col),
                format!("integer literal `{text}` is too large"),
            ));
            None
        }
    }
}

fn lex_string(cur: &mut Cursor<'_>, start: usize, line: u32, col: u32, diags: &mut Vec<Diagnostic>) -> Option<TokenKind> {
    cur.bump();
    let mut value = String::new();
    loop {
        match cur.bump() {
            None | Some('\n') => {
                diags.push(Diagnostic::new(
                    DiagnosticKind::UnterminatedString,
                    Span { start, end: cur.pos, line, col },
                    "unterminated string literal",
                ));
                return None;
            }
            Some('"') => return Some(TokenKind::Str(value)),
            Some('\\') => match cur.bump() {
                Some('"') => value.push('"'),
                Some('\\') => value.push('\\'),
                Some('n') => value.push('\n'),
                Some('t') => value.push('\t'),
                Some(other) => {
                    diags.push(Diagnostic::new(
                        DiagnosticKind::UnexpectedToken,
                        cur.span_from(start, line, col),
                        format!("unknown escape sequence `\\{other}`"),
                    ));
                    value.push(other);
                }
                None => {
                    diags.push(Diagnostic::new(
                        DiagnosticKind::UnterminatedString,
                        Span { start, end: cur.pos, line, col },
                        "unterminated string literal",
                    ));
                    return None;
                }
            },
            Some(c) => value.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        let (toks, diags) = tokenize(src);
        assert!(diags.is_empty(), "{diags:?}");
        toks.into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn arrow_versus_negative_number() {
        assert_eq!(
            kinds("a->b x == -2.5"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Arrow,
                TokenKind::Ident("b".into()),
                TokenKind::Ident("x".into()),
                TokenKind::EqEq,
                TokenKind::Number("-2.5".into()),
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(kinds("# hello\nunit p # trailing"), vec![TokenKind::Ident("unit".into()), TokenKind::Ident("p".into())]);
    }

    #[test]
    fn string_escapes() {
        assert_eq!(kinds(r#""a\"b""#), vec![TokenKind::Str("a\"b".into())]);
    }

    #[test]
    fn unterminated_string_reports_position() {
        let (_, diags) = tokenize("unit p\nmeasure x = categories[\"a");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::UnterminatedString);
        assert_eq!((diags[0].span.line, diags[0].span.col), (2, 24));
    }

    #[test]
    fn spans_track_lines_and_columns() {
        let (toks, _) = tokenize("unit\n  participant");
        assert_eq!((toks[1].span.line, toks[1].span.col), (2, 3));
        assert_eq!(toks[1].span.start, 7);
    }
}
