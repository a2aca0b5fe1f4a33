use super::PddlError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Atom(String, Span),
    List(Vec<SExpr>, Span),
}

impl SExpr {
    pub fn span(&self) -> Span {
        match self {
            SExpr::Atom(_, s) | SExpr::List(_, s) => *s,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a, _) => Some(a),
            SExpr::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Atom(..) => None,
        }
    }
}

/// Reads exactly one top-level s-expression. `;` starts a line comment.
/// Atoms are lower-cased only if they are keywords (start with ':').
pub fn parse_sexpr(text: &str) -> Result<SExpr, PddlError> {
    let mut lexer = Lexer { chars: text.chars().collect(), pos: 0, line: 1, col: 1 };
    lexer.skip_trivia();
    if lexer.peek().is_none() {
        return Err(PddlError::syntax(lexer.span(), "empty document"));
    }
    let expr = lexer.expr()?;
    lexer.skip_trivia();
    if lexer.peek().is_some() {
        return Err(PddlError::syntax(lexer.span(), "trailing input after top-level expression"));
    }
    Ok(expr)
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    fn span(&self) -> Span {
        Span { line: self.line, col: self.col }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn expr(&mut self) -> Result<SExpr, PddlError> {
        let start = self.span();
        match self.peek() {
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(PddlError::syntax(start, "unclosed '('")),
                        Some(')') => {
                            self.bump();
                            return Ok(SExpr::List(items, start));
                        }
                        Some(_) => items.push(self.expr()?),
                    }
                }
            }
            Some(')') => Err(PddlError::syntax(start, "unexpected ')'")),
            Some(_) => {
                let mut atom = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    if !(c.is_alphanumeric() || "?-_:.".contains(c)) {
                        return Err(PddlError::syntax(self.span(), format!("unexpected character {c:?}")));
                    }
                    atom.push(c);
                    self.bump();
                }
                if atom.starts_with(':') {
                    atom = atom.to_ascii_lowercase();
                }
                Ok(SExpr::Atom(atom, start))
            }
            None => Err(PddlError::syntax(start, "unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_with_comments() {
        let e = parse_sexpr("; header\n(a (b c) ; tail\n d)").unwrap();
        let items = e.list().unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(items[1].list().unwrap()[1].atom(), Some("c"));
        assert_eq!(items[2].span(), Span { line: 3, col: 2 });
    }

    #[test]
    fn errors_carry_location() {
        let err = parse_sexpr("(a\n  (b c)").unwrap_err();
        assert_eq!((err.line, err.col), (1, 1));
        let err = parse_sexpr("(a)\n )").unwrap_err();
        assert_eq!((err.line, err.col), (2, 2));
        let err = parse_sexpr("(a #)").unwrap_err();
        assert_eq!((err.line, err.col), (1, 4));
    }
}
