use super::{QueryError, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Bare identifiers keep their spelling; keywords are bare identifiers matched case-insensitively.
    Ident {
        text: String,
        quoted: bool,
    },
    Int(i64),
    Real(f64),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
    /// Source spelling, for error messages.
    pub text: String,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case(kw))
    }

    pub fn is_sym(&self, sym: &str) -> bool {
        matches!(self.tok, Tok::Sym(s) if s == sym)
    }
}

const SYMBOLS: [&str; 19] = ["<=", ">=", "<>", "!=", "||", "::", ",", "(", ")", ".", "*", "+", "-", "/", "=", "<", ">", ";", "%"];

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Cursor {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, token: String, message: &str) -> QueryError {
        QueryError::Syntax { line, column, token, message: message.to_owned() }
    }
}

pub(crate) fn tokenize(source: &str) -> Result<Vec<Token>> {
    let mut cur = Cursor { chars: source.chars().collect(), pos: 0, line: 1, column: 1 };
    let mut out = Vec::new();
    loop {
        while cur.peek(0).is_some_and(char::is_whitespace) {
            cur.bump();
        }
        let (line, column, start) = (cur.line, cur.column, cur.pos);
        let Some(c) = cur.peek(0) else {
            out.push(Token { tok: Tok::Eof, line, column, text: "end of input".to_owned() });
            return Ok(out);
        };
        let tok = match c {
            '-' if cur.peek(1) == Some('-') => {
                while cur.peek(0).is_some_and(|c| c != '\n') {
                    cur.bump();
                }
                continue;
            }
            '/' if cur.peek(1) == Some('*') => {
                cur.bump();
                cur.bump();
                loop {
                    match cur.peek(0) {
                        None => return Err(cur.error(line, column, "/*".into(), "unterminated comment")),
                        Some('*') if cur.peek(1) == Some('/') => {
                            cur.bump();
                            cur.bump();
                            break;
                        }
                        _ => {
                            cur.bump();
                        }
                    }
                }
                continue;
            }
            '\'' | '"' => {
                cur.bump();
                let mut text = String::new();
                loop {
                    match cur.bump() {
                        None => {
                            let what = if c == '"' { "unterminated quoted identifier" } else { "unterminated string literal" };
                            return Err(cur.error(line, column, c.to_string(), what));
                        }
                        Some(q) if q == c => {
                            if cur.peek(0) == Some(c) {
                                cur.bump();
                                text.push(c);
                            } else {
                                break;
                            }
                        }
                        Some(other) => text.push(other),
                    }
                }
                if c == '"' {
                    Tok::Ident { text, quoted: true }
                } else {
                    Tok::Str(text)
                }
            }
            c if c.is_ascii_digit() || (c == '.' && cur.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                let mut text = String::new();
                let mut real = false;
                while cur.peek(0).is_some_and(|d| d.is_ascii_digit()) {
                    text.push(cur.bump().unwrap());
                }
                if cur.peek(0) == Some('.') && cur.peek(1).is_none_or(|d| d.is_ascii_digit() || !d.is_alphabetic()) {
                    real = true;
                    text.push(cur.bump().unwrap());
                    while cur.peek(0).is_some_and(|d| d.is_ascii_digit()) {
                        text.push(cur.bump().unwrap());
                    }
                }
                if matches!(cur.peek(0), Some('e' | 'E')) {
                    let sign = usize::from(matches!(cur.peek(1), Some('+' | '-')));
                    if cur.peek(1 + sign).is_some_and(|d| d.is_ascii_digit()) {
                        real = true;
                        for _ in 0..=sign {
                            text.push(cur.bump().unwrap());
                        }
                        while cur.peek(0).is_some_and(|d| d.is_ascii_digit()) {
                            text.push(cur.bump().unwrap());
                        }
                    }
                }
                match text.parse::<i64>() {
                    Ok(i) if !real => Tok::Int(i),
                    _ => match text.parse::<f64>() {
                        Ok(r) => Tok::Real(r),
                        Err(_) => return Err(cur.error(line, column, text, "malformed number")),
                    },
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut text = String::new();
                while cur.peek(0).is_some_and(|d| d.is_alphanumeric() || d == '_' || d == '$') {
                    text.push(cur.bump().unwrap());
                }
                Tok::Ident { text, quoted: false }
            }
            _ => {
                let rest: String = cur.chars[cur.pos..].iter().take(2).collect();
                match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                    Some(sym) => {
                        for _ in 0..sym.len() {
                            cur.bump();
                        }
                        Tok::Sym(sym)
                    }
                    None => return Err(cur.error(line, column, c.to_string(), "unexpected character")),
                }
            }
        };
        let text: String = cur.chars[start..cur.pos].iter().collect();
        out.push(Token { tok, line, column, text });
    }
}
