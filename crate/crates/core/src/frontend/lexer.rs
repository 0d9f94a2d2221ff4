//! Tokenizer for MiniOO source text.

use std::fmt;

use super::ast::Span;
use super::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Str(String),

    // keywords
    Class,
    New,
    Null,
    This,
    If,
    Else,
    While,
    Try,
    Catch,
    Finally,
    Using,
    Return,
    Throw,
    Var,
    True,
    False,
    Public,
    Private,
    Protected,
    Internal,
    Static,
    Readonly,
    Virtual,
    Override,
    Abstract,

    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    Colon,
    Assign,
    EqEq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,

    Eof,
}

impl TokenKind {
    fn keyword(word: &str) -> Option<TokenKind> {
        use TokenKind::*;
        Some(match word {
            "class" => Class,
            "new" => New,
            "null" => Null,
            "this" => This,
            "if" => If,
            "else" => Else,
            "while" => While,
            "try" => Try,
            "catch" => Catch,
            "finally" => Finally,
            "using" => Using,
            "return" => Return,
            "throw" => Throw,
            "var" => Var,
            "true" => True,
            "false" => False,
            "public" => Public,
            "private" => Private,
            "protected" => Protected,
            "internal" => Internal,
            "static" => Static,
            "readonly" => Readonly,
            "virtual" => Virtual,
            "override" => Override,
            "abstract" => Abstract,
            _ => return None,
        })
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TokenKind::*;
        let s = match self {
            Ident(name) => return write!(f, "identifier `{name}`"),
            Int(v) => return write!(f, "integer `{v}`"),
            Str(s) => return write!(f, "string {s:?}"),
            Class => "`class`",
            New => "`new`",
            Null => "`null`",
            This => "`this`",
            If => "`if`",
            Else => "`else`",
            While => "`while`",
            Try => "`try`",
            Catch => "`catch`",
            Finally => "`finally`",
            Using => "`using`",
            Return => "`return`",
            Throw => "`throw`",
            Var => "`var`",
            True => "`true`",
            False => "`false`",
            Public => "`public`",
            Private => "`private`",
            Protected => "`protected`",
            Internal => "`internal`",
            Static => "`static`",
            Readonly => "`readonly`",
            Virtual => "`virtual`",
            Override => "`override`",
            Abstract => "`abstract`",
            LBrace => "`{`",
            RBrace => "`}`",
            LParen => "`(`",
            RParen => "`)`",
            LBracket => "`[`",
            RBracket => "`]`",
            Semi => "`;`",
            Comma => "`,`",
            Dot => "`.`",
            Colon => "`:`",
            Assign => "`=`",
            EqEq => "`==`",
            Neq => "`!=`",
            Lt => "`<`",
            Gt => "`>`",
            Le => "`<=`",
            Ge => "`>=`",
            Plus => "`+`",
            Minus => "`-`",
            Star => "`*`",
            Slash => "`/`",
            Percent => "`%`",
            Bang => "`!`",
            AndAnd => "`&&`",
            OrOr => "`||`",
            Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }
}

/// Splits `text` into tokens. The returned sequence always ends with `Eof`.
pub fn lex(text: &str) -> Result<Vec<Token>, FrontendError> {
    let mut cur = Cursor { chars: text.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();

    loop {
        // whitespace and comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('/') if cur.peek2() == Some('/') => {
                    while let Some(c) = cur.peek() {
                        if c == '\n' {
                            break;
                        }
                        cur.bump();
                    }
                }
                Some('/') if cur.peek2() == Some('*') => {
                    let start = cur.span();
                    cur.bump();
                    cur.bump();
                    let mut closed = false;
                    while let Some(c) = cur.bump() {
                        if c == '*' && cur.peek() == Some('/') {
                            cur.bump();
                            closed = true;
                            break;
                        }
                    }
                    if !closed {
                        return Err(FrontendError::Lex { span: start, message: "unterminated block comment".into() });
                    }
                }
                _ => break,
            }
        }

        let span = cur.span();
        let Some(c) = cur.bump() else {
            out.push(Token { kind: TokenKind::Eof, span });
            return Ok(out);
        };

        let kind = match c {
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '[' => TokenKind::LBracket,
            ']' => TokenKind::RBracket,
            ';' => TokenKind::Semi,
            ',' => TokenKind::Comma,
            '.' => TokenKind::Dot,
            ':' => TokenKind::Colon,
            '+' => TokenKind::Plus,
            '-' => TokenKind::Minus,
            '*' => TokenKind::Star,
            '/' => TokenKind::Slash,
            '%' => TokenKind::Percent,
            '=' if cur.peek() == Some('=') => {
                cur.bump();
                TokenKind::EqEq
            }
            '=' => TokenKind::Assign,
            '!' if cur.peek() == Some('=') => {
                cur.bump();
                TokenKind::Neq
            }
            '!' => TokenKind::Bang,
            '<' if cur.peek() == Some('=') => {
                cur.bump();
                TokenKind::Le
            }
            '<' => TokenKind::Lt,
            '>' if cur.peek() == Some('=') => {
                cur.bump();
                TokenKind::Ge
            }
            '>' => TokenKind::Gt,
            '&' if cur.peek() == Some('&') => {
                cur.bump();
                TokenKind::AndAnd
            }
            '|' if cur.peek() == Some('|') => {
                cur.bump();
                TokenKind::OrOr
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        Some('"') => break,
                        Some('\\') => match cur.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(e @ ('"' | '\\')) => s.push(e),
                            _ => {
                                return Err(FrontendError::Lex { span, message: "invalid escape in string literal".into() })
                            }
                        },
                        Some('\n') | None => {
                            return Err(FrontendError::Lex { span, message: "unterminated string literal".into() })
                        }
                        Some(ch) => s.push(ch),
                    }
                }
                TokenKind::Str(s)
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::from(c);
                while let Some(d) = cur.peek().filter(|d| d.is_ascii_digit()) {
                    digits.push(d);
                    cur.bump();
                }
                let value = digits
                    .parse()
                    .map_err(|_| FrontendError::Lex { span, message: format!("integer literal `{digits}` out of range") })?;
                TokenKind::Int(value)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut word = String::from(c);
                while let Some(d) = cur.peek().filter(|d| d.is_alphanumeric() || *d == '_') {
                    word.push(d);
                    cur.bump();
                }
                TokenKind::keyword(&word).unwrap_or(TokenKind::Ident(word))
            }
            other => {
                return Err(FrontendError::Lex { span, message: format!("unrecognized character `{other}`") });
            }
        };
        out.push(Token { kind, span });
    }
}
