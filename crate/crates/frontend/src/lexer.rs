//! Tokenizer. Keywords are case-insensitive; identifiers keep their case.
//! `--` starts a comment running to end of line.

use crate::ast::Span;
use crate::error::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    // keywords
    Range,
    Of,
    Is,
    Retrieve,
    Into,
    Unique,
    Where,
    Sort,
    By,
    Asc,
    Desc,
    And,
    Or,
    Not,
    Group,
    All,
    True,
    False,
    As,
    // punctuation
    Dot,
    Comma,
    LParen,
    RParen,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier {s:?}"),
            TokenKind::Int(i) => format!("integer {i}"),
            TokenKind::Float(f) => format!("number {f}"),
            TokenKind::Str(s) => format!("string {s:?}"),
            TokenKind::Eof => "end of input".to_string(),
            other => format!("{:?}", other).to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word.to_ascii_lowercase().as_str() {
        "range" => TokenKind::Range,
        "of" => TokenKind::Of,
        "is" => TokenKind::Is,
        "retrieve" => TokenKind::Retrieve,
        "into" => TokenKind::Into,
        "unique" => TokenKind::Unique,
        "where" => TokenKind::Where,
        "sort" => TokenKind::Sort,
        "by" => TokenKind::By,
        "asc" => TokenKind::Asc,
        "desc" => TokenKind::Desc,
        "and" => TokenKind::And,
        "or" => TokenKind::Or,
        "not" => TokenKind::Not,
        "group" => TokenKind::Group,
        "all" => TokenKind::All,
        "true" => TokenKind::True,
        "false" => TokenKind::False,
        "as" => TokenKind::As,
        _ => return None,
    })
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        match c {
            ' ' | '\t' | '\r' | '\n' => bump!(),
            '-' if i + 1 < chars.len() && chars[i + 1] == '-' => {
                while i < chars.len() && chars[i] != '\n' {
                    bump!();
                }
            }
            '"' => {
                bump!();
                let mut s = String::new();
                let mut closed = false;
                while i < chars.len() {
                    match chars[i] {
                        '"' => {
                            bump!();
                            closed = true;
                            break;
                        }
                        '\\' => {
                            bump!();
                            if i >= chars.len() {
                                break;
                            }
                            let esc = chars[i];
                            bump!();
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                '\\' => '\\',
                                '"' => '"',
                                other => {
                                    return Err(FrontendError::error(
                                        format!("unknown escape \\{other}"),
                                        span,
                                    ))
                                }
                            });
                        }
                        '\n' => break,
                        other => {
                            s.push(other);
                            bump!();
                        }
                    }
                }
                if !closed {
                    return Err(FrontendError::error("unterminated string literal", span));
                }
                tokens.push(Token { kind: TokenKind::Str(s), span });
            }
            '0'..='9' => {
                let mut text = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    text.push(chars[i]);
                    bump!();
                }
                let is_float = i + 1 < chars.len()
                    && chars[i] == '.'
                    && chars[i + 1].is_ascii_digit();
                if is_float {
                    text.push('.');
                    bump!();
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        text.push(chars[i]);
                        bump!();
                    }
                    let value: f64 = text
                        .parse()
                        .map_err(|_| FrontendError::error(format!("bad number {text:?}"), span))?;
                    tokens.push(Token { kind: TokenKind::Float(value), span });
                } else {
                    let value: i64 = text
                        .parse()
                        .map_err(|_| FrontendError::error(format!("integer {text:?} out of range"), span))?;
                    tokens.push(Token { kind: TokenKind::Int(value), span });
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    word.push(chars[i]);
                    bump!();
                }
                let kind = keyword(&word).unwrap_or(TokenKind::Ident(word));
                tokens.push(Token { kind, span });
            }
            _ => {
                let kind = match c {
                    '.' => TokenKind::Dot,
                    ',' => TokenKind::Comma,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '+' => TokenKind::Plus,
                    '-' => TokenKind::Minus,
                    '*' => TokenKind::Star,
                    '/' => TokenKind::Slash,
                    '=' => TokenKind::Eq,
                    '!' => {
                        if i + 1 < chars.len() && chars[i + 1] == '=' {
                            bump!();
                            TokenKind::Ne
                        } else {
                            return Err(FrontendError::error("expected != after !", span));
                        }
                    }
                    '<' => {
                        if i + 1 < chars.len() && chars[i + 1] == '=' {
                            bump!();
                            TokenKind::Le
                        } else {
                            TokenKind::Lt
                        }
                    }
                    '>' => {
                        if i + 1 < chars.len() && chars[i + 1] == '=' {
                            bump!();
                            TokenKind::Ge
                        } else {
                            TokenKind::Gt
                        }
                    }
                    other => {
                        return Err(FrontendError::error(format!("illegal character {other:?}"), span))
                    }
                };
                bump!();
                tokens.push(Token { kind, span });
            }
        }
    }
    tokens.push(Token { kind: TokenKind::Eof, span: Span { line, col } });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keywords_and_identifiers() {
        let tokens = tokenize("range of V is Version").unwrap();
        let kinds: Vec<&TokenKind> = tokens.iter().map(|t| &t.kind).collect();
        assert!(matches!(kinds[0], TokenKind::Range));
        assert!(matches!(kinds[1], TokenKind::Of));
        assert!(matches!(kinds[2], TokenKind::Ident(v) if v == "V"));
        assert!(matches!(kinds[3], TokenKind::Is));
        assert!(matches!(kinds[4], TokenKind::Ident(v) if v == "Version"));
        assert!(matches!(kinds[5], TokenKind::Eof));
    }

    #[test]
    fn empty_input_is_just_eof() {
        let tokens = tokenize("").unwrap();
        assert_eq!(tokens.len(), 1);
        assert!(matches!(tokens[0].kind, TokenKind::Eof));
    }

    #[test]
    fn unterminated_string_reports_open_quote() {
        let err = tokenize("\"v01").unwrap_err();
        assert_eq!((err.span.line, err.span.col), (1, 1));
        assert!(err.message.contains("unterminated"));
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let tokens = tokenize("RANGE Of reTrieVe").unwrap();
        assert!(matches!(tokens[0].kind, TokenKind::Range));
        assert!(matches!(tokens[1].kind, TokenKind::Of));
        assert!(matches!(tokens[2].kind, TokenKind::Retrieve));
    }

    #[test]
    fn comments_and_operators() {
        let tokens = tokenize("a != b -- trailing\n<= >=").unwrap();
        let kinds: Vec<&TokenKind> = tokens.iter().map(|t| &t.kind).collect();
        assert!(matches!(kinds[1], TokenKind::Ne));
        assert!(matches!(kinds[3], TokenKind::Le));
        assert!(matches!(kinds[4], TokenKind::Ge));
        assert_eq!(tokens[3].span.line, 2);
    }

    #[test]
    fn numbers() {
        let tokens = tokenize("100 1.5 2.").unwrap();
        assert!(matches!(tokens[0].kind, TokenKind::Int(100)));
        assert!(matches!(tokens[1].kind, TokenKind::Float(f) if f == 1.5));
        // "2." lexes as int then dot
        assert!(matches!(tokens[2].kind, TokenKind::Int(2)));
        assert!(matches!(tokens[3].kind, TokenKind::Dot));
    }

    #[test]
    fn illegal_character_has_position() {
        let err = tokenize("a ; b").unwrap_err();
        assert_eq!((err.span.line, err.span.col), (1, 3));
    }
}
