use super::SqlError;

/// Clause and operator keywords recognized by the tokenizer. Aggregate names
/// are keywords here; the parser demotes them back to identifiers when they
/// appear in column position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Select,
    Distinct,
    From,
    As,
    Join,
    On,
    Where,
    Group,
    By,
    Having,
    Order,
    Asc,
    Desc,
    Limit,
    And,
    Or,
    Not,
    In,
    Like,
    Between,
    Is,
    Null,
    Intersect,
    Union,
    Except,
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match word {
            "select" => Select,
            "distinct" => Distinct,
            "from" => From,
            "as" => As,
            "join" => Join,
            "on" => On,
            "where" => Where,
            "group" => Group,
            "by" => By,
            "having" => Having,
            "order" => Order,
            "asc" => Asc,
            "desc" => Desc,
            "limit" => Limit,
            "and" => And,
            "or" => Or,
            "not" => Not,
            "in" => In,
            "like" => Like,
            "between" => Between,
            "is" => Is,
            "null" => Null,
            "intersect" => Intersect,
            "union" => Union,
            "except" => Except,
            "count" => Count,
            "sum" => Sum,
            "avg" => Avg,
            "min" => Min,
            "max" => Max,
            _ => return None,
        })
    }

    /// Lowercase spelling, used by error messages and the printer.
    pub fn as_str(&self) -> &'static str {
        use Keyword::*;
        match self {
            Select => "select",
            Distinct => "distinct",
            From => "from",
            As => "as",
            Join => "join",
            On => "on",
            Where => "where",
            Group => "group",
            By => "by",
            Having => "having",
            Order => "order",
            Asc => "asc",
            Desc => "desc",
            Limit => "limit",
            And => "and",
            Or => "or",
            Not => "not",
            In => "in",
            Like => "like",
            Between => "between",
            Is => "is",
            Null => "null",
            Intersect => "intersect",
            Union => "union",
            Except => "except",
            Count => "count",
            Sum => "sum",
            Avg => "avg",
            Min => "min",
            Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    /// Identifier, already lowercased.
    Ident(String),
    /// String literal content without the surrounding quotes, byte-exact.
    Str(String),
    /// Number literal kept as raw text so it reprints byte-exact.
    Num(String),
    /// Punctuation or operator: ( ) , . * ; = != < > <= >= + - /
    Symbol(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the token start in the source text.
    pub offset: usize,
}

/// Split SQL text into tokens. Keywords match case-insensitively; both quote
/// styles are accepted and `<>` is normalized to `!=`. Quoted content is not
/// unescaped: a literal ends at the first matching quote character.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '\'' | '"' => {
                let quote = bytes[i];
                i += 1;
                let content_start = i;
                while i < bytes.len() && bytes[i] != quote {
                    i += 1;
                }
                if i >= bytes.len() {
                    return Err(SqlError::UnterminatedString { offset: start });
                }
                tokens.push(Token {
                    kind: TokenKind::Str(text[content_start..i].to_string()),
                    offset: start,
                });
                i += 1;
            }
            '(' | ')' | ',' | '.' | '*' | ';' | '+' | '-' | '/' | '=' => {
                let sym = match c {
                    '(' => "(",
                    ')' => ")",
                    ',' => ",",
                    '.' => ".",
                    '*' => "*",
                    ';' => ";",
                    '+' => "+",
                    '-' => "-",
                    '/' => "/",
                    _ => "=",
                };
                tokens.push(Token {
                    kind: TokenKind::Symbol(sym),
                    offset: start,
                });
                i += 1;
            }
            '<' => {
                i += 1;
                let sym = match bytes.get(i) {
                    Some(b'=') => {
                        i += 1;
                        "<="
                    }
                    Some(b'>') => {
                        i += 1;
                        "!="
                    }
                    _ => "<",
                };
                tokens.push(Token {
                    kind: TokenKind::Symbol(sym),
                    offset: start,
                });
            }
            '>' => {
                i += 1;
                let sym = if bytes.get(i) == Some(&b'=') {
                    i += 1;
                    ">="
                } else {
                    ">"
                };
                tokens.push(Token {
                    kind: TokenKind::Symbol(sym),
                    offset: start,
                });
            }
            '!' => {
                i += 1;
                if bytes.get(i) == Some(&b'=') {
                    i += 1;
                    tokens.push(Token {
                        kind: TokenKind::Symbol("!="),
                        offset: start,
                    });
                } else {
                    return Err(SqlError::IllegalCharacter {
                        ch: '!',
                        offset: start,
                    });
                }
            }
            _ if c.is_ascii_digit() => {
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len()
                    && bytes[i] == b'.'
                    && i + 1 < bytes.len()
                    && (bytes[i + 1] as char).is_ascii_digit()
                {
                    i += 1;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Num(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ if c.is_alphabetic() || c == '_' => {
                while i < bytes.len() {
                    let w = bytes[i] as char;
                    if w.is_alphanumeric() || w == '_' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = text[start..i].to_lowercase();
                let kind = match Keyword::from_word(&word) {
                    Some(kw) => TokenKind::Keyword(kw),
                    None => TokenKind::Ident(word),
                };
                tokens.push(Token { kind, offset: start });
            }
            _ => {
                return Err(SqlError::IllegalCharacter {
                    ch: c,
                    offset: start,
                })
            }
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn classifies_keywords_and_identifiers() {
        assert_eq!(
            kinds("SELECT count(*) FROM templates"),
            vec![
                TokenKind::Keyword(Keyword::Select),
                TokenKind::Keyword(Keyword::Count),
                TokenKind::Symbol("("),
                TokenKind::Symbol("*"),
                TokenKind::Symbol(")"),
                TokenKind::Keyword(Keyword::From),
                TokenKind::Ident("templates".into()),
            ]
        );
    }

    #[test]
    fn empty_quoted_literal() {
        assert_eq!(kinds("''"), vec![TokenKind::Str(String::new())]);
    }

    #[test]
    fn literal_content_preserved_byte_exact() {
        let toks = kinds("WHERE x = 'US Territory'");
        assert_eq!(toks.last(), Some(&TokenKind::Str("US Territory".into())));
        // double quotes accepted too, with mixed case kept intact
        let toks = kinds("WHERE x = \"US Territory\"");
        assert_eq!(toks.last(), Some(&TokenKind::Str("US Territory".into())));
    }

    #[test]
    fn unterminated_string_reports_offset() {
        assert_eq!(
            tokenize("where x = 'oops"),
            Err(SqlError::UnterminatedString { offset: 10 })
        );
    }

    #[test]
    fn illegal_character() {
        assert!(matches!(
            tokenize("select ` from t"),
            Err(SqlError::IllegalCharacter { ch: '`', .. })
        ));
    }

    #[test]
    fn numbers_keep_raw_text() {
        assert_eq!(
            kinds("limit 10"),
            vec![
                TokenKind::Keyword(Keyword::Limit),
                TokenKind::Num("10".into())
            ]
        );
        assert_eq!(kinds("1.84"), vec![TokenKind::Num("1.84".into())]);
    }

    #[test]
    fn comparison_operators() {
        assert_eq!(
            kinds("a <= b <> c >= d != e"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Symbol("<="),
                TokenKind::Ident("b".into()),
                TokenKind::Symbol("!="),
                TokenKind::Ident("c".into()),
                TokenKind::Symbol(">="),
                TokenKind::Ident("d".into()),
                TokenKind::Symbol("!="),
                TokenKind::Ident("e".into()),
            ]
        );
    }
}
