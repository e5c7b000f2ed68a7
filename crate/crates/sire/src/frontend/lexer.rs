//! Hand-rolled lexer for `.sire` source text.
//!
//! Whitespace (including newlines) separates tokens and is otherwise
//! insignificant. Comments run from `--` to end of line.

use crate::diag::{Diagnostic, Pos};
use crate::frontend::token::{Keyword, Op, Punct, Token, TokenKind};

pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(c) = c {
                if c == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }

    loop {
        let pos = Pos::new(line, col);
        let c = match chars.peek().copied() {
            None => break,
            Some(c) => c,
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '-' => {
                // Comment `--` or minus operator.
                bump!();
                if chars.peek() == Some(&'-') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    tokens.push(tok(TokenKind::Op(Op::Minus), "-", pos));
                }
            }
            ':' => {
                bump!();
                if chars.peek() == Some(&'=') {
                    bump!();
                    tokens.push(tok(TokenKind::Op(Op::Assign), ":=", pos));
                } else {
                    return Err(Diagnostic::new(pos, "expected `=` after `:`"));
                }
            }
            '=' => {
                bump!();
                tokens.push(tok(TokenKind::Op(Op::Eq), "=", pos));
            }
            '+' => {
                bump!();
                tokens.push(tok(TokenKind::Op(Op::Plus), "+", pos));
            }
            '*' => {
                bump!();
                tokens.push(tok(TokenKind::Op(Op::Star), "*", pos));
            }
            '!' => {
                bump!();
                tokens.push(tok(TokenKind::Op(Op::Bang), "!", pos));
            }
            '?' => {
                bump!();
                tokens.push(tok(TokenKind::Op(Op::Question), "?", pos));
            }
            '&' => {
                bump!();
                tokens.push(tok(TokenKind::Op(Op::Amp), "&", pos));
            }
            '|' => {
                bump!();
                tokens.push(tok(TokenKind::Op(Op::Bar), "|", pos));
            }
            ';' => {
                bump!();
                tokens.push(tok(TokenKind::Op(Op::Semi), ";", pos));
            }
            '(' => {
                bump!();
                tokens.push(tok(TokenKind::Punct(Punct::LParen), "(", pos));
            }
            ')' => {
                bump!();
                tokens.push(tok(TokenKind::Punct(Punct::RParen), ")", pos));
            }
            '{' => {
                bump!();
                tokens.push(tok(TokenKind::Punct(Punct::LBrace), "{", pos));
            }
            '}' => {
                bump!();
                tokens.push(tok(TokenKind::Punct(Punct::RBrace), "}", pos));
            }
            '[' => {
                bump!();
                tokens.push(tok(TokenKind::Punct(Punct::LBracket), "[", pos));
            }
            ']' => {
                bump!();
                tokens.push(tok(TokenKind::Punct(Punct::RBracket), "]", pos));
            }
            ',' => {
                bump!();
                tokens.push(tok(TokenKind::Punct(Punct::Comma), ",", pos));
            }
            '.' => {
                bump!();
                tokens.push(tok(TokenKind::Punct(Punct::Dot), ".", pos));
            }
            c if c.is_ascii_digit() => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        text.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                tokens.push(tok(TokenKind::Int, text, pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        text.push(c);
                        bump!();
                    } else {
                        break;
                    }
                }
                let kind = match Keyword::from_ident(&text) {
                    Some(kw) => TokenKind::Keyword(kw),
                    None => TokenKind::Ident,
                };
                tokens.push(tok(kind, text, pos));
            }
            c => {
                return Err(Diagnostic::new(
                    pos,
                    format!("unexpected character `{c}`"),
                ));
            }
        }
    }
    Ok(tokens)
}

fn tok(kind: TokenKind, text: impl Into<String>, pos: Pos) -> Token {
    Token {
        kind,
        text: text.into(),
        pos,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<String> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| match t.kind {
                TokenKind::Keyword(k) => format!("kw:{}", k.as_str()),
                TokenKind::Ident => format!("id:{}", t.text),
                TokenKind::Int => format!("int:{}", t.text),
                TokenKind::Op(o) => format!("op:{}", o.as_str()),
                TokenKind::Punct(p) => format!("punct:{}", p.as_str()),
            })
            .collect()
    }

    #[test]
    fn keywords_and_replicator() {
        assert_eq!(
            kinds("seq i=0 for 4 do skip"),
            vec!["kw:seq", "id:i", "op:=", "int:0", "kw:for", "int:4", "kw:do", "kw:skip"]
        );
    }

    #[test]
    fn server_call_tokens() {
        assert_eq!(
            kinds("s.write(i, i)"),
            vec![
                "id:s", "punct:.", "id:write", "punct:(", "id:i", "punct:,", "id:i", "punct:)"
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn positions_point_into_source() {
        let toks = tokenize("x :=\n  y + 1").unwrap();
        assert_eq!(toks[0].pos, Pos::new(1, 1));
        assert_eq!(toks[1].pos, Pos::new(1, 3));
        assert_eq!(toks[2].pos, Pos::new(2, 3));
        assert_eq!(toks[4].pos, Pos::new(2, 7));
    }

    #[test]
    fn rejects_unknown_character() {
        let err = tokenize("x @ y").unwrap_err();
        assert_eq!(err.pos, Pos::new(1, 3));
        assert!(err.message.contains('@'));
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(kinds("x -- trailing words\n:= 1"), vec!["id:x", "op::=", "int:1"]);
    }

    #[test]
    fn rem_is_an_identifier() {
        // `rem` is not a keyword; the parser recognises it as an operator by
        // position.
        assert_eq!(kinds("a rem n"), vec!["id:a", "id:rem", "id:n"]);
    }

    #[test]
    fn token_texts_carry_the_significant_content() {
        // Joining token texts with spaces and re-lexing yields the same
        // stream: nothing significant is lost or invented.
        let src = "val N = 8
            server s is Store(0)[N] & -- comment vanishes
            { var out[N]; seq i=0 for N do { s.read(i, out[i]) } }";
        let toks = tokenize(src).unwrap();
        let joined: String = toks
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let again = tokenize(&joined).unwrap();
        let texts = |ts: &[Token]| ts.iter().map(|t| t.text.clone()).collect::<Vec<_>>();
        let kind_of = |ts: &[Token]| ts.iter().map(|t| t.kind).collect::<Vec<_>>();
        assert_eq!(texts(&toks), texts(&again));
        assert_eq!(kind_of(&toks), kind_of(&again));
    }
}
