use crate::diag::Pos;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident,
    Int,
    Op(Op),
    Punct(Punct),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Seq,
    Par,
    For,
    Do,
    Server,
    Is,
    Interface,
    To,
    Call,
    Val,
    Var,
    Chan,
    Proc,
    Initial,
    Accept,
    Final,
    Skip,
}

impl Keyword {
    pub fn from_ident(s: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match s {
            "seq" => Seq,
            "par" => Par,
            "for" => For,
            "do" => Do,
            "server" => Server,
            "is" => Is,
            "interface" => Interface,
            "to" => To,
            "call" => Call,
            "val" => Val,
            "var" => Var,
            "chan" => Chan,
            "proc" => Proc,
            "initial" => Initial,
            "accept" => Accept,
            "final" => Final,
            "skip" => Skip,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        use Keyword::*;
        match self {
            Seq => "seq",
            Par => "par",
            For => "for",
            Do => "do",
            Server => "server",
            Is => "is",
            Interface => "interface",
            To => "to",
            Call => "call",
            Val => "val",
            Var => "var",
            Chan => "chan",
            Proc => "proc",
            Initial => "initial",
            Accept => "accept",
            Final => "final",
            Skip => "skip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Assign, // :=
    Eq,     // =
    Plus,
    Minus,
    Star,
    Bang,     // !
    Question, // ?
    Amp,      // &
    Bar,      // |
    Semi,     // ;
}

impl Op {
    pub fn as_str(&self) -> &'static str {
        match self {
            Op::Assign => ":=",
            Op::Eq => "=",
            Op::Plus => "+",
            Op::Minus => "-",
            Op::Star => "*",
            Op::Bang => "!",
            Op::Question => "?",
            Op::Amp => "&",
            Op::Bar => "|",
            Op::Semi => ";",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Punct {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Dot,
}

impl Punct {
    pub fn as_str(&self) -> &'static str {
        match self {
            Punct::LParen => "(",
            Punct::RParen => ")",
            Punct::LBrace => "{",
            Punct::RBrace => "}",
            Punct::LBracket => "[",
            Punct::RBracket => "]",
            Punct::Comma => ",",
            Punct::Dot => ".",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub pos: Pos,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.text)
    }
}
