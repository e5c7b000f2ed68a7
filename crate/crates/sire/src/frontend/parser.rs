//! Recursive descent parser producing a `Program`.
//!
//! The grammar is line-insensitive. Composition chains use exactly one of
//! the separators `;`, `|`, `&` per level; mixing them requires braces.
//! A `server ... is ...` specification binds the remainder of its
//! composition level as the scope body.

use crate::diag::{Diagnostic, Pos};
use crate::frontend::ast::*;
use crate::frontend::token::{Keyword, Op, Punct, Token, TokenKind};

pub fn parse(tokens: &[Token]) -> Result<Program, Diagnostic> {
    let mut p = Parser {
        tokens,
        pos: 0,
        next_id: 1,
    };
    p.program()
}

/// Convenience: tokenize then parse.
pub fn parse_source(source: &str) -> Result<Program, Diagnostic> {
    let tokens = crate::frontend::lexer::tokenize(source)?;
    parse(&tokens)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    next_id: u32,
}

impl<'t> Parser<'t> {
    fn fresh(&mut self) -> AstId {
        let id = AstId(self.next_id);
        self.next_id += 1;
        id
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    fn here(&self) -> Pos {
        self.peek()
            .map(|t| t.pos)
            .or_else(|| self.tokens.last().map(|t| t.pos))
            .unwrap_or_default()
    }

    fn err(&self, expected: &str) -> Diagnostic {
        let found = match self.peek() {
            Some(t) => format!("`{}`", t.text),
            None => "end of input".to_string(),
        };
        Diagnostic::new(self.here(), format!("expected {expected}, found {found}"))
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokenKind::Keyword(kw))
    }

    fn at_op(&self, op: Op) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokenKind::Op(op))
    }

    fn at_punct(&self, p: Punct) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokenKind::Punct(p))
    }

    fn eat_kw(&mut self, kw: Keyword) -> Result<&'t Token, Diagnostic> {
        if self.at_kw(kw) {
            Ok(self.bump())
        } else {
            Err(self.err(&format!("`{}`", kw.as_str())))
        }
    }

    fn eat_op(&mut self, op: Op) -> Result<&'t Token, Diagnostic> {
        if self.at_op(op) {
            Ok(self.bump())
        } else {
            Err(self.err(&format!("`{}`", op.as_str())))
        }
    }

    fn eat_punct(&mut self, p: Punct) -> Result<&'t Token, Diagnostic> {
        if self.at_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.err(&format!("`{}`", p.as_str())))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), Diagnostic> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                let t = self.bump();
                Ok((t.text.clone(), t.pos))
            }
            _ => Err(self.err("an identifier")),
        }
    }

    // ── Top level ──

    fn program(&mut self) -> Result<Program, Diagnostic> {
        let mut consts = Vec::new();
        let mut servers = Vec::new();
        let mut procs = Vec::new();
        loop {
            if self.at_kw(Keyword::Val) {
                consts.push(self.val_const()?);
            } else if self.at_kw(Keyword::Proc) {
                procs.push(self.proc_def()?);
            } else if self.at_kw(Keyword::Server)
                && matches!(self.peek_at(2), Some(t) if t.kind == TokenKind::Punct(Punct::LParen))
            {
                servers.push(self.server_def()?);
            } else {
                break;
            }
        }
        let main = self.process()?;
        if let Some(t) = self.peek() {
            return Err(Diagnostic::new(
                t.pos,
                format!("unexpected `{}` after the main process", t.text),
            ));
        }
        Ok(Program {
            consts,
            servers,
            procs,
            main,
        })
    }

    fn val_const(&mut self) -> Result<ValConst, Diagnostic> {
        let kw = self.eat_kw(Keyword::Val)?;
        let (name, _) = self.ident()?;
        self.eat_op(Op::Eq)?;
        let value = self.expr()?;
        Ok(ValConst {
            name,
            value,
            pos: kw.pos,
        })
    }

    fn proc_def(&mut self) -> Result<ProcDef, Diagnostic> {
        let kw = self.eat_kw(Keyword::Proc)?;
        let (name, _) = self.ident()?;
        self.eat_punct(Punct::LParen)?;
        let formals = self.formals()?;
        self.eat_punct(Punct::RParen)?;
        self.eat_kw(Keyword::Is)?;
        let body = self.item()?;
        Ok(ProcDef {
            name,
            formals,
            body,
            pos: kw.pos,
        })
    }

    fn server_def(&mut self) -> Result<ServerDef, Diagnostic> {
        let kw = self.eat_kw(Keyword::Server)?;
        let (name, _) = self.ident()?;
        self.eat_punct(Punct::LParen)?;
        let formals = self.formals()?;
        self.eat_punct(Punct::RParen)?;
        self.eat_kw(Keyword::Interface)?;
        self.eat_punct(Punct::LParen)?;
        let mut interface = Vec::new();
        if !self.at_punct(Punct::RParen) {
            loop {
                let call_kw = self.eat_kw(Keyword::Call)?;
                let (cname, _) = self.ident()?;
                self.eat_punct(Punct::LParen)?;
                let params = self.mode_params()?;
                self.eat_punct(Punct::RParen)?;
                interface.push(CallSig {
                    name: cname,
                    params,
                    pos: call_kw.pos,
                });
                if self.at_punct(Punct::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.eat_punct(Punct::RParen)?;
        self.eat_kw(Keyword::To)?;
        self.eat_punct(Punct::LBrace)?;
        let decls = self.decls()?;
        let initial = if self.at_kw(Keyword::Initial) {
            self.bump();
            Some(self.item()?)
        } else {
            None
        };
        self.eat_kw(Keyword::Accept)?;
        self.eat_punct(Punct::LBrace)?;
        let mut arms = Vec::new();
        while !self.at_punct(Punct::RBrace) {
            let (cname, cpos) = self.ident()?;
            self.eat_op(Op::Question)?;
            self.eat_punct(Punct::LParen)?;
            let params = self.mode_params()?;
            self.eat_punct(Punct::RParen)?;
            let body = self.item()?;
            arms.push(AcceptArm {
                call: cname,
                params,
                body,
                pos: cpos,
            });
        }
        self.eat_punct(Punct::RBrace)?;
        let final_body = if self.at_kw(Keyword::Final) {
            self.bump();
            Some(self.item()?)
        } else {
            None
        };
        self.eat_punct(Punct::RBrace)?;
        Ok(ServerDef {
            name,
            formals,
            interface,
            decls,
            initial,
            arms,
            final_body,
            pos: kw.pos,
        })
    }

    fn formals(&mut self) -> Result<Vec<Formal>, Diagnostic> {
        let mut out = Vec::new();
        if self.at_punct(Punct::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.formal()?);
            if self.at_punct(Punct::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn formal(&mut self) -> Result<Formal, Diagnostic> {
        if self.at_kw(Keyword::Val) || self.at_kw(Keyword::Var) {
            let mode = if self.bump().kind == TokenKind::Keyword(Keyword::Val) {
                Mode::Val
            } else {
                Mode::Var
            };
            let (name, pos) = self.ident()?;
            Ok(Formal::Scalar { mode, name, pos })
        } else if self.at_kw(Keyword::Server) {
            self.bump();
            let (def, pos) = self.ident()?;
            let mut dims = Vec::new();
            while self.at_punct(Punct::LBracket) {
                self.bump();
                dims.push(self.expr()?);
                self.eat_punct(Punct::RBracket)?;
            }
            let (name, _) = self.ident()?;
            Ok(Formal::Server {
                def,
                dims,
                name,
                pos,
            })
        } else if self.at_kw(Keyword::Chan) {
            self.bump();
            let (name, pos) = self.ident()?;
            Ok(Formal::Chan { name, pos })
        } else {
            Err(self.err("`val`, `var`, `server` or `chan`"))
        }
    }

    fn mode_params(&mut self) -> Result<Vec<(Mode, String)>, Diagnostic> {
        let mut out = Vec::new();
        if self.at_punct(Punct::RParen) {
            return Ok(out);
        }
        loop {
            let mode = if self.at_kw(Keyword::Val) {
                self.bump();
                Mode::Val
            } else if self.at_kw(Keyword::Var) {
                self.bump();
                Mode::Var
            } else {
                return Err(self.err("`val` or `var`"));
            };
            let (name, _) = self.ident()?;
            out.push((mode, name));
            if self.at_punct(Punct::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    // ── Processes ──

    fn process(&mut self) -> Result<Process, Diagnostic> {
        if self.at_kw(Keyword::Server) {
            return self.server_spec();
        }
        let first = self.item()?;
        let sep = match self.peek() {
            Some(t) if t.kind == TokenKind::Op(Op::Semi) => Op::Semi,
            Some(t) if t.kind == TokenKind::Op(Op::Bar) => Op::Bar,
            Some(t) if t.kind == TokenKind::Op(Op::Amp) => Op::Amp,
            _ => return Ok(first),
        };
        let pos = first.pos;
        let mut children = vec![first];
        while self.at_op(sep) {
            self.bump();
            children.push(self.item()?);
        }
        // A different separator here means the program mixes operators at
        // one level, which is rejected.
        if let Some(t) = self.peek() {
            if matches!(t.kind, TokenKind::Op(Op::Semi | Op::Bar | Op::Amp)) {
                return Err(Diagnostic::new(
                    t.pos,
                    format!(
                        "cannot mix `{}` with `{}` at one level; use braces",
                        t.text,
                        sep.as_str()
                    ),
                ));
            }
        }
        let id = self.fresh();
        let kind = match sep {
            Op::Semi => ProcessKind::Seq(children),
            Op::Bar => ProcessKind::LocalPar(children),
            Op::Amp => ProcessKind::DistPar(children),
            _ => unreachable!(),
        };
        Ok(Process { id, pos, kind })
    }

    fn server_spec(&mut self) -> Result<Process, Diagnostic> {
        let kw = self.eat_kw(Keyword::Server)?;
        let (name, _) = self.ident()?;
        let name_id = self.fresh();
        self.eat_kw(Keyword::Is)?;
        let (def, _) = self.ident()?;
        self.eat_punct(Punct::LParen)?;
        let mut args = Vec::new();
        if !self.at_punct(Punct::RParen) {
            loop {
                args.push(self.expr()?);
                if self.at_punct(Punct::Comma) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.eat_punct(Punct::RParen)?;
        let mut dims = Vec::new();
        while self.at_punct(Punct::LBracket) {
            self.bump();
            dims.push(self.expr()?);
            self.eat_punct(Punct::RBracket)?;
        }
        let placement = if self.at_op(Op::Amp) {
            self.bump();
            Placement::Disjoint
        } else if self.at_op(Op::Bar) {
            self.bump();
            Placement::Layered
        } else {
            return Err(self.err("`&` or `|` after a server specification"));
        };
        let body = self.process()?;
        Ok(Process {
            id: self.fresh(),
            pos: kw.pos,
            kind: ProcessKind::ServerSpec {
                name,
                name_id,
                def,
                args,
                dims,
                placement,
                body: Box::new(body),
            },
        })
    }

    fn item(&mut self) -> Result<Process, Diagnostic> {
        let pos = self.here();
        if self.at_kw(Keyword::Skip) {
            self.bump();
            return Ok(Process {
                id: self.fresh(),
                pos,
                kind: ProcessKind::Skip,
            });
        }
        if self.at_kw(Keyword::Seq) || self.at_kw(Keyword::Par) {
            return self.replicator();
        }
        if self.at_punct(Punct::LBrace) {
            return self.block();
        }
        if matches!(self.peek(), Some(t) if t.kind == TokenKind::Ident) {
            return self.ident_item();
        }
        Err(self.err("a process"))
    }

    fn replicator(&mut self) -> Result<Process, Diagnostic> {
        let kw = self.bump();
        let is_seq = kw.kind == TokenKind::Keyword(Keyword::Seq);
        let (var, _) = self.ident()?;
        let var_id = self.fresh();
        self.eat_op(Op::Eq)?;
        let base = self.expr()?;
        self.eat_kw(Keyword::For)?;
        let count = self.expr()?;
        self.eat_kw(Keyword::Do)?;
        let body = Box::new(self.item()?);
        let id = self.fresh();
        let kind = if is_seq {
            ProcessKind::SeqRep {
                var,
                var_id,
                base,
                count,
                body,
            }
        } else {
            ProcessKind::ParRep {
                var,
                var_id,
                base,
                count,
                body,
                mode: ParMode::Distributed,
            }
        };
        Ok(Process {
            id,
            pos: kw.pos,
            kind,
        })
    }

    fn block(&mut self) -> Result<Process, Diagnostic> {
        let brace = self.eat_punct(Punct::LBrace)?;
        let decls = self.decls()?;
        let body = if self.at_punct(Punct::RBrace) {
            None
        } else {
            Some(Box::new(self.process()?))
        };
        self.eat_punct(Punct::RBrace)?;
        Ok(Process {
            id: self.fresh(),
            pos: brace.pos,
            kind: ProcessKind::Block { decls, body },
        })
    }

    fn decls(&mut self) -> Result<Vec<Decl>, Diagnostic> {
        let mut out = Vec::new();
        loop {
            if self.at_kw(Keyword::Var) {
                let kw = self.bump();
                let mut names = Vec::new();
                loop {
                    let (name, _) = self.ident()?;
                    let size = if self.at_punct(Punct::LBracket) {
                        self.bump();
                        let e = self.expr()?;
                        self.eat_punct(Punct::RBracket)?;
                        Some(e)
                    } else {
                        None
                    };
                    names.push((name, size));
                    if self.at_punct(Punct::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.eat_op(Op::Semi)?;
                out.push(Decl::Var {
                    id: self.fresh(),
                    names,
                    pos: kw.pos,
                });
            } else if self.at_kw(Keyword::Chan) {
                let kw = self.bump();
                let mut shape = Vec::new();
                while self.at_punct(Punct::LBracket) {
                    self.bump();
                    shape.push(self.expr()?);
                    self.eat_punct(Punct::RBracket)?;
                }
                let mut names = Vec::new();
                loop {
                    let (name, _) = self.ident()?;
                    names.push(name);
                    if self.at_punct(Punct::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.eat_op(Op::Semi)?;
                out.push(Decl::Chan {
                    id: self.fresh(),
                    shape,
                    names,
                    pos: kw.pos,
                });
            } else {
                break;
            }
        }
        Ok(out)
    }

    /// Items starting with an identifier: assignment, channel input/output,
    /// server call or proc call.
    fn ident_item(&mut self) -> Result<Process, Diagnostic> {
        let (name, pos) = self.ident()?;
        let head_id = self.fresh();
        let mut indices = Vec::new();
        while self.at_punct(Punct::LBracket) {
            self.bump();
            indices.push(self.expr()?);
            self.eat_punct(Punct::RBracket)?;
        }
        if self.at_op(Op::Assign) {
            self.bump();
            let value = self.expr()?;
            return Ok(Process {
                id: self.fresh(),
                pos,
                kind: ProcessKind::Assign {
                    target: LValue {
                        id: head_id,
                        name,
                        indices,
                        pos,
                    },
                    value,
                },
            });
        }
        if self.at_op(Op::Bang) {
            self.bump();
            let value = self.expr()?;
            return Ok(Process {
                id: self.fresh(),
                pos,
                kind: ProcessKind::ChanOut {
                    chan: LValue {
                        id: head_id,
                        name,
                        indices,
                        pos,
                    },
                    value,
                },
            });
        }
        if self.at_op(Op::Question) {
            self.bump();
            let (tname, tpos) = self.ident()?;
            let tid = self.fresh();
            let mut tindices = Vec::new();
            while self.at_punct(Punct::LBracket) {
                self.bump();
                tindices.push(self.expr()?);
                self.eat_punct(Punct::RBracket)?;
            }
            return Ok(Process {
                id: self.fresh(),
                pos,
                kind: ProcessKind::ChanIn {
                    chan: LValue {
                        id: head_id,
                        name,
                        indices,
                        pos,
                    },
                    target: LValue {
                        id: tid,
                        name: tname,
                        indices: tindices,
                        pos: tpos,
                    },
                },
            });
        }
        if self.at_punct(Punct::Dot) {
            self.bump();
            let (call, _) = self.ident()?;
            self.eat_punct(Punct::LParen)?;
            let actuals = self.call_args()?;
            self.eat_punct(Punct::RParen)?;
            return Ok(Process {
                id: self.fresh(),
                pos,
                kind: ProcessKind::ServerCall {
                    server: name,
                    server_id: head_id,
                    subscripts: indices,
                    call,
                    actuals,
                },
            });
        }
        if self.at_punct(Punct::LParen) {
            if !indices.is_empty() {
                return Err(Diagnostic::new(pos, "a proc name cannot be subscripted"));
            }
            self.bump();
            let actuals = self.call_args()?;
            self.eat_punct(Punct::RParen)?;
            return Ok(Process {
                id: self.fresh(),
                pos,
                kind: ProcessKind::ProcCall { name, actuals },
            });
        }
        Err(self.err("`:=`, `!`, `?`, `.` or `(`"))
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, Diagnostic> {
        let mut out = Vec::new();
        if self.at_punct(Punct::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.at_punct(Punct::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    // ── Expressions ──

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = if self.at_op(Op::Plus) {
                BinOp::Add
            } else if self.at_op(Op::Minus) {
                BinOp::Sub
            } else {
                break;
            };
            let t = self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs), t.pos);
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, Diagnostic> {
        let mut lhs = self.atom()?;
        loop {
            let op = if self.at_op(Op::Star) {
                BinOp::Mul
            } else if matches!(self.peek(), Some(t) if t.kind == TokenKind::Ident && t.text == "rem")
            {
                BinOp::Rem
            } else {
                break;
            };
            let t = self.bump();
            let rhs = self.atom()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs), t.pos);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr, Diagnostic> {
        let pos = self.here();
        match self.peek() {
            Some(t) if t.kind == TokenKind::Int => {
                let t = self.bump();
                let v: i64 = t
                    .text
                    .parse()
                    .map_err(|_| Diagnostic::new(t.pos, "integer literal out of range"))?;
                Ok(Expr::Int(v, t.pos))
            }
            Some(t) if t.kind == TokenKind::Op(Op::Minus) => {
                let t = self.bump();
                let inner = self.atom()?;
                Ok(Expr::Binary(
                    BinOp::Sub,
                    Box::new(Expr::Int(0, t.pos)),
                    Box::new(inner),
                    t.pos,
                ))
            }
            Some(t) if t.kind == TokenKind::Ident => {
                let (name, npos) = self.ident()?;
                let id = self.fresh();
                if self.at_punct(Punct::LBracket) {
                    let mut indices = Vec::new();
                    while self.at_punct(Punct::LBracket) {
                        self.bump();
                        indices.push(self.expr()?);
                        self.eat_punct(Punct::RBracket)?;
                    }
                    Ok(Expr::Subscript(id, name, indices, npos))
                } else {
                    Ok(Expr::Name(id, name, npos))
                }
            }
            Some(t) if t.kind == TokenKind::Punct(Punct::LParen) => {
                self.bump();
                let e = self.expr()?;
                self.eat_punct(Punct::RParen)?;
                Ok(e)
            }
            _ => Err(Diagnostic::new(pos, "expected an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_ok(src: &str) -> Program {
        parse_source(src).expect("parse failed")
    }

    #[test]
    fn seq_chain_is_flat() {
        let p = parse_ok("P() ; Q() ; R()");
        match &p.main.kind {
            ProcessKind::Seq(cs) => {
                assert_eq!(cs.len(), 3);
                assert!(matches!(&cs[0].kind, ProcessKind::ProcCall { name, .. } if name == "P"));
            }
            other => panic!("expected Seq, got {other:?}"),
        }
    }

    #[test]
    fn dist_par_chain() {
        let p = parse_ok("P() & Q() & R()");
        match &p.main.kind {
            ProcessKind::DistPar(cs) => assert_eq!(cs.len(), 3),
            other => panic!("expected DistPar, got {other:?}"),
        }
    }

    #[test]
    fn single_element_replication() {
        let p = parse_ok("par i=0 for 1 do P(i)");
        match &p.main.kind {
            ProcessKind::ParRep {
                var, base, count, mode, ..
            } => {
                assert_eq!(var, "i");
                assert_eq!(*mode, ParMode::Distributed);
                assert!(matches!(base, Expr::Int(0, _)));
                assert!(matches!(count, Expr::Int(1, _)));
            }
            other => panic!("expected ParRep, got {other:?}"),
        }
    }

    #[test]
    fn mixed_separators_rejected() {
        let err = parse_source("P() | Q() & R()").unwrap_err();
        assert!(err.message.contains("mix"), "{}", err.message);
    }

    #[test]
    fn server_spec_with_extent() {
        let p = parse_ok("server s is Store(0)[2*3] & skip");
        match &p.main.kind {
            ProcessKind::ServerSpec {
                name,
                def,
                dims,
                placement,
                ..
            } => {
                assert_eq!(name, "s");
                assert_eq!(def, "Store");
                assert_eq!(dims.len(), 1);
                assert_eq!(*placement, Placement::Disjoint);
            }
            other => panic!("expected ServerSpec, got {other:?}"),
        }
    }

    #[test]
    fn server_def_store() {
        let src = "
            val N = 4
            server Store(val init)
              interface(call read(val i, var v), call write(val i, val v)) to
            { var data[N];
              initial { var i; seq i=0 for N do data[i] := init }
              accept
              { read ? (val i, var v) v := data[i]
                write ? (val i, val v) data[i] := v
              }
              final {}
            }
            skip";
        let p = parse_ok(src);
        assert_eq!(p.servers.len(), 1);
        let s = &p.servers[0];
        assert_eq!(s.name, "Store");
        assert_eq!(s.interface.len(), 2);
        assert_eq!(s.arms.len(), 2);
        assert!(s.initial.is_some());
        assert!(s.final_body.is_some());
    }

    #[test]
    fn rem_expression() {
        let p = parse_ok("x := (y+1) rem n");
        match &p.main.kind {
            ProcessKind::Assign { value, .. } => {
                assert!(matches!(value, Expr::Binary(BinOp::Rem, _, _, _)));
            }
            other => panic!("expected Assign, got {other:?}"),
        }
    }

    #[test]
    fn chan_io_forms() {
        let p = parse_ok("{ var x; chan c; c ! x+1 ; c ? x }");
        match &p.main.kind {
            ProcessKind::Block { decls, body } => {
                assert_eq!(decls.len(), 2);
                match &body.as_ref().unwrap().kind {
                    ProcessKind::Seq(cs) => {
                        assert!(matches!(cs[0].kind, ProcessKind::ChanOut { .. }));
                        assert!(matches!(cs[1].kind, ProcessKind::ChanIn { .. }));
                    }
                    other => panic!("expected Seq, got {other:?}"),
                }
            }
            other => panic!("expected Block, got {other:?}"),
        }
    }

    #[test]
    fn proc_def_with_server_and_chan_formals() {
        let src = "
            proc node(server Matrix a, chan up, val n) is skip
            skip";
        let p = parse_ok(src);
        assert_eq!(p.procs.len(), 1);
        assert_eq!(p.procs[0].formals.len(), 3);
    }

    #[test]
    fn parse_error_reports_position() {
        let err = parse_source("seq i=0 for do skip").unwrap_err();
        assert_eq!(err.pos.line, 1);
        assert!(err.message.contains("expected an expression"));
    }
}
