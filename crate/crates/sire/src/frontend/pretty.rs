//! Pretty-printer. Output re-parses to a structurally identical tree.

use crate::frontend::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut w = Writer::default();
    for c in &p.consts {
        w.line(&format!("val {} = {}", c.name, expr(&c.value)));
    }
    for s in &p.servers {
        print_server_def(&mut w, s);
    }
    for d in &p.procs {
        w.line(&format!("proc {}({}) is", d.name, formals(&d.formals)));
        w.indented(|w| print_process(w, &d.body));
    }
    print_process(&mut w, &p.main);
    w.out
}

#[derive(Default)]
struct Writer {
    out: String,
    indent: usize,
}

impl Writer {
    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn indented(&mut self, f: impl FnOnce(&mut Self)) {
        self.indent += 1;
        f(self);
        self.indent -= 1;
    }
}

fn formals(fs: &[Formal]) -> String {
    fs.iter()
        .map(|f| match f {
            Formal::Scalar { mode, name, .. } => format!("{} {}", mode.as_str(), name),
            Formal::Server { def, dims, name, .. } => {
                let d: String = dims.iter().map(|e| format!("[{}]", expr(e))).collect();
                format!("server {def}{d} {name}")
            }
            Formal::Chan { name, .. } => format!("chan {name}"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn params(ps: &[(Mode, String)]) -> String {
    ps.iter()
        .map(|(m, n)| format!("{} {}", m.as_str(), n))
        .collect::<Vec<_>>()
        .join(", ")
}

fn print_server_def(w: &mut Writer, s: &ServerDef) {
    w.line(&format!("server {}({})", s.name, formals(&s.formals)));
    let sigs = s
        .interface
        .iter()
        .map(|c| format!("call {}({})", c.name, params(&c.params)))
        .collect::<Vec<_>>()
        .join(", ");
    w.indented(|w| w.line(&format!("interface({sigs}) to")));
    w.line("{");
    w.indented(|w| {
        for d in &s.decls {
            print_decl(w, d);
        }
        if let Some(init) = &s.initial {
            w.line("initial");
            w.indented(|w| print_process(w, init));
        }
        w.line("accept");
        w.line("{");
        w.indented(|w| {
            for arm in &s.arms {
                w.line(&format!("{} ? ({})", arm.call, params(&arm.params)));
                w.indented(|w| print_process(w, &arm.body));
            }
        });
        w.line("}");
        if let Some(fin) = &s.final_body {
            w.line("final");
            w.indented(|w| print_process(w, fin));
        }
    });
    w.line("}");
}

fn print_decl(w: &mut Writer, d: &Decl) {
    match d {
        Decl::Var { names, .. } => {
            let ns = names
                .iter()
                .map(|(n, sz)| match sz {
                    Some(e) => format!("{n}[{}]", expr(e)),
                    None => n.clone(),
                })
                .collect::<Vec<_>>()
                .join(", ");
            w.line(&format!("var {ns};"));
        }
        Decl::Chan { shape, names, .. } => {
            let sh: String = shape.iter().map(|e| format!("[{}]", expr(e))).collect();
            w.line(&format!("chan{sh} {};", names.join(", ")));
        }
    }
}

fn print_process(w: &mut Writer, p: &Process) {
    match &p.kind {
        ProcessKind::Skip => w.line("skip"),
        ProcessKind::Assign { target, value } => {
            w.line(&format!("{} := {}", lvalue(target), expr(value)));
        }
        ProcessKind::ChanOut { chan, value } => {
            w.line(&format!("{} ! {}", lvalue(chan), expr(value)));
        }
        ProcessKind::ChanIn { chan, target } => {
            w.line(&format!("{} ? {}", lvalue(chan), lvalue(target)));
        }
        ProcessKind::Seq(cs) => print_chain(w, cs, ";"),
        ProcessKind::LocalPar(cs) => print_chain(w, cs, "|"),
        ProcessKind::DistPar(cs) => print_chain(w, cs, "&"),
        ProcessKind::SeqRep {
            var, base, count, body, ..
        } => {
            w.line(&format!("seq {var}={} for {} do", expr(base), expr(count)));
            w.indented(|w| print_process(w, body));
        }
        ProcessKind::ParRep {
            var, base, count, body, ..
        } => {
            w.line(&format!("par {var}={} for {} do", expr(base), expr(count)));
            w.indented(|w| print_process(w, body));
        }
        ProcessKind::ServerSpec {
            name,
            def,
            args,
            dims,
            placement,
            body,
            ..
        } => {
            let a = args.iter().map(expr).collect::<Vec<_>>().join(", ");
            let d: String = dims.iter().map(|e| format!("[{}]", expr(e))).collect();
            let op = match placement {
                Placement::Disjoint => "&",
                Placement::Layered => "|",
            };
            w.line(&format!("server {name} is {def}({a}){d} {op}"));
            print_process(w, body);
        }
        ProcessKind::ServerCall {
            server,
            subscripts,
            call,
            actuals,
            ..
        } => {
            let subs: String = subscripts.iter().map(|e| format!("[{}]", expr(e))).collect();
            let a = actuals.iter().map(expr).collect::<Vec<_>>().join(", ");
            w.line(&format!("{server}{subs}.{call}({a})"));
        }
        ProcessKind::ProcCall { name, actuals } => {
            let a = actuals.iter().map(expr).collect::<Vec<_>>().join(", ");
            w.line(&format!("{name}({a})"));
        }
        ProcessKind::Block { decls, body } => {
            w.line("{");
            w.indented(|w| {
                for d in decls {
                    print_decl(w, d);
                }
                if let Some(b) = body {
                    print_process(w, b);
                }
            });
            w.line("}");
        }
    }
}

fn print_chain(w: &mut Writer, children: &[Process], sep: &str) {
    for (i, c) in children.iter().enumerate() {
        print_process(w, c);
        if i + 1 < children.len() {
            w.line(sep);
        }
    }
}

fn lvalue(lv: &LValue) -> String {
    let idx: String = lv.indices.iter().map(|e| format!("[{}]", expr(e))).collect();
    format!("{}{}", lv.name, idx)
}

fn expr(e: &Expr) -> String {
    prec_expr(e, 0)
}

/// prec 0: additive, prec 1: multiplicative, prec 2: atom.
fn prec_expr(e: &Expr, min: u8) -> String {
    match e {
        Expr::Int(v, _) => {
            if *v < 0 {
                format!("({v})")
            } else {
                v.to_string()
            }
        }
        Expr::Name(_, n, _) => n.clone(),
        Expr::Subscript(_, n, idx, _) => {
            let i: String = idx.iter().map(|e| format!("[{}]", prec_expr(e, 0))).collect();
            format!("{n}{i}")
        }
        Expr::Binary(op, l, r, _) => {
            let p = match op {
                BinOp::Add | BinOp::Sub => 0,
                BinOp::Mul | BinOp::Rem => 1,
            };
            // Right operand is printed at one level tighter since the
            // parser is left-associative.
            let s = format!(
                "{} {} {}",
                prec_expr(l, p),
                op.as_str(),
                prec_expr(r, p + 1)
            );
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parser::parse_source;

    fn roundtrip(src: &str) {
        let p1 = parse_source(src).expect("initial parse");
        let text = print_program(&p1);
        let p2 = parse_source(&text).unwrap_or_else(|e| panic!("reparse failed: {e}\n{text}"));
        assert!(program_eq(&p1, &p2), "round trip mismatch:\n{text}");
    }

    #[test]
    fn roundtrip_compositions() {
        roundtrip("P() ; Q() ; R()");
        roundtrip("P() & Q() & R()");
        roundtrip("{ P() | Q() } ; R()");
    }

    #[test]
    fn roundtrip_store_program() {
        roundtrip(
            "val N = 8
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
             server s is Store(0) &
             { var i; var v; seq i=0 for N do s.write(i, i) ; seq i=0 for N do s.read(i, v) }",
        );
    }

    #[test]
    fn roundtrip_expressions() {
        roundtrip("x := (a + b) * c - d rem (e + 1)");
        roundtrip("x := a - (b - c)");
        roundtrip("x := (-1) + a * (2 * b)");
    }

    #[test]
    fn roundtrip_channels_and_procs() {
        roundtrip(
            "proc node(server Matrix a, chan up, chan down, val n) is
             { var t[4]; up ! t ; down ? t ; a.set(0, t[0]) }
             { chan[2][3] h; par i=0 for 2 do node(m[i], h[0][i], h[1][i], 2) }",
        );
    }
}
