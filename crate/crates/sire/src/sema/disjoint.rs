//! Parallel disjointness: no free variable may be written by one component
//! of a parallel composition and used by a sibling. Server state is exempt
//! since call serialisation is the server's job; channels are exempt since
//! rendezvous already synchronises them.

use crate::diag::Diagnostic;
use crate::sema::elab::{NodeId, NodeKind, Program};
use crate::sema::freevars::FreeSet;

pub fn check_disjoint(p: &Program, free: &[FreeSet]) -> Result<(), Vec<Diagnostic>> {
    let mut errors = Vec::new();
    walk(p, p.main, free, &mut errors);
    for inst in &p.instances {
        if let Some(id) = inst.initial {
            walk(p, id, free, &mut errors);
        }
        for arm in &inst.arms {
            walk(p, arm.body, free, &mut errors);
        }
        if let Some(id) = inst.final_body {
            walk(p, id, free, &mut errors);
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn walk(p: &Program, id: NodeId, free: &[FreeSet], errors: &mut Vec<Diagnostic>) {
    match p.kind(id) {
        NodeKind::Seq(children) => {
            for &c in children {
                walk(p, c, free, errors);
            }
        }
        NodeKind::LocalPar(children) | NodeKind::DistPar(children) => {
            for (i, a) in children.iter().enumerate() {
                for b in children.iter().skip(i + 1) {
                    check_pair(p, &free[a.node.index()], &free[b.node.index()], errors);
                }
            }
            for c in children {
                walk(p, c.node, free, errors);
            }
        }
        NodeKind::SeqRep { body, .. } => walk(p, *body, free, errors),
        NodeKind::ParRep { var, body, .. } => {
            // Every instance runs the same body, so a write to any free
            // data variable conflicts with its siblings.
            for (name, flags) in &free[body.node.index()] {
                if name == var {
                    continue;
                }
                if flags.written && p.name_kind(name).is_data() {
                    errors.push(Diagnostic::new(
                        flags.wpos,
                        format!(
                            "variable `{}` is written by every instance of a replicated parallel process",
                            p.src_name(name)
                        ),
                    ));
                }
            }
            walk(p, body.node, free, errors);
        }
        NodeKind::ServerSpec { body, .. } => walk(p, body.node, free, errors),
        NodeKind::Block { body: Some(b), .. } => walk(p, *b, free, errors),
        _ => {}
    }
}

fn check_pair(p: &Program, a: &FreeSet, b: &FreeSet, errors: &mut Vec<Diagnostic>) {
    for (name, fa) in a {
        if !p.name_kind(name).is_data() {
            continue;
        }
        if let Some(fb) = b.get(name) {
            let src = p.src_name(name);
            if fa.written && (fb.read || fb.written) {
                errors.push(Diagnostic::new(
                    fa.wpos,
                    format!(
                        "variable `{src}` is written by a parallel component here and used by a sibling at {}",
                        if fb.written { fb.wpos } else { fb.rpos }
                    ),
                ));
            } else if fb.written && fa.read {
                errors.push(Diagnostic::new(
                    fb.wpos,
                    format!(
                        "variable `{src}` is written by a parallel component here and used by a sibling at {}",
                        fa.rpos
                    ),
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::frontend::parser::parse_source;
    use crate::sema::resolve::resolve;
    use crate::sema::statics::check_static;

    fn check(src: &str) -> Result<(), Vec<String>> {
        let p = parse_source(src).expect("parse");
        let t = resolve(&p).map_err(|es| es.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
        let e = check_static(&p, &t)
            .map_err(|es| es.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
        super::check_disjoint(&e.program, &e.free)
            .map_err(|es| es.iter().map(|e| e.to_string()).collect::<Vec<_>>())
    }

    #[test]
    fn disjoint_targets_ok() {
        assert!(check("{ var x; var y; { x := 1 } | { y := 2 } }").is_ok());
    }

    #[test]
    fn same_target_conflicts() {
        let errs = check("{ var x; { x := 1 } | { x := 2 } }").unwrap_err();
        assert!(errs[0].contains("`x`"), "{errs:?}");
    }

    #[test]
    fn write_read_conflicts() {
        let errs = check("{ var x; var y; { x := 1 } & { y := x } }").unwrap_err();
        assert!(errs[0].contains("`x`"));
    }

    #[test]
    fn server_calls_are_exempt() {
        let src = "
            server Store(val init)
              interface(call write(val i, val v)) to
            { var data[8];
              accept { write ? (val i, val v) data[i] := v }
            }
            server s is Store(0) &
            { var i; seq i=0 for 4 do s.write(i, i) }";
        assert!(check(src).is_ok());
    }

    #[test]
    fn replicated_write_to_shared_var_conflicts() {
        let errs = check("{ var x; par i=0 for 3 do x := i }").unwrap_err();
        assert!(errs[0].contains("replicated"));
    }

    #[test]
    fn replicated_body_with_local_state_ok() {
        assert!(check("par i=0 for 3 do { var t; t := i * 2 }").is_ok());
    }

    #[test]
    fn parallel_reads_are_fine() {
        assert!(check("{ var x; var a; var b; x := 5 ; { { a := x } | { b := x } } }").is_ok());
    }
}
