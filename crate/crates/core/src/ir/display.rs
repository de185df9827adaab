use std::fmt::Write;

use super::*;

pub(super) fn dump_function(f: &SsaFunction) -> String {
    let mut out = String::new();
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| match p.value {
            Some(v) => format!("{}: {} = {}", p.name, p.ty, operand(f, &Operand::Value(v))),
            None => format!("{}: {}", p.name, p.ty),
        })
        .collect();
    let _ = write!(
        out,
        "function {}({}) {}",
        f.id,
        params.join(", "),
        f.visibility.as_str()
    );
    if f.is_payable {
        out.push_str(" payable");
    }
    if let Some(r) = f.returns {
        let _ = write!(out, " returns {r}");
    }
    out.push('\n');
    for b in &f.blocks {
        let _ = writeln!(out, "{}:", b.id);
        for i in &b.instrs {
            let _ = writeln!(out, "    {}", instr(f, &i.kind));
        }
    }
    out
}

pub(super) fn cfg_dot(f: &SsaFunction) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", f.id);
    out.push_str("    node [shape=box, fontname=monospace];\n");
    for b in &f.blocks {
        let mut label = format!("{}:\\l", b.id);
        for i in &b.instrs {
            label.push_str(&instr(f, &i.kind).replace('"', "\\\""));
            label.push_str("\\l");
        }
        let _ = writeln!(out, "    {} [label=\"{}\"];", b.id, label);
    }
    for b in &f.blocks {
        for s in b.successors() {
            let _ = writeln!(out, "    {} -> {};", b.id, s);
        }
    }
    out.push_str("}\n");
    out
}

fn operand(f: &SsaFunction, op: &Operand) -> String {
    match op {
        Operand::Var(v) => format!("${}", f.vars[v.index()].name),
        Operand::Value(v) => format!("%{}", f.value_name(*v)),
        Operand::Const(c) => c.to_string(),
        Operand::Env(e) => e.as_str().to_string(),
        Operand::Storage(s) => format!("@{}", s.0),
    }
}

fn dest(f: &SsaFunction, d: &Dest) -> String {
    match d {
        Dest::Var(v) => format!("${}", f.vars[v.index()].name),
        Dest::Value(v) => format!("%{}", f.value_name(*v)),
        Dest::Storage(s) => format!("@{}", s.0),
        Dest::MapStore { slot, key } => format!("@{}[{}]", slot.0, operand(f, key)),
        Dest::Discard => "_".to_string(),
    }
}

fn rvalue(f: &SsaFunction, r: &Rvalue) -> String {
    match r {
        Rvalue::Use(op) => operand(f, op),
        Rvalue::Binary { op, lhs, rhs, ty } => {
            format!(
                "{} {} {} : {ty}",
                operand(f, lhs),
                op.symbol(),
                operand(f, rhs)
            )
        }
        Rvalue::Unary { op, operand: o, ty } => format!("{}{} : {ty}", op.symbol(), operand(f, o)),
        Rvalue::MapLoad { slot, key } => format!("@{}[{}]", slot.0, operand(f, key)),
        Rvalue::Call { callee, args } => {
            let args: Vec<String> = args.iter().map(|a| operand(f, a)).collect();
            format!("call {callee}({})", args.join(", "))
        }
    }
}

fn instr(f: &SsaFunction, k: &InstrKind) -> String {
    match k {
        InstrKind::Jump(t) => format!("JUMP {t}"),
        InstrKind::JumpI {
            cond,
            then_to,
            else_to,
            loop_exit,
        } => {
            let tag = if *loop_exit { " loop" } else { "" };
            format!("JUMPI {} ? {then_to} : {else_to}{tag}", operand(f, cond))
        }
        InstrKind::JumpDest => "JUMPDEST".to_string(),
        InstrKind::Return(Some(op)) => format!("RETURN {}", operand(f, op)),
        InstrKind::Return(None) => "RETURN".to_string(),
        InstrKind::Revert(Some(m)) => format!("REVERT {m:?}"),
        InstrKind::Revert(None) => "REVERT".to_string(),
        InstrKind::Stop => "STOP".to_string(),
        InstrKind::Assign { dest: d, value } => format!("{} = {}", dest(f, d), rvalue(f, value)),
        InstrKind::ExtCall {
            kind,
            target,
            value,
            checked,
            result,
        } => {
            let mut s = format!("EXTCALL {} {}", kind.as_str(), operand(f, target));
            if let Some(v) = value {
                let _ = write!(s, " value={}", operand(f, v));
            }
            s.push_str(if *checked { " checked" } else { " unchecked" });
            if let Some(r) = result {
                let _ = write!(s, " -> {}", dest(f, r));
            }
            s
        }
        InstrKind::Log { event, args } => {
            let args: Vec<String> = args.iter().map(|a| operand(f, a)).collect();
            format!("LOG {event}({})", args.join(", "))
        }
        InstrKind::Phi { dest: d, incoming } => {
            let inc: Vec<String> = incoming
                .iter()
                .map(|(b, op)| format!("{b}: {}", operand(f, op)))
                .collect();
            format!("{} = PHI [{}]", dest(f, d), inc.join(", "))
        }
    }
}
