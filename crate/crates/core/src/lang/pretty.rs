//! Canonical pretty-printer. `parse(pretty(u))` yields a tree equal to `u` up to positions.

use super::ast::*;
use std::fmt::Write;

pub fn pretty(unit: &SourceUnit) -> String {
    let mut out = String::new();
    for (i, f) in unit.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let ret = match f.ret {
            ReturnType::Int => "int",
            ReturnType::Void => "void",
        };
        let params: Vec<String> = f.params.iter().map(|p| format!("int {p}")).collect();
        let _ = writeln!(out, "{ret} {}({}) {{", f.name, params.join(", "));
        stmts(&mut out, &f.body, 1);
        out.push_str("}\n");
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn stmts(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::DeclInt { name, init: None } => {
            let _ = writeln!(out, "int {name};");
        }
        StmtKind::DeclInt { name, init: Some(e) } => {
            let _ = writeln!(out, "int {name} = {};", expr(e));
        }
        StmtKind::DeclArray { name, len } => {
            let _ = writeln!(out, "int {name}[{len}];");
        }
        StmtKind::DeclInput { name } => {
            let _ = writeln!(out, "int {name} = input();");
        }
        StmtKind::DeclInputArray { name, len } => {
            let _ = writeln!(out, "int {name}[{len}] = input_array({len});");
        }
        StmtKind::Assign { target: LValue::Var(v), value } => {
            let _ = writeln!(out, "{v} = {};", expr(value));
        }
        StmtKind::Assign { target: LValue::Index(a, i), value } => {
            let _ = writeln!(out, "{a}[{}] = {};", expr(i), expr(value));
        }
        StmtKind::If { cond, then_branch, else_branch } => {
            let _ = writeln!(out, "if ({}) {{", expr(cond));
            stmts(out, then_branch, depth + 1);
            indent(out, depth);
            match else_branch {
                Some(e) => {
                    out.push_str("} else {\n");
                    stmts(out, e, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", expr(cond));
            stmts(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Switch { scrutinee, cases, default } => {
            let _ = writeln!(out, "switch ({}) {{", expr(scrutinee));
            for c in cases {
                indent(out, depth);
                let _ = writeln!(out, "case {}:", c.value);
                stmts(out, &c.body, depth + 1);
            }
            if let Some(d) = default {
                indent(out, depth);
                out.push_str("default:\n");
                stmts(out, d, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::ExprStmt(e) => {
            let _ = writeln!(out, "{};", expr(e));
        }
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", expr(e));
        }
        StmtKind::Assert(e) => {
            let _ = writeln!(out, "assert({});", expr(e));
        }
        StmtKind::Error => out.push_str("error();\n"),
        StmtKind::Halt => out.push_str("halt;\n"),
        StmtKind::Block(b) => {
            out.push_str("{\n");
            stmts(out, b, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Var(v) => v.clone(),
        ExprKind::Index(a, i) => format!("{a}[{}]", expr(i)),
        ExprKind::Unary(op, inner) => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "!",
            };
            match inner.kind {
                ExprKind::Binary(..) | ExprKind::Unary(..) => format!("{sym}({})", expr(inner)),
                _ => format!("{sym}{}", expr(inner)),
            }
        }
        ExprKind::Binary(op, a, b) => {
            let wrap = |child: &Expr, right: bool| match &child.kind {
                ExprKind::Binary(cop, ..)
                    if cop.precedence() < op.precedence()
                        || (right && cop.precedence() == op.precedence()) =>
                {
                    format!("({})", expr(child))
                }
                _ => expr(child),
            };
            format!("{} {} {}", wrap(a, false), op.symbol(), wrap(b, true))
        }
        ExprKind::Call(f, args) => {
            let args: Vec<String> = args.iter().map(expr).collect();
            format!("{f}({})", args.join(", "))
        }
    }
}
