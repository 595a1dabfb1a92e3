//! SMT-LIB2 text protocol over a solver subprocess (QF_BV, 32-bit bitvectors).

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use super::{Model, SolverVerdict, UnknownReason};
use crate::symcore::{Constraint, SymbolId};

/// Renders the script for one query, without the session preamble.
pub fn query_script(c: &Constraint) -> String {
    let mut out = String::from("(push 1)\n");
    for s in c.symbols() {
        out.push_str(&format!("(declare-fun |{s}| () (_ BitVec 32))\n"));
    }
    for conj in c.conjuncts() {
        out.push_str(&format!("(assert {})\n", conj.to_smtlib()));
    }
    out.push_str("(check-sat)\n");
    out
}

pub const PREAMBLE: &str = "(set-option :produce-models true)\n(set-logic QF_BV)\n";

/// A parsed s-expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

/// Reads one complete s-expression (or bare atom) from `r`.
pub fn read_sexp(r: &mut impl BufRead) -> io::Result<Sexp> {
    let mut text = String::new();
    let mut depth = 0i32;
    let mut in_quote = false;
    let mut in_string = false;
    let mut started = false;
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "solver closed its output"));
        }
        for ch in line.chars() {
            match ch {
                '|' if !in_string => in_quote = !in_quote,
                '"' if !in_quote => in_string = !in_string,
                '(' if !in_quote && !in_string => {
                    depth += 1;
                    started = true;
                }
                ')' if !in_quote && !in_string => depth -= 1,
                c if !c.is_whitespace() => started = true,
                _ => {}
            }
        }
        text.push_str(&line);
        if started && depth <= 0 && !in_quote && !in_string {
            break;
        }
    }
    parse_sexp(&text).ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("malformed response `{}`", text.trim())))
}

pub fn parse_sexp(text: &str) -> Option<Sexp> {
    let chars: Vec<char> = text.chars().collect();
    let mut at = 0;
    let e = parse_at(&chars, &mut at)?;
    Some(e)
}

fn parse_at(chars: &[char], at: &mut usize) -> Option<Sexp> {
    while *at < chars.len() && chars[*at].is_whitespace() {
        *at += 1;
    }
    match chars.get(*at)? {
        '(' => {
            *at += 1;
            let mut items = Vec::new();
            loop {
                while *at < chars.len() && chars[*at].is_whitespace() {
                    *at += 1;
                }
                match chars.get(*at)? {
                    ')' => {
                        *at += 1;
                        return Some(Sexp::List(items));
                    }
                    _ => items.push(parse_at(chars, at)?),
                }
            }
        }
        ')' => None,
        '|' => {
            let start = *at + 1;
            let len = chars[start..].iter().position(|c| *c == '|')?;
            *at = start + len + 1;
            Some(Sexp::Atom(chars[start..start + len].iter().collect()))
        }
        '"' => {
            let start = *at;
            *at += 1;
            while *at < chars.len() && chars[*at] != '"' {
                *at += 1;
            }
            *at += 1;
            Some(Sexp::Atom(chars[start..(*at).min(chars.len())].iter().collect()))
        }
        _ => {
            let start = *at;
            while *at < chars.len() && !chars[*at].is_whitespace() && chars[*at] != '(' && chars[*at] != ')' {
                *at += 1;
            }
            Some(Sexp::Atom(chars[start..*at].iter().collect()))
        }
    }
}

/// Decodes `#x…`, `#b…` or `(_ bvN 32)` to a signed 32-bit value.
pub fn bitvector_value(e: &Sexp) -> Option<i32> {
    match e {
        Sexp::Atom(a) if a.starts_with("#x") => u32::from_str_radix(&a[2..], 16).ok().map(|v| v as i32),
        Sexp::Atom(a) if a.starts_with("#b") => u32::from_str_radix(&a[2..], 2).ok().map(|v| v as i32),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(u), Sexp::Atom(bv), Sexp::Atom(_w)] if u == "_" && bv.starts_with("bv") => {
                bv[2..].parse::<u64>().ok().map(|v| v as u32 as i32)
            }
            _ => None,
        },
        _ => None,
    }
}

/// Extracts `(define-fun name () (_ BitVec 32) value)` entries from a `(get-model)` reply.
pub fn parse_model(reply: &Sexp) -> Option<Model> {
    let Sexp::List(items) = reply else { return None };
    let mut model = Model::new();
    for item in items {
        match item {
            Sexp::Atom(a) if a == "model" => continue,
            Sexp::List(def) => match def.as_slice() {
                [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), _sort, value] if kw == "define-fun" && args.is_empty() => {
                    let sym: SymbolId = name.parse().ok()?;
                    model.insert(sym, bitvector_value(value)?);
                }
                _ => return None,
            },
            _ => return None,
        }
    }
    Some(model)
}

/// A long-lived solver process; one per engine run.
pub struct ExternalSolver {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalSolver {
    pub fn spawn(command: &str) -> io::Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty solver command"))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        stdin.write_all(PREAMBLE.as_bytes())?;
        stdin.flush()?;
        Ok(ExternalSolver { child, stdin, stdout })
    }

    fn exchange(&mut self, c: &Constraint) -> io::Result<SolverVerdict> {
        self.stdin.write_all(query_script(c).as_bytes())?;
        self.stdin.flush()?;
        let verdict = match read_sexp(&mut self.stdout)? {
            Sexp::Atom(a) if a == "sat" => {
                self.stdin.write_all(b"(get-model)\n")?;
                self.stdin.flush()?;
                let reply = read_sexp(&mut self.stdout)?;
                let mut model = parse_model(&reply)
                    .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "unreadable model"))?;
                // Symbols the solver left unconstrained default to 0.
                for s in c.symbols() {
                    model.entry(s).or_insert(0);
                }
                SolverVerdict::Sat(model)
            }
            Sexp::Atom(a) if a == "unsat" => SolverVerdict::Unsat,
            Sexp::Atom(a) if a == "unknown" => SolverVerdict::Unknown(UnknownReason::Timeout),
            other => {
                return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unexpected reply {other:?}")));
            }
        };
        self.stdin.write_all(b"(pop 1)\n")?;
        self.stdin.flush()?;
        Ok(verdict)
    }

    pub fn check_sat(&mut self, c: &Constraint) -> SolverVerdict {
        self.exchange(c)
            .unwrap_or_else(|e| SolverVerdict::Unknown(UnknownReason::ExternalProcessFailure(e.to_string())))
    }
}

impl Drop for ExternalSolver {
    fn drop(&mut self) {
        let _ = self.stdin.write_all(b"(exit)\n");
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::{CmpOp, SymExpr};

    #[test]
    fn script_declares_and_asserts() {
        let c = Constraint::new(vec![SymExpr::cmp(CmpOp::Eq, SymExpr::var("x"), SymExpr::int(20))]);
        assert_eq!(
            query_script(&c),
            "(push 1)\n(declare-fun |x| () (_ BitVec 32))\n(assert (= |x| (_ bv20 32)))\n(check-sat)\n"
        );
    }

    #[test]
    fn parses_models_in_common_notations() {
        let reply = parse_sexp(
            "(\n  (define-fun |x| () (_ BitVec 32)\n    #x00000014)\n  (define-fun |a[1]| () (_ BitVec 32) #xffffffff)\n  (define-fun y () (_ BitVec 32) (_ bv7 32))\n)",
        )
        .unwrap();
        let m = parse_model(&reply).unwrap();
        assert_eq!(m[&SymbolId::scalar("x")], 20);
        assert_eq!(m[&SymbolId::element("a", 1)], -1);
        assert_eq!(m[&SymbolId::scalar("y")], 7);
        assert_eq!(bitvector_value(&Sexp::Atom("#b101".into())), Some(5));
    }

    #[test]
    fn reads_multiline_sexp() {
        let mut input = io::Cursor::new("sat\n(\n (define-fun |x| () (_ BitVec 32)\n  #x00000001)\n)\n");
        assert_eq!(read_sexp(&mut input).unwrap(), Sexp::Atom("sat".into()));
        let reply = read_sexp(&mut input).unwrap();
        assert_eq!(parse_model(&reply).unwrap()[&SymbolId::scalar("x")], 1);
    }
}
