//! OpenQASM 2.0 output, and a parser for the small subset we emit plus a
//! handful of common single-qubit gates.

use std::f64::consts::PI;
use std::fmt::Write;

use crate::circuit::{Circuit, Gate, U3};
use crate::error::{Result, SynthError};

pub fn emit_qasm(c: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    writeln!(out, "qreg q[{}];", c.num_qubits()).unwrap();
    for g in c.gates() {
        match g {
            Gate::U3 { wire, gate } => writeln!(
                out,
                "u3({:.16e},{:.16e},{:.16e}) q[{wire}];",
                gate.theta, gate.phi, gate.lambda
            ),
            Gate::Cnot { control, target } => writeln!(out, "cx q[{control}],q[{target}];"),
        }
        .unwrap();
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> SynthError {
    SynthError::Parse {
        line,
        message: message.into(),
    }
}

/// Splits the source into `;`-terminated statements, each tagged with the
/// line it starts on. `//` comments are dropped.
fn statements(text: &str) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("");
        for ch in line.chars() {
            if current.trim().is_empty() && !ch.is_whitespace() {
                start = i + 1;
            }
            if ch == ';' {
                out.push((start, current.trim().to_string()));
                current.clear();
            } else {
                current.push(ch);
            }
        }
        current.push(' ');
    }
    if !current.trim().is_empty() {
        return Err(err(start, "statement is missing its terminating `;`"));
    }
    Ok(out)
}

/// Recursive-descent evaluator for parameter expressions: numbers, `pi`,
/// `+ - * /`, unary minus and parentheses.
struct Expr<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

impl Expr<'_> {
    fn eval(src: &str, line: usize) -> Result<f64> {
        let mut p = Expr {
            src: src.as_bytes(),
            pos: 0,
            line,
        };
        let v = p.sum()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(err(line, format!("unexpected text in expression `{src}`")));
        }
        Ok(v)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<f64> {
        let mut v = self.product()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            v = if op == b'+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            v = if op == b'*' { v * rhs } else { v / rhs };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(err(self.line, "unbalanced parentheses"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if word == "pi" {
                    Ok(PI)
                } else {
                    Err(err(self.line, format!("unknown identifier `{word}`")))
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let c = self.src[self.pos];
                    let exp_sign = (c == b'+' || c == b'-') && matches!(self.src[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                s.parse().map_err(|_| err(self.line, format!("bad number `{s}`")))
            }
            _ => Err(err(self.line, "expected a number, `pi` or `(`")),
        }
    }
}

/// Splits on commas that are not nested inside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

const REJECTED: &[&str] = &["measure", "gate", "opaque", "creg", "barrier", "if", "reset"];

/// Parses the supported OpenQASM 2.0 subset. Single-qubit gates are
/// normalized to `u3` up to global phase.
pub fn parse_qasm(text: &str) -> Result<Circuit> {
    let mut reg: Option<(String, usize)> = None;
    let mut gates = Vec::new();
    let mut saw_header = false;
    for (line, stmt) in statements(text)? {
        let keyword: String = stmt
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
            .collect();
        if REJECTED.contains(&keyword.as_str()) {
            return Err(err(line, format!("unsupported statement `{keyword}`")));
        }
        if stmt.is_empty() {
            continue;
        }
        match keyword.as_str() {
            "OPENQASM" => {
                if stmt.split_whitespace().nth(1) != Some("2.0") {
                    return Err(err(line, "only OPENQASM 2.0 is supported"));
                }
                saw_header = true;
                continue;
            }
            "include" => continue,
            "qreg" => {
                if reg.is_some() {
                    return Err(err(line, "only one qreg is supported"));
                }
                let decl = stmt["qreg".len()..].trim();
                let (name, size) = parse_index(decl, line)?;
                if size == 0 {
                    return Err(err(line, "qreg must have at least one qubit"));
                }
                reg = Some((name.to_string(), size));
                continue;
            }
            _ => {}
        }
        if !saw_header {
            return Err(err(line, "missing `OPENQASM 2.0;` header"));
        }
        let Some((reg_name, size)) = &reg else {
            return Err(err(line, "gate before qreg declaration"));
        };

        let rest = stmt[keyword.len()..].trim_start();
        let (params, args) = if let Some(inner) = rest.strip_prefix('(') {
            let close = matching_paren(inner).ok_or_else(|| err(line, "unbalanced parentheses"))?;
            let values = split_top_level(&inner[..close])
                .into_iter()
                .map(|p| Expr::eval(p, line))
                .collect::<Result<Vec<f64>>>()?;
            (values, inner[close + 1..].trim())
        } else {
            (Vec::new(), rest)
        };
        let wires = args
            .split(',')
            .map(|a| {
                let (name, idx) = parse_index(a.trim(), line)?;
                if name != reg_name {
                    return Err(err(line, format!("unknown register `{name}`")));
                }
                if idx >= *size {
                    return Err(err(line, format!("qubit index {idx} out of range")));
                }
                Ok(idx)
            })
            .collect::<Result<Vec<usize>>>()?;
        gates.push(build_gate(&keyword, &params, &wires, line)?);
    }
    let Some((_, n)) = reg else {
        return Err(err(0, "no qreg declared"));
    };
    Circuit::from_gates(n, gates).map_err(|e| err(0, e.to_string()))
}

fn matching_paren(s: &str) -> Option<usize> {
    let mut depth = 1;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_index(s: &str, line: usize) -> Result<(&str, usize)> {
    let bad = || err(line, format!("expected `name[index]`, got `{s}`"));
    let open = s.find('[').ok_or_else(bad)?;
    let close = s.strip_suffix(']').ok_or_else(bad)?;
    let idx = close[open + 1..].trim().parse().map_err(|_| bad())?;
    Ok((s[..open].trim(), idx))
}

fn build_gate(name: &str, params: &[f64], wires: &[usize], line: usize) -> Result<Gate> {
    let expect = |np: usize, nw: usize| {
        if params.len() != np || wires.len() != nw {
            Err(err(
                line,
                format!(
                    "`{name}` takes {np} parameters and {nw} qubits, got {} and {}",
                    params.len(),
                    wires.len()
                ),
            ))
        } else {
            Ok(())
        }
    };
    let one = |g: U3| Gate::U3 {
        wire: wires[0],
        gate: g,
    };
    let gate = match name {
        "u3" | "U" => {
            expect(3, 1)?;
            one(U3::new(params[0], params[1], params[2]))
        }
        "u2" => {
            expect(2, 1)?;
            one(U3::new(PI / 2.0, params[0], params[1]))
        }
        "u1" | "rz" => {
            expect(1, 1)?;
            one(U3::new(0.0, 0.0, params[0]))
        }
        "rx" => {
            expect(1, 1)?;
            one(U3::new(params[0], -PI / 2.0, PI / 2.0))
        }
        "ry" => {
            expect(1, 1)?;
            one(U3::new(params[0], 0.0, 0.0))
        }
        "h" => {
            expect(0, 1)?;
            one(U3::new(PI / 2.0, 0.0, PI))
        }
        "x" => {
            expect(0, 1)?;
            one(U3::new(PI, 0.0, PI))
        }
        "cx" | "CX" => {
            expect(0, 2)?;
            if wires[0] == wires[1] {
                return Err(err(line, "cx control and target must differ"));
            }
            Gate::cnot(wires[0], wires[1])
        }
        other => return Err(err(line, format!("unsupported gate `{other}`"))),
    };
    Ok(gate)
}
