//! Concrete syntax: the indentation-sensitive `allocate`/`measure` format.
//!
//! ```text
//! @gateset cliffords
//! allocate q1:
//!   allocate q2:
//!     h q2
//!     cx q2 q1
//!   measure done
//! measure repeat_until_zero
//! ```
//!
//! Any strictly greater indentation opens a kernel body; the `measure` line
//! must sit at exactly the column of its `allocate`. Sibling gates may share
//! a line separated by `;`. Comments run from `#` to end of line. Files use
//! the `.qk` extension; LF and CRLF are both accepted.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::ir::{
    CallbackArg, CallbackRef, GateApplication, Instruction, Kernel, Param, Program, QubitId,
};

#[derive(Clone, PartialEq, Debug, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

/// A parsed source file: an optional `@gateset` header and the root kernel.
/// When the header is absent, the caller must supply the gate set name.
#[derive(Clone, PartialEq, Debug)]
pub struct SourceProgram {
    pub gateset: Option<String>,
    pub kernel: Kernel,
}

impl SourceProgram {
    /// Resolves to a [`Program`], preferring `override_gateset` over the
    /// file header.
    pub fn resolve(self, override_gateset: Option<&str>) -> Option<Program> {
        let name = override_gateset.map(str::to_string).or(self.gateset)?;
        Some(Program::new(name, self.kernel))
    }
}

/// Serialization style. `Lines` emits one gate per line; `Compact` joins
/// runs of sibling gates that share a gate name with `"; "`, which keeps
/// each transversal run of a compiled program on a single line.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Style {
    #[default]
    Lines,
    Compact,
}

/// Parses a source file (optional header plus one kernel).
pub fn parse(text: &str) -> Result<SourceProgram, ParseError> {
    let lines = lex(text)?;
    let mut pos = 0;
    let mut gateset = None;
    if let Some(first) = lines.first() {
        if let Some(rest) = first.content.strip_prefix('@') {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("gateset"), Some(name), None) => gateset = Some(name.to_string()),
                _ => {
                    return Err(ParseError::new(
                        first.number,
                        first.indent + 1,
                        "malformed header; expected `@gateset <name>`",
                    ))
                }
            }
            pos = 1;
        }
    }
    let (kernel, next) = parse_kernel_at(&lines, pos)?;
    if next != lines.len() {
        let l = &lines[next];
        return Err(ParseError::new(
            l.number,
            l.indent + 1,
            "trailing content after the root kernel",
        ));
    }
    Ok(SourceProgram { gateset, kernel })
}

/// Parses a bare kernel (no header permitted).
pub fn parse_kernel(text: &str) -> Result<Kernel, ParseError> {
    let lines = lex(text)?;
    let (kernel, next) = parse_kernel_at(&lines, 0)?;
    if next != lines.len() {
        let l = &lines[next];
        return Err(ParseError::new(
            l.number,
            l.indent + 1,
            "trailing content after the root kernel",
        ));
    }
    Ok(kernel)
}

struct Line {
    number: usize,
    indent: usize,
    content: String,
}

fn lex(text: &str) -> Result<Vec<Line>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let no_comment = match raw.find('#') {
            Some(at) => &raw[..at],
            None => raw,
        };
        let trimmed_end = no_comment.trim_end_matches(['\r', ' ', '\t']);
        let mut indent = 0;
        for ch in trimmed_end.chars() {
            match ch {
                ' ' => indent += 1,
                '\t' => {
                    return Err(ParseError::new(
                        number,
                        indent + 1,
                        "tabs are not allowed in indentation",
                    ))
                }
                _ => break,
            }
        }
        let content = trimmed_end[indent..].to_string();
        if content.is_empty() {
            continue;
        }
        out.push(Line {
            number,
            indent,
            content,
        });
    }
    Ok(out)
}

fn parse_kernel_at(lines: &[Line], start: usize) -> Result<(Kernel, usize), ParseError> {
    let Some(open) = lines.get(start) else {
        return Err(ParseError::new(
            1,
            1,
            "expected `allocate`, found end of input",
        ));
    };
    let col = open.indent;
    let qubit = parse_allocate_line(open)?;
    let mut body = Vec::new();
    let mut pos = start + 1;
    loop {
        let Some(line) = lines.get(pos) else {
            return Err(ParseError::new(
                open.number,
                col + 1,
                format!("missing `measure` for `allocate {qubit}`"),
            ));
        };
        if line.indent > col {
            if line.content.starts_with("allocate") {
                let (k, next) = parse_kernel_at(lines, pos)?;
                body.push(Instruction::Kernel(k));
                pos = next;
            } else if line.content.starts_with("measure") {
                return Err(ParseError::new(
                    line.number,
                    line.indent + 1,
                    "`measure` does not align with any open `allocate`",
                ));
            } else {
                for g in parse_gate_line(line)? {
                    body.push(Instruction::Gate(g));
                }
                pos += 1;
            }
        } else if line.indent == col {
            if line.content.starts_with("measure") {
                let callback = parse_measure_line(line)?;
                return Ok((Kernel::new(qubit, body, callback), pos + 1));
            }
            return Err(ParseError::new(
                line.number,
                line.indent + 1,
                format!("expected `measure` at the column of `allocate {qubit}`"),
            ));
        } else {
            return Err(ParseError::new(
                line.number,
                line.indent + 1,
                format!(
                    "missing `measure` for `allocate {qubit}` (line {})",
                    open.number
                ),
            ));
        }
    }
}

fn parse_allocate_line(line: &Line) -> Result<QubitId, ParseError> {
    let err = |col: usize, msg: &str| {
        ParseError::new(line.number, line.indent + col + 1, msg.to_string())
    };
    let Some(rest) = line.content.strip_prefix("allocate") else {
        return Err(err(0, "expected `allocate`"));
    };
    if !rest.starts_with([' ', '\t']) {
        return Err(err("allocate".len(), "expected a space after `allocate`"));
    }
    let rest = rest.trim_start();
    let Some(colon) = rest.find(':') else {
        return Err(err(line.content.len(), "expected `:` after the qubit name"));
    };
    let name = rest[..colon].trim();
    if !QubitId::is_valid_token(name) {
        return Err(err(
            "allocate ".len(),
            &format!("invalid qubit name `{name}`"),
        ));
    }
    if !rest[colon + 1..].trim().is_empty() {
        return Err(err(line.content.len(), "unexpected text after `:`"));
    }
    Ok(QubitId::new(name))
}

fn parse_measure_line(line: &Line) -> Result<CallbackRef, ParseError> {
    let err = |msg: String| ParseError::new(line.number, line.indent + 1, msg);
    let Some(rest) = line.content.strip_prefix("measure") else {
        return Err(err("expected `measure`".to_string()));
    };
    let rest = rest.trim();
    if rest.is_empty() {
        return Err(err("expected a callback name after `measure`".to_string()));
    }
    let (name, args_text) = match rest.find('(') {
        None => (rest, None),
        Some(open) => {
            let Some(close) = rest.rfind(')') else {
                return Err(err("unclosed `(` in callback arguments".to_string()));
            };
            if !rest[close + 1..].trim().is_empty() {
                return Err(err("unexpected text after `)`".to_string()));
            }
            (rest[..open].trim(), Some(&rest[open + 1..close]))
        }
    };
    if !QubitId::is_valid_token(name) {
        return Err(err(format!("invalid callback name `{name}`")));
    }
    let mut args = Vec::new();
    if let Some(text) = args_text {
        for tok in text.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                return Err(err("empty callback argument".to_string()));
            }
            args.push(match parse_number(tok) {
                Some(v) => CallbackArg::Num(Param::with_text(v, tok)),
                None => {
                    if !QubitId::is_valid_token(tok) {
                        return Err(err(format!("invalid callback argument `{tok}`")));
                    }
                    CallbackArg::Qubit(QubitId::new(tok))
                }
            });
        }
    }
    Ok(CallbackRef::new(name, args))
}

/// `pi` and `-pi` are accepted as literals alongside decimal numbers.
fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "pi" => Some(PI),
        "-pi" => Some(-PI),
        _ => tok.parse::<f64>().ok(),
    }
}

fn parse_gate_line(line: &Line) -> Result<Vec<GateApplication>, ParseError> {
    let mut gates = Vec::new();
    let mut offset = 0;
    for segment in line.content.split(';') {
        gates.push(parse_gate_segment(line, segment, offset)?);
        offset += segment.len() + 1;
    }
    Ok(gates)
}

fn parse_gate_segment(
    line: &Line,
    segment: &str,
    offset: usize,
) -> Result<GateApplication, ParseError> {
    let err =
        |at: usize, msg: String| ParseError::new(line.number, line.indent + offset + at + 1, msg);
    let trimmed = segment.trim();
    let lead = segment.len() - segment.trim_start().len();
    if trimmed.is_empty() {
        return Err(err(lead, "empty gate between `;`".to_string()));
    }
    // Gate name runs up to whitespace or an opening paren.
    let name_end = trimmed
        .find(|c: char| c.is_whitespace() || c == '(')
        .unwrap_or(trimmed.len());
    let name = &trimmed[..name_end];
    if !QubitId::is_valid_token(name) {
        return Err(err(lead, format!("invalid gate name `{name}`")));
    }
    let mut rest = trimmed[name_end..].trim_start();
    let mut params = Vec::new();
    if let Some(after) = rest.strip_prefix('(') {
        let Some(close) = after.find(')') else {
            return Err(err(
                lead + name_end,
                "unclosed `(` in gate parameters".to_string(),
            ));
        };
        for tok in after[..close].split(',') {
            let tok = tok.trim();
            let Some(v) = parse_number(tok) else {
                return Err(err(
                    lead + name_end,
                    format!("invalid gate parameter `{tok}`"),
                ));
            };
            params.push(Param::with_text(v, tok));
        }
        rest = after[close + 1..].trim_start();
    }
    let mut targets = Vec::new();
    for tok in rest.split_whitespace() {
        if !QubitId::is_valid_token(tok) {
            return Err(err(lead, format!("invalid qubit name `{tok}`")));
        }
        targets.push(QubitId::new(tok));
    }
    if targets.is_empty() {
        return Err(err(lead, format!("gate `{name}` names no target qubits")));
    }
    Ok(GateApplication {
        gate: name.to_string(),
        params,
        targets,
    })
}

/// Serializes a program in canonical form, including its gate-set header.
pub fn serialize(program: &Program, style: Style) -> String {
    let mut out = format!("@gateset {}\n", program.gateset);
    out.push_str(&serialize_kernel(&program.kernel, style));
    out
}

/// Serializes a bare kernel: two-space indentation per nesting level.
pub fn serialize_kernel(kernel: &Kernel, style: Style) -> String {
    let mut out = String::new();
    write_kernel(kernel, 0, style, &mut out);
    out
}

fn write_kernel(kernel: &Kernel, depth: usize, style: Style, out: &mut String) {
    let pad = "  ".repeat(depth);
    let _ = fmt::Write::write_fmt(out, format_args!("{pad}allocate {}:\n", kernel.qubit));
    let inner = "  ".repeat(depth + 1);
    let mut gate_run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, out: &mut String| {
        if run.is_empty() {
            return;
        }
        match style {
            Style::Compact => {
                let _ = fmt::Write::write_fmt(out, format_args!("{inner}{}\n", run.join("; ")));
            }
            Style::Lines => {
                for g in run.iter() {
                    let _ = fmt::Write::write_fmt(out, format_args!("{inner}{g}\n"));
                }
            }
        }
        run.clear();
    };
    let mut run_gate: Option<&str> = None;
    for inst in &kernel.body {
        match inst {
            Instruction::Gate(g) => {
                if run_gate.is_some_and(|name| name != g.gate) {
                    flush(&mut gate_run, out);
                }
                run_gate = Some(&g.gate);
                gate_run.push(g.to_string());
            }
            Instruction::Kernel(k) => {
                flush(&mut gate_run, out);
                run_gate = None;
                write_kernel(k, depth + 1, style, out);
            }
        }
    }
    flush(&mut gate_run, out);
    let _ = fmt::Write::write_fmt(out, format_args!("{pad}measure {}\n", kernel.callback));
}
