//! Plain-text MDP and policy files.
//!
//! MDP file:
//!
//! ```text
//! # comment
//! mdp <n_states> <n_actions> <beta>
//! <i> <j> <a> <p> <r>      one line per transition with p > 0
//! ```
//!
//! Policy file:
//!
//! ```text
//! policy <n_states> <n_actions>
//! <s> <a> <prob>           omitted pairs have probability 0
//! ```
//!
//! `#` starts a comment anywhere on a line. Numbers are written with the
//! shortest representation that parses back to the same `f64`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use markov_vi::policy_eval::{FiniteMdp, Policy};

use crate::error::{BenchError, Result};

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self {
            path,
            inner: text.lines().enumerate(),
        }
    }

    fn err(&self, line: usize, reason: impl Into<String>) -> BenchError {
        BenchError::Parse {
            path: self.path.to_path_buf(),
            line,
            reason: reason.into(),
        }
    }

    /// Next non-empty line as (1-based line number, tokens).
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((i + 1, tokens));
            }
        }
        None
    }

    fn field<T: FromStr>(&self, line: usize, token: &str, what: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.err(line, format!("cannot parse {what} from `{token}`")))
    }
}

fn header<'a>(lines: &mut Lines<'a>, keyword: &str, arity: usize) -> Result<(usize, Vec<&'a str>)> {
    let (line, tokens) = lines
        .next_tokens()
        .ok_or_else(|| lines.err(1, format!("missing `{keyword}` header")))?;
    if tokens[0] != keyword || tokens.len() != arity + 1 {
        return Err(lines.err(line, format!("expected `{keyword}` header with {arity} fields")));
    }
    Ok((line, tokens))
}

fn checked_index(lines: &Lines<'_>, line: usize, token: &str, what: &str, size: usize) -> Result<usize> {
    let v: usize = lines.field(line, token, what)?;
    if v >= size {
        return Err(lines.err(line, format!("{what} {v} out of range (size {size})")));
    }
    Ok(v)
}

pub fn parse_mdp(path: &Path, text: &str) -> Result<FiniteMdp> {
    let mut lines = Lines::new(path, text);
    let (hline, h) = header(&mut lines, "mdp", 3)?;
    let n: usize = lines.field(hline, h[1], "state count")?;
    let m: usize = lines.field(hline, h[2], "action count")?;
    let beta: f64 = lines.field(hline, h[3], "discount")?;
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    while let Some((line, t)) = lines.next_tokens() {
        if t.len() != 5 {
            return Err(lines.err(line, format!("expected `i j a p r`, found {} fields", t.len())));
        }
        let i = checked_index(&lines, line, t[0], "state", n)?;
        let j = checked_index(&lines, line, t[1], "next state", n)?;
        let a = checked_index(&lines, line, t[2], "action", m)?;
        let p: f64 = lines.field(line, t[3], "probability")?;
        let r: f64 = lines.field(line, t[4], "reward")?;
        if !seen.insert((i, j, a)) {
            return Err(lines.err(line, format!("duplicate transition ({i}, {j}, {a})")));
        }
        triples.push((i, j, a, p, r));
    }
    FiniteMdp::from_triples(n, m, beta, &triples).map_err(|e| lines.err(hline, e.to_string()))
}

pub fn parse_policy(path: &Path, text: &str) -> Result<Policy> {
    let mut lines = Lines::new(path, text);
    let (hline, h) = header(&mut lines, "policy", 2)?;
    let n: usize = lines.field(hline, h[1], "state count")?;
    let m: usize = lines.field(hline, h[2], "action count")?;
    let mut nu = vec![0.0; n * m];
    let mut seen = HashSet::new();
    while let Some((line, t)) = lines.next_tokens() {
        if t.len() != 3 {
            return Err(lines.err(line, format!("expected `s a prob`, found {} fields", t.len())));
        }
        let s = checked_index(&lines, line, t[0], "state", n)?;
        let a = checked_index(&lines, line, t[1], "action", m)?;
        if !seen.insert((s, a)) {
            return Err(lines.err(line, format!("duplicate entry ({s}, {a})")));
        }
        nu[s * m + a] = lines.field(line, t[2], "probability")?;
    }
    Policy::new(n, m, nu).map_err(|e| lines.err(hline, e.to_string()))
}

pub fn format_mdp(mdp: &FiniteMdp) -> String {
    let mut out = format!("mdp {} {} {}\n", mdp.n_states(), mdp.n_actions(), mdp.beta());
    for (i, j, a, p, r) in mdp.triples() {
        let _ = writeln!(out, "{i} {j} {a} {p} {r}");
    }
    out
}

pub fn format_policy(policy: &Policy) -> String {
    let (n, m) = (policy.n_states(), policy.n_actions());
    let mut out = format!("policy {n} {m}\n");
    for s in 0..n {
        for a in 0..m {
            let p = policy.prob(s, a);
            if p != 0.0 {
                let _ = writeln!(out, "{s} {a} {p}");
            }
        }
    }
    out
}

/// Policy file written next to an MDP file.
pub fn policy_path(mdp_path: &Path) -> PathBuf {
    mdp_path.with_extension("policy")
}

pub fn read_mdp(path: &Path) -> Result<FiniteMdp> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_mdp(path, &text)
}

pub fn read_policy(path: &Path) -> Result<Policy> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_policy(path, &text)
}

pub fn write_mdp(path: &Path, mdp: &FiniteMdp, policy: &Policy) -> Result<PathBuf> {
    std::fs::write(path, format_mdp(mdp)).map_err(|e| BenchError::io(path, e))?;
    let ppath = policy_path(path);
    std::fs::write(&ppath, format_policy(policy)).map_err(|e| BenchError::io(&ppath, e))?;
    Ok(ppath)
}
