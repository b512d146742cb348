//! Criterion files: one `key=value` setting per line, `#` starts a comment.
//!
//! ```text
//! inputs=cond:n mod 4 = 0
//! range=n:0..8
//! vars=s
//! occ=7:N
//! kl=false
//! abs=s:par
//! ```

use super::{Criterion, CriterionError, Group, Inputs, Iters, Occurrence, Point, Relation};
use crate::concrete::{parse_memory, Classes};
use crate::lang::{parse_guard, Line};
use num_bigint::BigInt;
use std::collections::BTreeSet;

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, CriterionError> {
    Err(CriterionError::Syntax { line, msg: msg.into() })
}

fn parse_range(line: usize, s: &str) -> Result<(i64, i64), CriterionError> {
    let Some((lo, hi)) = s.split_once("..") else { return err(line, format!("expected lo..hi, found {s:?}")) };
    let num = |t: &str| t.trim().parse::<i64>().or_else(|_| err(line, format!("bad number {t:?}")));
    let (lo, hi) = (num(lo)?, num(hi)?);
    if lo > hi {
        return err(line, format!("empty range {s}"));
    }
    Ok((lo, hi))
}

/// Splits on commas outside braces.
fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out.into_iter().filter(|t| !t.is_empty()).collect()
}

fn parse_occ(line: usize, item: &str) -> Result<Occurrence, CriterionError> {
    let (pt, its) = item.split_once(':').unwrap_or((item, "N"));
    let point = match pt.trim() {
        "end" => Point::End,
        t => Point::Line(t.parse::<Line>().or_else(|_| err(line, format!("bad occurrence point {t:?}")))?),
    };
    let its = its.trim();
    let iters = if its == "N" || its == "ℕ" {
        Iters::All
    } else {
        let inner = its.strip_prefix('{').and_then(|t| t.strip_suffix('}')).unwrap_or(its);
        let mut ks = BTreeSet::new();
        for k in inner.split(',').map(str::trim).filter(|k| !k.is_empty()) {
            let k: u32 = k.parse().or_else(|_| err(line, format!("bad iteration {k:?}")))?;
            if k == 0 {
                return err(line, "iterations start at 1");
            }
            ks.insert(k);
        }
        Iters::Set(ks)
    };
    Ok(Occurrence { point, iters })
}

fn parse_group(line: usize, item: &str) -> Result<Group, CriterionError> {
    let Some((lhs, dom)) = item.rsplit_once(':') else { return err(line, format!("expected var:domain, found {item:?}")) };
    let dom = dom.trim().to_lowercase();
    let lhs = lhs.trim();
    if let Some(inner) = lhs.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
        let vars: Vec<String> = inner.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        let rel = match dom.as_str() {
            "signprod" => Relation::SignProd,
            "parsum" => Relation::ParSum,
            _ => return err(line, format!("unknown relational abstraction {dom:?} (expected signprod or parsum)")),
        };
        if vars.len() < 2 {
            return err(line, "a relational group needs at least two variables");
        }
        Ok(Group::Relational { vars, rel })
    } else {
        Ok(Group::Single { var: lhs.to_string(), domain: dom })
    }
}

/// Parses a criterion file. `classes` is needed for heap objects in explicit
/// input memories.
pub fn parse_criterion(text: &str, classes: &Classes) -> Result<Criterion, CriterionError> {
    let mut c = Criterion::new(&[]);
    let mut have_vars = false;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let Some((key, val)) = l.split_once('=') else { return err(n, format!("expected key=value, found {l:?}")) };
        let val = val.trim();
        match key.trim() {
            "inputs" => {
                c.inputs = if val == "all" {
                    Inputs::All
                } else if let Some(g) = val.strip_prefix("cond:") {
                    Inputs::Cond(parse_guard(g).or_else(|e| err(n, format!("condition: {e}")))?)
                } else if let Some(ms) = val.strip_prefix("list:") {
                    let mut out = Vec::new();
                    for m in ms.split(';').map(str::trim).filter(|m| !m.is_empty()) {
                        out.push(parse_memory(m, classes).or_else(|e| err(n, format!("input memory: {e}")))?);
                    }
                    Inputs::List(out)
                } else {
                    return err(n, format!("inputs must be all, list:... or cond:..., found {val:?}"));
                }
            }
            "range" => {
                for item in split_top(val) {
                    let Some((v, r)) = item.split_once(':') else { return err(n, format!("expected var:lo..hi, found {item:?}")) };
                    let (lo, hi) = parse_range(n, r)?;
                    c = c.range(v.trim(), lo, hi);
                }
            }
            "heap" => {
                for item in split_top(val) {
                    let Some((k, v)) = item.split_once(':') else { return err(n, format!("expected key:value, found {item:?}")) };
                    match k.trim() {
                        "nodes" => c.heap.max_nodes = v.trim().parse().or_else(|_| err(n, "bad node count"))?,
                        "ints" => {
                            c.heap.field_ints = if v.contains("..") {
                                let (lo, hi) = parse_range(n, v)?;
                                (lo..=hi).map(BigInt::from).collect()
                            } else {
                                let mut xs = Vec::new();
                                for t in v.split('|') {
                                    xs.push(BigInt::from(t.trim().parse::<i64>().or_else(|_| err(n, "bad field value"))?));
                                }
                                xs
                            }
                        }
                        "sharing" => c.heap.sharing = v.trim().parse().or_else(|_| err(n, "sharing must be true or false"))?,
                        other => return err(n, format!("unknown heap setting {other:?}")),
                    }
                }
            }
            "vars" => {
                c.vars = val.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
                have_vars = true;
            }
            "occ" => {
                let mut occ = Vec::new();
                // Items are separated by whitespace or ';'; commas only appear inside braces.
                let mut item = String::new();
                let mut depth = 0;
                for ch in val.chars().chain(std::iter::once(' ')) {
                    match ch {
                        '{' => {
                            depth += 1;
                            item.push(ch)
                        }
                        '}' => {
                            depth -= 1;
                            item.push(ch)
                        }
                        c2 if (c2.is_whitespace() || c2 == ';') && depth == 0 => {
                            if !item.is_empty() {
                                occ.push(parse_occ(n, &item)?);
                                item.clear();
                            }
                        }
                        c2 if c2.is_whitespace() => {}
                        _ => item.push(ch),
                    }
                }
                c.occ = occ;
            }
            "kl" => c.kl = val.parse().or_else(|_| err(n, "kl must be true or false"))?,
            "abs" => {
                c.abs = split_top(val).into_iter().map(|g| parse_group(n, g)).collect::<Result<_, _>>()?;
            }
            other => return err(n, format!("unknown setting {other:?}")),
        }
    }
    if !have_vars {
        return err(0, "missing vars=...");
    }
    Ok(c)
}
