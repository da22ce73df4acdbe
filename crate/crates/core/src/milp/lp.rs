//! LP text format (CPLEX flavour): writer, reader and the variable sidecar.
//!
//! The writer lists every binary in `Binaries` and every other variable in
//! `Bounds`, both in variable order. The reader declares variables in the
//! order Binaries, Bounds, Generals, then first appearance, which makes
//! export → parse → export reproduce the text byte for byte.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

use super::{Constraint, LinExpr, MilpModel, Sense, Var, VarId, VarKind, VarRole};

const WRAP: usize = 78;

/// Maps a name onto `[A-Za-z0-9_.]`, prefixing `v_` when the result could
/// be mistaken for a number or starts with a digit, a period or an `e`.
pub fn sanitize_name(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect();
    let risky = match s.chars().next() {
        None => true,
        Some(c) => c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E',
    };
    if risky || s.parse::<f64>().is_ok() || s.eq_ignore_ascii_case("free") {
        s.insert_str(0, "v_");
    }
    s
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

struct Lines {
    out: String,
    line: String,
}

impl Lines {
    fn start(&mut self, head: &str) {
        self.flush();
        self.line.push_str(head);
    }

    fn piece(&mut self, p: &str) {
        if self.line.len() + p.len() > WRAP && !self.line.trim().is_empty() {
            self.flush();
            self.line.push_str("  ");
        }
        self.line.push_str(p);
    }

    fn flush(&mut self) {
        if !self.line.is_empty() {
            self.out.push_str(&self.line);
            self.out.push('\n');
            self.line.clear();
        }
    }

    fn raw(&mut self, s: &str) {
        self.flush();
        self.out.push_str(s);
        self.out.push('\n');
    }
}

fn write_terms(l: &mut Lines, names: &[String], terms: &[(VarId, f64)], constant: f64) {
    let mut first = true;
    for &(v, c) in terms {
        let sign = if c < 0.0 { "-" } else { "+" };
        let mag = c.abs();
        let coef = if mag == 1.0 { String::new() } else { format!("{} ", num(mag)) };
        let p = if first && c >= 0.0 {
            format!(" {coef}{}", names[v.0])
        } else {
            format!(" {sign} {coef}{}", names[v.0])
        };
        l.piece(&p);
        first = false;
    }
    if constant != 0.0 || first {
        let p = if first {
            format!(" {}", num(constant))
        } else if constant < 0.0 {
            format!(" - {}", num(-constant))
        } else {
            format!(" + {}", num(constant))
        };
        l.piece(&p);
    }
}

fn unique_names<'a>(what: &str, names: impl Iterator<Item = &'a str>) -> Result<Vec<String>> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for n in names {
        let s = sanitize_name(n);
        if let Some(prev) = seen.insert(s.clone(), n) {
            return Err(Error::Export(format!("{what} `{prev}` and `{n}` both sanitize to `{s}`")));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn export_lp(model: &MilpModel) -> Result<String> {
    let names = unique_names("variables", model.vars.iter().map(|v| v.name.as_str()))?;
    let cnames = unique_names("constraints", model.constraints.iter().map(|c| c.name.as_str()))?;
    if cnames.iter().any(|c| c == "obj") {
        return Err(Error::Export("constraint name `obj` is reserved".into()));
    }
    let mut l = Lines {
        out: String::new(),
        line: String::new(),
    };
    l.raw(&format!("\\ model: {}", sanitize_name(&model.name)));
    l.raw("Minimize");
    l.start(" obj:");
    write_terms(&mut l, &names, &model.objective.terms, model.objective.constant);
    l.raw("Subject To");
    for (c, name) in model.constraints.iter().zip(&cnames) {
        l.start(&format!(" {name}:"));
        write_terms(&mut l, &names, &c.terms, 0.0);
        l.piece(&format!(" {} {}", c.sense, num(c.rhs)));
    }
    l.raw("Bounds");
    for (v, name) in model.vars.iter().zip(&names) {
        if v.kind == VarKind::Binary {
            continue;
        }
        let line = match (v.lb, v.ub) {
            (f64::NEG_INFINITY, f64::INFINITY) => format!(" {name} free"),
            (lb, f64::INFINITY) => format!(" {name} >= {}", num(lb)),
            (lb, ub) => format!(" {} <= {name} <= {}", num(lb), num(ub)),
        };
        l.raw(&line);
    }
    for (section, kind) in [("Binaries", VarKind::Binary), ("Generals", VarKind::Integer)] {
        l.raw(section);
        for (v, name) in model.vars.iter().zip(&names) {
            if v.kind == kind {
                l.piece(&format!(" {name}"));
            }
        }
    }
    l.raw("End");
    Ok(l.out)
}

#[derive(Serialize)]
struct SidecarEntry<'a> {
    name: String,
    kind: VarKind,
    #[serde(flatten)]
    role: &'a VarRole,
}

/// JSON array mapping exported variable names to their meaning.
pub fn sidecar(model: &MilpModel) -> Result<serde_json::Value> {
    let names = unique_names("variables", model.vars.iter().map(|v| v.name.as_str()))?;
    let entries: Vec<SidecarEntry> = model
        .vars
        .iter()
        .zip(names)
        .map(|(v, name)| SidecarEntry {
            name,
            kind: v.kind,
            role: &v.role,
        })
        .collect();
    Ok(serde_json::json!({
        "model": model.name,
        "variables": entries,
    }))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::End),
        _ => None,
    }
}

type Tok = (usize, String);

fn is_name(t: &str) -> bool {
    t.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && !t.ends_with(':')
        && t.parse::<f64>().is_err()
}

fn parse_num(line: usize, t: &str) -> Result<f64> {
    match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => return Ok(f64::INFINITY),
        "-inf" | "-infinity" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    t.parse::<f64>()
        .map_err(|_| Error::LpParse {
            line,
            message: format!("expected a number, found `{t}`"),
        })
}

struct Reader {
    vars: Vec<Var>,
    index: HashMap<String, VarId>,
}

impl Reader {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let id = VarId(self.vars.len());
        self.vars.push(Var {
            name: name.to_string(),
            kind: VarKind::Continuous,
            lb: 0.0,
            ub: f64::INFINITY,
            role: VarRole::Other,
        });
        self.index.insert(name.to_string(), id);
        id
    }

    /// Reads `[+|-] [coef] name ...` terms up to a sense token or the end.
    fn terms(&mut self, toks: &[Tok], pos: &mut usize) -> Result<LinExpr> {
        let mut e = LinExpr::new();
        while *pos < toks.len() {
            let (line, t) = &toks[*pos];
            if matches!(t.as_str(), "<=" | ">=" | "=" | "=<" | "=>" | "<" | ">") || t.ends_with(':') {
                break;
            }
            let mut sign = 1.0;
            let mut t = t.as_str();
            if t == "+" || t == "-" {
                if t == "-" {
                    sign = -1.0;
                }
                *pos += 1;
                t = toks.get(*pos).map(|x| x.1.as_str()).ok_or_else(|| Error::LpParse {
                    line: *line,
                    message: "dangling sign".into(),
                })?;
            }
            if is_name(t) {
                e.terms.push((self.var(t), sign));
                *pos += 1;
                continue;
            }
            let c = parse_num(*line, t)?;
            *pos += 1;
            match toks.get(*pos) {
                Some((_, n)) if is_name(n) => {
                    e.terms.push((self.var(n), sign * c));
                    *pos += 1;
                }
                _ => e.constant += sign * c,
            }
        }
        Ok(e)
    }
}

fn label(toks: &[Tok], pos: &mut usize) -> Option<String> {
    let t = &toks.get(*pos)?.1;
    let name = t.strip_suffix(':')?;
    *pos += 1;
    Some(name.to_string())
}

pub fn parse_lp(text: &str) -> Result<MilpModel> {
    let mut name = String::new();
    let mut section = Section::Preamble;
    let mut buckets: Vec<(Section, Vec<Tok>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if let Some(c) = raw.trim_start().strip_prefix('\\') {
            if let Some(n) = c.trim().strip_prefix("model:") {
                name = n.trim().to_string();
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_of(raw) {
            section = s;
            buckets.push((s, Vec::new()));
            continue;
        }
        if matches!(section, Section::Preamble | Section::End) {
            return Err(Error::LpParse {
                line,
                message: "text outside of a section".into(),
            });
        }
        let toks = &mut buckets.last_mut().unwrap().1;
        // split "name:term" and "<=rhs" style glued tokens
        let spaced = raw.replace(':', ": ").replace("<=", " <= ").replace(">=", " >= ");
        toks.extend(spaced.split_whitespace().map(|t| (line, t.to_string())));
    }
    if section != Section::End {
        return Err(Error::LpParse {
            line: text.lines().count(),
            message: "missing End".into(),
        });
    }

    let mut r = Reader {
        vars: Vec::new(),
        index: HashMap::new(),
    };
    // declaration order: Binaries, Bounds, Generals, appearance
    let order = [Section::Binaries, Section::Bounds, Section::Generals];
    let mut generals = HashSet::new();
    for want in order {
        for (s, toks) in buckets.iter().filter(|(s, _)| *s == want) {
            match s {
                Section::Binaries | Section::Generals => {
                    for (_, t) in toks {
                        let v = r.var(t);
                        let var = &mut r.vars[v.0];
                        if *s == Section::Binaries {
                            var.kind = VarKind::Binary;
                            var.lb = 0.0;
                            var.ub = 1.0;
                        } else {
                            var.kind = VarKind::Integer;
                            generals.insert(v);
                        }
                    }
                }
                Section::Bounds => parse_bounds(&mut r, toks)?,
                _ => unreachable!(),
            }
        }
    }

    let mut objective = LinExpr::new();
    let mut constraints = Vec::new();
    let mut cnames = HashSet::new();
    for (s, toks) in &buckets {
        let mut pos = 0;
        match s {
            Section::Objective => {
                label(toks, &mut pos);
                let e = r.terms(toks, &mut pos)?;
                if let Some((line, t)) = toks.get(pos) {
                    return Err(Error::LpParse {
                        line: *line,
                        message: format!("unexpected `{t}` in the objective"),
                    });
                }
                objective.add_expr(&e, 1.0);
            }
            Section::Constraints => {
                while pos < toks.len() {
                    let line = toks[pos].0;
                    let name = label(toks, &mut pos).unwrap_or_else(|| format!("c{}", constraints.len() + 1));
                    if !cnames.insert(name.clone()) {
                        return Err(Error::LpParse {
                            line,
                            message: format!("constraint `{name}` defined twice"),
                        });
                    }
                    let e = r.terms(toks, &mut pos)?;
                    let sense = match toks.get(pos).map(|t| t.1.as_str()) {
                        Some("<=" | "=<" | "<") => Sense::Le,
                        Some(">=" | "=>" | ">") => Sense::Ge,
                        Some("=") => Sense::Eq,
                        _ => {
                            return Err(Error::LpParse {
                                line,
                                message: format!("constraint `{name}` has no sense"),
                            })
                        }
                    };
                    pos += 1;
                    let mut sign = 1.0;
                    if let Some(s @ ("+" | "-")) = toks.get(pos).map(|t| t.1.as_str()) {
                        if s == "-" {
                            sign = -1.0;
                        }
                        pos += 1;
                    }
                    let rhs = match toks.get(pos) {
                        Some((l, t)) => parse_num(*l, t)?,
                        None => {
                            return Err(Error::LpParse {
                                line,
                                message: format!("constraint `{name}` has no right-hand side"),
                            })
                        }
                    };
                    pos += 1;
                    constraints.push(Constraint {
                        name,
                        terms: e.terms,
                        sense,
                        rhs: sign * rhs - e.constant,
                    });
                }
            }
            _ => {}
        }
    }
    Ok(MilpModel {
        name,
        vars: r.vars,
        constraints,
        objective,
        aux: Vec::new(),
    })
}

fn parse_bounds(r: &mut Reader, toks: &[Tok]) -> Result<()> {
    let mut pos = 0;
    let err = |line: usize, m: &str| Error::LpParse {
        line,
        message: m.to_string(),
    };
    while pos < toks.len() {
        let (line, t) = &toks[pos];
        let line = *line;
        if is_name(t) {
            let v = r.var(t);
            match toks.get(pos + 1).map(|x| x.1.as_str()) {
                Some("free") => {
                    r.vars[v.0].lb = f64::NEG_INFINITY;
                    r.vars[v.0].ub = f64::INFINITY;
                    pos += 2;
                }
                Some(op @ (">=" | "<=" | "=")) => {
                    let val = parse_num(line, toks.get(pos + 2).map(|x| x.1.as_str()).unwrap_or(""))?;
                    let var = &mut r.vars[v.0];
                    match op {
                        ">=" => var.lb = val,
                        "<=" => var.ub = val,
                        _ => {
                            var.lb = val;
                            var.ub = val;
                        }
                    }
                    pos += 3;
                }
                _ => return Err(err(line, "malformed bound")),
            }
        } else {
            // lb <= name [<= ub]
            let lb = parse_num(line, t)?;
            if toks.get(pos + 1).map(|x| x.1.as_str()) != Some("<=") {
                return Err(err(line, "malformed bound"));
            }
            let name = toks.get(pos + 2).map(|x| x.1.as_str()).unwrap_or("");
            if !is_name(name) {
                return Err(err(line, "malformed bound"));
            }
            let v = r.var(name);
            r.vars[v.0].lb = lb;
            pos += 3;
            if toks.get(pos).map(|x| x.1.as_str()) == Some("<=") {
                let ub = parse_num(line, toks.get(pos + 1).map(|x| x.1.as_str()).unwrap_or(""))?;
                r.vars[v.0].ub = ub;
                pos += 2;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{evaluate_assignment, lin_max, lin_product, Assignment, MaxTerm, MilpBuilder};

    fn small_model() -> MilpModel {
        let mut b = MilpBuilder::new("demo");
        let x = b.binary("x", VarRole::Other).unwrap();
        let y = b.binary("y", VarRole::Other).unwrap();
        let z = lin_product(&mut b, "z", x, y, VarRole::Other).unwrap();
        let t = lin_max(
            &mut b,
            "t",
            vec![MaxTerm::gated(LinExpr::constant(2.5), x, 10.0)],
            VarKind::Continuous,
            VarRole::Other,
        )
        .unwrap();
        let k = b.add_var("k", VarKind::Integer, 0.0, 7.0, VarRole::Other).unwrap();
        let f = b.add_var("f", VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY, VarRole::Other).unwrap();
        let mut e = LinExpr::var(k);
        e.add(f, -0.5).add(x, 3.0);
        b.add_constraint("mix", e, Sense::Le, 4.0).unwrap();
        let mut o = LinExpr::constant(0.25);
        o.add(z, 1.0).add(t, -0.125).add(k, 2.0);
        b.set_objective(o);
        b.finish()
    }

    #[test]
    fn sanitizing() {
        assert_eq!(sanitize_name("w_s0_v1_x2"), "w_s0_v1_x2");
        assert_eq!(sanitize_name("a b[c]"), "a_b_c_");
        assert_eq!(sanitize_name("1x"), "v_1x");
        assert_eq!(sanitize_name("inf"), "v_inf");
        assert_eq!(sanitize_name("e12"), "v_e12");
        assert_eq!(sanitize_name(""), "v_");
    }

    #[test]
    fn collision_is_an_export_error() {
        let mut b = MilpBuilder::new("m");
        b.binary("a b", VarRole::Other).unwrap();
        b.binary("a_b", VarRole::Other).unwrap();
        assert!(matches!(export_lp(&b.finish()), Err(Error::Export(_))));
    }

    #[test]
    fn skeleton() {
        let text = export_lp(&small_model()).unwrap();
        for s in ["Minimize", "Subject To", "Bounds", "Binaries", "Generals", "End"] {
            assert_eq!(text.lines().filter(|l| *l == s).count(), 1, "{s}");
        }
        assert!(text.contains(" f free"));
        assert!(text.contains(" 0 <= k <= 7"));
        assert!(text.contains(" t >= 0"));
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let m = small_model();
        let first = export_lp(&m).unwrap();
        let parsed = parse_lp(&first).unwrap();
        let second = export_lp(&parsed).unwrap();
        assert_eq!(first, second);
        // same evaluation on a full assignment
        let mut a = Assignment::zeros(&m);
        a.values = vec![1.0, 1.0, 1.0, 2.5, 1.0, 0.0];
        let e1 = evaluate_assignment(&m, &a).unwrap();
        let e2 = evaluate_assignment(&parsed, &a).unwrap();
        assert_eq!(e1, e2);
        assert!(e1.satisfied);
    }

    #[test]
    fn parse_errors_have_lines() {
        let text = "Minimize\n obj: x\nSubject To\n c1: x + y\nEnd\n";
        match parse_lp(text) {
            Err(Error::LpParse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_lp("Minimize\n obj: x\n").is_err());
    }

    #[test]
    fn parses_foreign_layout() {
        let text = "\\ hand written\nMINIMIZE\n obj: 3 a - b + 1\nst\n lim: a + 2 b >= 1\n c2: a - b = 0\nbounds\n 1 <= b <= 4\nbinary\n a\nend\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.vars.len(), 2);
        assert_eq!(m.vars[0].name, "a");
        assert_eq!(m.vars[0].kind, VarKind::Binary);
        assert_eq!((m.vars[1].lb, m.vars[1].ub), (1.0, 4.0));
        assert_eq!(m.objective.constant, 1.0);
        assert_eq!(m.constraints[1].sense, Sense::Eq);
    }
}
