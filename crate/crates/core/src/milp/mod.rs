//! Mixed-integer linear model of the reconfiguration problem.
//!
//! The model is built from a generic [`MilpBuilder`] plus three
//! linearization helpers:
//!
//! * [`lin_abs_diff`]: `|a - b|` for a binary variable and a binary constant,
//! * [`lin_product`]: `z = a * b` for two binaries,
//! * [`lin_max`]: `t >= term` for every term, optionally gated by a binary
//!   activation through a big-M.
//!
//! Only placement and path-choice binaries are decisions; every other
//! variable is an auxiliary whose tight value follows from them. The
//! auxiliary definitions are recorded so that a decision can be lifted into
//! a complete assignment ([`MilpModel::lift`]).

mod build;
mod lp;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use build::{assignment_for_decision, build_milp};
pub use lp::{export_lp, parse_lp, sanitize_name, sidecar};

/// Absolute tolerance of [`evaluate_assignment`].
pub const EVAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

/// What a model variable stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum VarRole {
    /// VNF `vnf` of SFC `sfc` hosted at `server`.
    Placement { sfc: usize, vnf: usize, server: usize },
    /// Candidate `candidate` between nodes `from` and `to` chosen for
    /// `segment` of `flow`.
    PathChoice {
        flow: usize,
        segment: usize,
        from: usize,
        to: usize,
        candidate: usize,
    },
    /// Consecutive chain positions `segment - 1` and `segment` of `sfc` on
    /// servers `from_server` and `to_server`.
    ChainPair {
        sfc: usize,
        segment: usize,
        from_server: usize,
        to_server: usize,
    },
    /// Directed switch link used by a flow.
    Route { flow: usize, from: usize, to: usize },
    SfcMigrated { sfc: usize },
    ServerOn { server: usize },
    /// Bottleneck concurrency of migrations into `destination` from `source`.
    Concurrency { destination: usize, source: usize },
    MigrationTime,
    /// Migration bandwidth reserved on an undirected link.
    LinkReserved { a: usize, b: usize },
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub role: VarRole,
}

/// `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn add(&mut self, v: VarId, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        let mut e = LinExpr::new();
        e.add_expr(self, s);
        e
    }

    /// Merges repeated variables (first occurrence keeps its position) and
    /// drops zero coefficients.
    pub fn compact(&mut self) {
        let mut pos: HashMap<VarId, usize> = HashMap::new();
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match pos.get(&v) {
                Some(&i) => out[i].1 += c,
                None => {
                    pos.insert(v, out.len());
                    out.push((v, c));
                }
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

/// `terms sense rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// One term of a [`lin_max`]: applies only while `activation` is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxTerm {
    pub expr: LinExpr,
    pub activation: Option<VarId>,
    pub big_m: Option<f64>,
}

impl MaxTerm {
    pub fn always(expr: LinExpr) -> Self {
        MaxTerm {
            expr,
            activation: None,
            big_m: None,
        }
    }

    pub fn gated(expr: LinExpr, activation: VarId, big_m: f64) -> Self {
        MaxTerm {
            expr,
            activation: Some(activation),
            big_m: Some(big_m),
        }
    }
}

/// Tight value of an auxiliary variable given its inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxDef {
    Product(VarId, VarId),
    /// Max of the active terms and 0; a binary variable takes 1 when the
    /// max is positive.
    Max { terms: Vec<MaxTerm>, kind: VarKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Var>,
    pub constraints: Vec<Constraint>,
    pub objective: LinExpr,
    /// Auxiliary definitions in creation order (inputs precede outputs).
    pub aux: Vec<(VarId, AuxDef)>,
}

impl MilpModel {
    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn name_of(&self, v: VarId) -> &str {
        &self.vars[v.0].name
    }

    /// Fills every auxiliary variable of `a` from its definition.
    pub fn lift(&self, a: &mut Assignment) {
        for (v, def) in &self.aux {
            a.values[v.0] = match def {
                AuxDef::Product(x, y) => a.values[x.0] * a.values[y.0],
                AuxDef::Max { terms, kind } => {
                    let m = terms
                        .iter()
                        .filter(|t| t.activation.is_none_or(|g| a.values[g.0] > 0.5))
                        .map(|t| t.expr.eval(&a.values))
                        .fold(0.0, f64::max);
                    if *kind == VarKind::Binary {
                        if m > 1e-12 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        m
                    }
                }
            };
        }
    }
}

/// Dense variable values indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub values: Vec<f64>,
}

impl Assignment {
    pub fn zeros(model: &MilpModel) -> Self {
        Assignment {
            values: vec![0.0; model.vars.len()],
        }
    }

    /// Every model variable must be present in the map.
    pub fn from_map(model: &MilpModel, map: &BTreeMap<String, f64>) -> Result<Self> {
        let values = model
            .vars
            .iter()
            .map(|v| {
                map.get(&v.name)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("assignment has no value for `{}`", v.name)))
            })
            .collect::<Result<_>>()?;
        Ok(Assignment { values })
    }

    pub fn set(&mut self, v: VarId, value: f64) {
        self.values[v.0] = value;
    }

    pub fn get(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub satisfied: bool,
    /// Names of violated constraints, and `bounds:<var>` / `integrality:<var>`.
    pub violated: Vec<String>,
}

pub fn evaluate_assignment(model: &MilpModel, a: &Assignment) -> Result<Evaluation> {
    if a.values.len() != model.vars.len() {
        return Err(Error::invalid(format!(
            "assignment has {} values, model has {} variables",
            a.values.len(),
            model.vars.len()
        )));
    }
    let mut violated = Vec::new();
    for (v, &x) in model.vars.iter().zip(&a.values) {
        if !x.is_finite() || x < v.lb - EVAL_TOL || x > v.ub + EVAL_TOL {
            violated.push(format!("bounds:{}", v.name));
        }
        if v.kind != VarKind::Continuous && (x - x.round()).abs() > EVAL_TOL {
            violated.push(format!("integrality:{}", v.name));
        }
    }
    for c in &model.constraints {
        let lhs: f64 = c.terms.iter().map(|&(v, k)| k * a.values[v.0]).sum();
        let ok = match c.sense {
            Sense::Le => lhs <= c.rhs + EVAL_TOL,
            Sense::Ge => lhs >= c.rhs - EVAL_TOL,
            Sense::Eq => (lhs - c.rhs).abs() <= EVAL_TOL,
        };
        if !ok {
            violated.push(c.name.clone());
        }
    }
    Ok(Evaluation {
        objective: model.objective.eval(&a.values),
        satisfied: violated.is_empty(),
        violated,
    })
}

/// Single-use model builder.
#[derive(Debug)]
pub struct MilpBuilder {
    model: MilpModel,
    names: HashMap<String, VarId>,
    constraint_names: HashMap<String, usize>,
}

impl MilpBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        MilpBuilder {
            model: MilpModel {
                name: name.into(),
                vars: Vec::new(),
                constraints: Vec::new(),
                objective: LinExpr::new(),
                aux: Vec::new(),
            },
            names: HashMap::new(),
            constraint_names: HashMap::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64, role: VarRole) -> Result<VarId> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(Error::Build(format!("variable `{name}` declared twice")));
        }
        if lb > ub {
            return Err(Error::Build(format!("variable `{name}` has lb > ub")));
        }
        let id = VarId(self.model.vars.len());
        self.names.insert(name.clone(), id);
        self.model.vars.push(Var { name, kind, lb, ub, role });
        Ok(id)
    }

    pub fn binary(&mut self, name: impl Into<String>, role: VarRole) -> Result<VarId> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, role)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lb: f64, ub: f64, role: VarRole) -> Result<VarId> {
        self.add_var(name, VarKind::Continuous, lb, ub, role)
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.model.vars[v.0].kind
    }

    /// Adds `expr sense rhs`; the expression's constant moves to the right.
    pub fn add_constraint(&mut self, name: impl Into<String>, mut expr: LinExpr, sense: Sense, rhs: f64) -> Result<()> {
        let name = name.into();
        if self.constraint_names.contains_key(&name) {
            return Err(Error::Build(format!("constraint `{name}` declared twice")));
        }
        expr.compact();
        if let Some(&(v, _)) = expr.terms.iter().find(|(v, _)| v.0 >= self.model.vars.len()) {
            return Err(Error::Build(format!("constraint `{name}` references unknown variable {}", v.0)));
        }
        self.constraint_names.insert(name.clone(), self.model.constraints.len());
        self.model.constraints.push(Constraint {
            name,
            terms: expr.terms,
            sense,
            rhs: rhs - expr.constant,
        });
        Ok(())
    }

    pub fn set_objective(&mut self, mut expr: LinExpr) {
        expr.compact();
        self.model.objective = expr;
    }

    pub(crate) fn define(&mut self, v: VarId, def: AuxDef) {
        self.model.aux.push((v, def));
    }

    pub fn finish(self) -> MilpModel {
        self.model
    }
}

/// `|a - b|` with `b` a known binary constant.
pub fn lin_abs_diff(a: VarId, b: bool) -> LinExpr {
    if b {
        let mut e = LinExpr::constant(1.0);
        e.add(a, -1.0);
        e
    } else {
        LinExpr::var(a)
    }
}

/// Binary `z = a·b` via `z <= a`, `z <= b`, `z >= a + b - 1`.
pub fn lin_product(b: &mut MilpBuilder, name: &str, x: VarId, y: VarId, role: VarRole) -> Result<VarId> {
    if b.kind(x) != VarKind::Binary || b.kind(y) != VarKind::Binary {
        return Err(Error::Build(format!("product `{name}` needs binary factors")));
    }
    let z = b.binary(name, role)?;
    let mut e = LinExpr::var(z);
    e.add(x, -1.0);
    b.add_constraint(format!("{name}_le_a"), e, Sense::Le, 0.0)?;
    let mut e = LinExpr::var(z);
    e.add(y, -1.0);
    b.add_constraint(format!("{name}_le_b"), e, Sense::Le, 0.0)?;
    let mut e = LinExpr::var(z);
    e.add(x, -1.0).add(y, -1.0);
    b.add_constraint(format!("{name}_ge"), e, Sense::Ge, -1.0)?;
    b.define(z, AuxDef::Product(x, y));
    Ok(z)
}

/// `t >= term` for every term (gated terms: `t >= term - M (1 - activation)`),
/// with `t >= 0`. A binary `t` marks "some term is positive" when the terms
/// are at most 1.
pub fn lin_max(b: &mut MilpBuilder, name: &str, terms: Vec<MaxTerm>, kind: VarKind, role: VarRole) -> Result<VarId> {
    for (k, t) in terms.iter().enumerate() {
        if t.activation.is_some() && t.big_m.is_none() {
            return Err(Error::Build(format!("term {k} of `{name}` is gated but has no big-M")));
        }
    }
    let ub = if kind == VarKind::Binary { 1.0 } else { f64::INFINITY };
    let t = b.add_var(name, kind, 0.0, ub, role)?;
    for (k, term) in terms.iter().enumerate() {
        // t - expr (+ M a) >= (M)
        let mut e = LinExpr::var(t);
        e.add_expr(&term.expr, -1.0);
        let mut rhs = 0.0;
        if let (Some(a), Some(m)) = (term.activation, term.big_m) {
            e.add(a, -m);
            rhs = -m;
        }
        b.add_constraint(format!("{name}_t{k}"), e, Sense::Ge, rhs)?;
    }
    b.define(t, AuxDef::Max { terms, kind });
    Ok(t)
}
