//! Alpha sweeps: one independent solve per grid point, run on a worker pool
//! and reported in descending alpha order whatever the completion order.

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{check_alpha, fmt_num, CostBreakdown};
use crate::error::{Error, Result};
use crate::model::{Instance, NetworkState};
use crate::solver::{solve, Optimality, SolveResult, SolverOptions};

pub const DEFAULT_GRID: &str = "1.0:0.0:0.1";
pub const SWEEP_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 20] = [
    "alpha", "cost_np", "cost_rec", "u_raw", "v_raw", "w_raw", "x_raw", "y_raw", "z_raw", "u_norm", "v_norm",
    "w_norm", "x_norm", "y_norm", "z_norm", "migrations", "rule_changes", "optimal", "nodes", "feasible",
];

pub const DELTA_COLUMNS: [&str; 8] = [
    "alpha_from",
    "alpha_to",
    "cost_np_from",
    "cost_np_to",
    "cost_np_change_pct",
    "cost_rec_from",
    "cost_rec_to",
    "cost_rec_change_pct",
];

/// Parses `start:stop:step` (either direction) or a comma list. The result
/// is sorted by descending alpha without duplicates.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("bad number `{s}` in alpha grid `{spec}`")))
    };
    let mut out: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(Error::invalid(format!("alpha grid `{spec}` is not start:stop:step")));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) {
            return Err(Error::invalid("alpha grid step must be positive"));
        }
        let n = ((a - b).abs() / step + 1e-9).floor() as usize;
        let dir = if b < a { -1.0 } else { 1.0 };
        (0..=n)
            // rounding keeps 1.0 - 3 * 0.1 at 0.7
            .map(|i| ((a + dir * i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    for &a in &out {
        check_alpha(a)?;
    }
    out.sort_by(|x, y| y.total_cmp(x));
    out.dedup();
    if out.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub alpha: f64,
    /// The solve outcome, or the error text when the point failed.
    pub outcome: std::result::Result<SolveResult, String>,
}

impl SweepRow {
    pub fn breakdown(&self) -> Option<&CostBreakdown> {
        self.outcome.as_ref().ok().map(|r| &r.solution.breakdown)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub options: SolverOptions,
}

/// Solves every grid point with `jobs` workers (0 = one per core).
pub fn run_sweep(
    instance: &Instance,
    state: &NetworkState,
    grid: &[f64],
    opts: &SolverOptions,
    jobs: usize,
) -> Result<SweepResult> {
    opts.check()?;
    let mut grid = grid.to_vec();
    for &a in &grid {
        check_alpha(a)?;
    }
    grid.sort_by(|x, y| y.total_cmp(x));
    grid.dedup();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        grid.par_iter()
            .map(|&alpha| SweepRow {
                alpha,
                outcome: solve(instance, state, alpha, opts).map_err(|e| e.to_string()),
            })
            .collect()
    });
    Ok(SweepResult {
        rows,
        options: opts.clone(),
    })
}

#[derive(Serialize)]
struct RowMeta<'a> {
    alpha: f64,
    feasible: bool,
    optimality: Option<Optimality>,
    nodes_explored: u64,
    assignments_evaluated: u64,
    wall_time_s: f64,
    error: Option<&'a str>,
}

impl SweepResult {
    pub fn all_optimal(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.outcome.as_ref().is_ok_and(SolveResult::is_optimal))
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = match &row.outcome {
                Ok(r) => {
                    let b = &r.solution.breakdown;
                    let mut f = b.csv_fields();
                    f.push(b.migrations.to_string());
                    f.push(fmt_num(b.raw.u));
                    f.push(r.is_optimal().to_string());
                    f.push(r.nodes_explored.to_string());
                    f.push("true".into());
                    f
                }
                Err(_) => {
                    let mut f = vec![fmt_num(row.alpha)];
                    f.extend(std::iter::repeat_n(String::new(), 16));
                    f.extend(["false".into(), "0".into(), "false".into()]);
                    f
                }
            };
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Change of each cost between consecutive grid points, in absolute
    /// terms and relative to the previous point.
    pub fn delta_csv(&self) -> String {
        let pct = |from: f64, to: f64| {
            if from == 0.0 {
                String::new()
            } else {
                fmt_num(100.0 * (to - from) / from)
            }
        };
        let mut out = DELTA_COLUMNS.join(",");
        out.push('\n');
        for w in self.rows.windows(2) {
            let (Some(a), Some(b)) = (w[0].breakdown(), w[1].breakdown()) else {
                continue;
            };
            let fields = [
                fmt_num(w[0].alpha),
                fmt_num(w[1].alpha),
                fmt_num(a.cost_np),
                fmt_num(b.cost_np),
                pct(a.cost_np, b.cost_np),
                fmt_num(a.cost_rec),
                fmt_num(b.cost_rec),
                pct(a.cost_rec, b.cost_rec),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Run metadata; `source` describes where the instance came from.
    pub fn meta(&self, source: serde_json::Value) -> serde_json::Value {
        let rows: Vec<RowMeta> = self
            .rows
            .iter()
            .map(|r| match &r.outcome {
                Ok(s) => RowMeta {
                    alpha: r.alpha,
                    feasible: true,
                    optimality: Some(s.optimality),
                    nodes_explored: s.nodes_explored,
                    assignments_evaluated: s.assignments_evaluated,
                    wall_time_s: s.wall_time_s,
                    error: None,
                },
                Err(e) => RowMeta {
                    alpha: r.alpha,
                    feasible: false,
                    optimality: None,
                    nodes_explored: 0,
                    assignments_evaluated: 0,
                    wall_time_s: 0.0,
                    error: Some(e),
                },
            })
            .collect();
        serde_json::json!({
            "schema_version": SWEEP_SCHEMA_VERSION,
            "columns": CSV_COLUMNS,
            "source": source,
            "solver": self.options,
            "grid": self.rows.iter().map(|r| r.alpha).collect::<Vec<_>>(),
            "rows": rows,
        })
    }
}
