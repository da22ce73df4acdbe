//! Exhaustive enumeration oracle.
//!
//! Every placement and every combination of segment candidates is built as
//! a full configuration, checked by the feasibility validator and costed by
//! the set-based cost functions. Nothing is shared with the other solvers
//! beyond the candidate set.

use crate::error::{Error, Result};
use crate::feasibility::validate;
use crate::model::segment_endpoints;
use crate::space::Decision;

use super::{Incumbent, Problem, Run, SolverOptions};

/// Advances a mixed-radix counter, last digit fastest. False on wrap-around.
fn advance(digits: &mut [usize], radix: &[usize]) -> bool {
    for g in (0..digits.len()).rev() {
        digits[g] += 1;
        if digits[g] < radix[g] {
            return true;
        }
        digits[g] = 0;
    }
    false
}

pub(super) fn search(p: &Problem<'_>, opts: &SolverOptions) -> Result<Run> {
    let inst = p.inst;
    let cap = opts.enumeration_cap;
    let n = p.n_slots();
    let m = p.n_servers();
    let placements = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if placements > cap {
        return Err(Error::SpaceTooLarge {
            cardinality: placements,
            cap,
        });
    }

    let radix_for = |hosts: &[usize]| -> Vec<usize> {
        inst.flows
            .iter()
            .flat_map(|f| {
                let ends = segment_endpoints(inst, f, p.chain_hosts(hosts, f.sfc));
                ends.windows(2).map(|w| p.cands.get(w[0], w[1]).len()).collect::<Vec<_>>()
            })
            .collect()
    };

    let mut hosts = vec![0usize; n];
    let host_radix = vec![m; n];
    let mut total: u128 = 0;
    loop {
        let combos = radix_for(&hosts)
            .iter()
            .fold(1u128, |acc, &r| acc.saturating_mul(r as u128));
        total = total.saturating_add(combos);
        if total > cap {
            return Err(Error::SpaceTooLarge { cardinality: total, cap });
        }
        if !advance(&mut hosts, &host_radix) {
            break;
        }
    }

    let seg_counts: Vec<usize> = inst.flows.iter().map(|f| inst.sfcs[f.sfc].chain.len() + 1).collect();
    let mut run = Run {
        best: None,
        exhaustive: true,
        nodes: 0,
        evaluated: 0,
    };
    hosts.fill(0);
    loop {
        run.nodes += 1;
        let radix = radix_for(&hosts);
        if radix.iter().all(|&r| r > 0) {
            let mut digits = vec![0usize; radix.len()];
            loop {
                run.evaluated += 1;
                let mut paths = Vec::with_capacity(seg_counts.len());
                let mut at = 0;
                for &c in &seg_counts {
                    paths.push(digits[at..at + c].to_vec());
                    at += c;
                }
                let decision = Decision {
                    hosts: hosts.clone(),
                    paths,
                };
                let config = decision.to_configuration(inst, &p.cands)?;
                if validate(inst, &config, Some(p.state)).is_feasible() {
                    let b = p.engine.evaluate_reference(&config, p.alpha)?;
                    let inc = Incumbent {
                        objective: b.joint,
                        migrations: b.migrations,
                        decision,
                    };
                    if inc.beats(&run.best) {
                        run.best = Some(inc);
                    }
                }
                if !advance(&mut digits, &radix) {
                    break;
                }
            }
        }
        if !advance(&mut hosts, &host_radix) {
            break;
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::advance;

    #[test]
    fn counter_visits_every_digit_vector() {
        let radix = [3, 3];
        let mut d = vec![0, 0];
        let mut seen = vec![d.clone()];
        while advance(&mut d, &radix) {
            seen.push(d.clone());
        }
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[1], vec![0, 1]);
    }
}
