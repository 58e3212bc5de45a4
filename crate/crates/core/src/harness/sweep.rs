//! Convergence sweeps over mesh resolutions.

use serde::Serialize;

use super::{run_case, CaseConfig, ErrorRow, RunResult};
use crate::VofError;

/// Observed order between two resolutions, or the least-squares fit over all
/// of them (`pair = "fit"`, coarsest and finest listed).
#[derive(Clone, Debug, Serialize)]
pub struct OrderRow {
    pub phase: String,
    pub norm: String,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub error_coarse: f64,
    pub error_fine: f64,
    pub order: f64,
    pub pair: String,
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub runs: Vec<RunResult>,
    pub orders: Vec<OrderRow>,
}

impl Sweep {
    /// Least-squares order of `phase` in `norm` (`l1`, `linf` or `energy`).
    pub fn order(&self, phase: &str, norm: &str) -> Option<f64> {
        self.orders.iter().find(|o| o.phase == phase && o.norm == norm && o.pair == "fit").map(|o| o.order)
    }

    pub fn errors(&self) -> Vec<ErrorRow> {
        self.runs.iter().flat_map(|r| r.errors.iter().cloned()).collect()
    }
}

/// Slope of `-log(err)` against `log(n)` by least squares. Zero errors make
/// the order infinite.
pub fn fit_order(ns: &[usize], errs: &[f64]) -> f64 {
    if errs.contains(&0.0) {
        return f64::INFINITY;
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.abs().ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -sxy / sxx
}

/// Order rows from finished runs sorted by resolution.
pub fn order_rows(runs: &[&RunResult]) -> Vec<OrderRow> {
    let ns: Vec<usize> = runs.iter().map(|r| r.config.n).collect();
    let mut out = Vec::new();
    for phase in ["liquid", "gas", "interface"] {
        let norms: &[&str] = if phase == "interface" { &["l1", "linf"] } else { &["l1", "linf", "energy"] };
        for &norm in norms {
            let errs: Vec<f64> = runs
                .iter()
                .map(|r| {
                    let e = r.error(phase).expect("every run reports all phases");
                    match norm {
                        "l1" => e.l1,
                        "linf" => e.linf,
                        _ => e.rel_energy_change.abs(),
                    }
                })
                .collect();
            for w in 0..errs.len().saturating_sub(1) {
                out.push(OrderRow {
                    phase: phase.into(),
                    norm: norm.into(),
                    n_coarse: ns[w],
                    n_fine: ns[w + 1],
                    error_coarse: errs[w],
                    error_fine: errs[w + 1],
                    order: fit_order(&ns[w..w + 2], &errs[w..w + 2]),
                    pair: "successive".into(),
                });
            }
            if errs.len() >= 2 {
                out.push(OrderRow {
                    phase: phase.into(),
                    norm: norm.into(),
                    n_coarse: ns[0],
                    n_fine: ns[ns.len() - 1],
                    error_coarse: errs[0],
                    error_fine: errs[errs.len() - 1],
                    order: fit_order(&ns, &errs),
                    pair: "fit".into(),
                });
            }
        }
    }
    out
}

/// Run `base` at every resolution in `ns` and fit observed orders. When
/// `base.out` is set each run writes into `<out>/n<N>/` and the sweep writes
/// `errors.csv` and `orders.csv` at the top.
pub fn convergence_sweep(base: &CaseConfig, ns: &[usize]) -> Result<Sweep, VofError> {
    if ns.len() < 2 {
        return Err(VofError::InvalidConfig("a sweep needs at least two resolutions".into()));
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    let mut runs = Vec::new();
    for &n in &ns {
        let out = base.out.as_ref().map(|d| d.join(format!("n{n}")));
        runs.push(run_case(&CaseConfig { n, out, ..base.clone() })?);
    }
    let orders = order_rows(&runs.iter().collect::<Vec<_>>());
    let sweep = Sweep { runs, orders };
    if let Some(dir) = &base.out {
        super::output::write_rows(&dir.join("errors.csv"), &sweep.errors())?;
        super::output::write_rows(&dir.join("orders.csv"), &sweep.orders)?;
    }
    Ok(sweep)
}
