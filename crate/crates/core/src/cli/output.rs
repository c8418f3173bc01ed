use std::fmt::Write;

use super::{CellResult, LevelOutcome, RunConfig};
use crate::manufactured::{eoc, EOC_CSV_HEADER};
use crate::spaces::Variant;

pub const STUDY_CSV_HEADER: &str = "level,h_max,velocity_dofs,density_dofs,l2_u,h1_u,l2_rho,eoc_l2_u,eoc_h1_u,eoc_l2_rho,iterations,converged,min_rho,mass_drift,status";

fn status(l: &LevelOutcome) -> String {
    match (&l.failure, l.converged) {
        (Some(msg), _) => format!("failed: {}", msg.replace([',', '\n'], ";")),
        (None, true) => "ok".into(),
        (None, false) => "not-converged".into(),
    }
}

/// Rates of every level against the previous one when both have errors.
pub(super) fn rates(levels: &[LevelOutcome]) -> Vec<Option<[f64; 3]>> {
    let mut out = vec![None];
    for w in levels.windows(2) {
        out.push(match (&w[0].errors, &w[1].errors) {
            (Some(a), Some(b)) => Some([
                eoc(a.l2_u, b.l2_u, a.h_max, b.h_max),
                eoc(a.h1_u, b.h1_u, a.h_max, b.h_max),
                eoc(a.l2_rho, b.l2_rho, a.h_max, b.h_max),
            ]),
            _ => None,
        });
    }
    out.truncate(levels.len());
    out
}

/// Error report, rates and iteration statistics per level of one cell.
pub fn cell_csv(result: &CellResult) -> String {
    debug_assert!(STUDY_CSV_HEADER.starts_with(EOC_CSV_HEADER));
    let mut s = format!("{STUDY_CSV_HEADER}\n");
    for (l, rate) in result.levels.iter().zip(rates(&result.levels)) {
        let errors = match &l.errors {
            Some(e) => e.csv_line(),
            None => format!("{},,,,,,", l.level),
        };
        let rate = match rate {
            Some(r) => format!("{:.4},{:.4},{:.4}", r[0], r[1], r[2]),
            None => ",,".into(),
        };
        let _ = writeln!(s, "{errors},{rate},{},{},{:.6e},{:.3e},{}", l.iterations, l.converged, l.min_rho, l.mass_drift, status(l));
    }
    s
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn summary_markdown(config: &RunConfig, results: &[CellResult]) -> String {
    let mut s = format!("# Study: {}\n\n", config.case);
    let _ = writeln!(s, "Levels {:?}.\n", config.levels);
    for r in results {
        let c = &r.cell;
        let _ = writeln!(s, "## {} k={} nu={:e} c_M={:e}\n", c.variant, c.k, c.nu, c.c_m);
        s.push_str("| level | h_max | velocity dofs | L2 u | rate | H1 u | rate | L2 rho | rate | iterations | min rho | status |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|---|---|---|\n");
        for (l, rate) in r.levels.iter().zip(rates(&r.levels)) {
            let rate = |i: usize| rate.map(|r| format!("{:.2}", r[i])).unwrap_or_default();
            match &l.errors {
                Some(e) => {
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                        l.level,
                        sci(e.h_max),
                        e.velocity_dofs,
                        sci(e.l2_u),
                        rate(0),
                        sci(e.h1_u),
                        rate(1),
                        sci(e.l2_rho),
                        rate(2),
                        l.iterations,
                        sci(l.min_rho),
                        status(l)
                    );
                }
                None => {
                    let _ = writeln!(s, "| {} | | | | | | | | | {} | | {} |", l.level, l.iterations, status(l));
                }
            }
        }
        s.push('\n');
    }
    s
}

/// One whitespace-separated file per `(variant, nu, c_M)`: `h_max`, then per
/// order the three errors and reference lines `C h^k` (anchored at the
/// coarsest H1 error) and `C h^(k+1)` (anchored at the coarsest L2 velocity
/// error).
pub fn plot_data(config: &RunConfig, results: &[CellResult]) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for &variant in &config.variants {
        for &nu in &config.nu {
            for &c_m in &config.c_m {
                let group: Vec<&CellResult> = results
                    .iter()
                    .filter(|r| r.cell.variant == variant && r.cell.nu == nu && r.cell.c_m == c_m)
                    .collect();
                files.push((
                    format!("plot_{}_{variant}_nu{nu:e}_cm{c_m:e}.dat", config.case),
                    plot_table(variant, &group, config.levels.len()),
                ));
            }
        }
    }
    files
}

fn plot_table(variant: Variant, group: &[&CellResult], rows: usize) -> String {
    let mut s = format!("# {variant}\n# h_max");
    for r in group {
        let k = r.cell.k;
        let _ = write!(s, " l2_u_k{k} h1_u_k{k} l2_rho_k{k} ref_h{k}_k{k} ref_h{}_k{k}", k + 1);
    }
    s.push('\n');
    let num = |x: Option<f64>| x.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "nan".into());
    let h: Vec<Option<f64>> = (0..rows)
        .map(|i| group.iter().find_map(|r| r.levels[i].errors.map(|e| e.h_max)))
        .collect();
    for i in 0..rows {
        s.push_str(&num(h[i]));
        for r in group {
            let k = r.cell.k as i32;
            let e = r.levels[i].errors;
            let anchor = r.levels.iter().find_map(|l| l.errors);
            let reference = |pick: fn(&crate::manufactured::ErrorReport) -> f64, p: i32| {
                anchor.zip(h[i]).map(|(a, hi)| pick(&a) * (hi / a.h_max).powi(p))
            };
            let _ = write!(
                s,
                " {} {} {} {} {}",
                num(e.map(|e| e.l2_u)),
                num(e.map(|e| e.h1_u)),
                num(e.map(|e| e.l2_rho)),
                num(reference(|a| a.h1_u, k)),
                num(reference(|a| a.l2_u, k + 1)),
            );
        }
        s.push('\n');
    }
    s
}
