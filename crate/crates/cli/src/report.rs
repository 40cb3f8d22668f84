//! Text and CSV output for the a-priori and transfer-curve subcommands.

use std::fmt::Write as _;

use rles_core::apriori::{AprioriReport, ConvergenceRow};
use rles_core::filters::transfer_at;
use rles_core::FilterKind;

use crate::error::{CliError, Result};

/// Gaussian, Taylor and Padé transfer functions on `points` evenly spaced
/// values of `x = δ²k²/(4γ)` in `[0, x_max]`.
pub fn transfer_curves_csv(x_max: f64, points: usize) -> Result<String> {
    if !(x_max > 0.0 && x_max.is_finite()) || points < 2 {
        return Err(CliError::Syntax {
            line: 0,
            message: format!("need x_max > 0 and at least 2 points, got {x_max} and {points}"),
        });
    }
    let mut s = String::from("x,gaussian,taylor,pade\n");
    for i in 0..points {
        let x = x_max * i as f64 / (points - 1) as f64;
        let _ = writeln!(
            s,
            "{x:e},{:e},{:e},{:e}",
            transfer_at(FilterKind::Gaussian, x),
            transfer_at(FilterKind::Taylor, x),
            transfer_at(FilterKind::Pade, x)
        );
    }
    Ok(s)
}

pub fn apriori_summary(r: &AprioriReport) -> String {
    let c = &r.correlation;
    let mut s = String::new();
    let _ = writeln!(s, "grid             {0}^3", r.n);
    let _ = writeln!(s, "filter width     {} h", r.delta_over_h);
    let _ = writeln!(s, "model            {}", r.model);
    let _ = writeln!(s, "pooled corr      {:.4}", c.pooled);
    let names = ["11", "12", "13", "22", "23", "33"];
    let comps: Vec<String> = names.iter().zip(c.components).map(|(n, v)| format!("{n}:{v:.3}")).collect();
    let _ = writeln!(s, "component corr   {}", comps.join(" "));
    let _ = writeln!(s, "|tau exact|      {:.6e}", r.exact_norm);
    let _ = writeln!(s, "|tau model|      {:.6e}", r.model_norm);
    let _ = writeln!(s, "|tau gradient|   {:.6e}", r.gradient_norm);
    let _ = writeln!(s, "|tau rles|       {:.6e}", r.rles_norm);
    s
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("delta_over_h,rel_error,rles_gap,order\n");
    for r in rows {
        let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:e},{:e},{order}", r.delta_over_h, r.rel_error, r.rles_gap);
    }
    s
}
