//! Norms against `dω = dx / (1 + |x|^{n+2s})`.

use super::function::GridFunction;
use super::operator::{arc_rule, box_exit};
use crate::error::{Error, Result};

/// `(∫ f^2 dω)^{1/2}`: midpoint rule over the nodes plus the tail integral in closed form.
///
/// The squared tail `|x|^{2p}` is only `dω`-integrable for `p < s`.
pub fn weighted_l2_norm(f: &GridFunction, s: f64) -> Result<f64> {
    check_order(s)?;
    let tail = f.tail();
    tail.check_integrable(s)?;
    let g = f.grid();
    let q = g.dim() as f64 + 2.0 * s;
    let bulk: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * v / (1.0 + radius(g.point(i)).powf(q)))
        .sum::<f64>()
        * g.cell_volume();
    let far = if tail.coeff == 0.0 {
        0.0
    } else {
        tail.coeff * tail.coeff * outer_integral(g.dim(), far_box(f), 2.0 * tail.exponent, q)
    };
    Ok((bulk + far).sqrt())
}

/// `∫ |f| dω`, with the tail requiring `p < 2s`.
pub fn weighted_l1_norm(f: &GridFunction, s: f64) -> Result<f64> {
    check_order(s)?;
    let tail = f.tail();
    tail.check_integrable(2.0 * s)?;
    let g = f.grid();
    let q = g.dim() as f64 + 2.0 * s;
    let bulk: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs() / (1.0 + radius(g.point(i)).powf(q)))
        .sum::<f64>()
        * g.cell_volume();
    let far = if tail.coeff == 0.0 {
        0.0
    } else {
        tail.coeff.abs() * outer_integral(g.dim(), far_box(f), tail.exponent, q)
    };
    Ok(bulk + far)
}

/// `∫ f^+ dω` of the positive part.
pub fn weighted_l1_positive(f: &GridFunction, s: f64) -> Result<f64> {
    let mut plus = f.clone();
    for v in plus.values_mut() {
        *v = v.max(0.0);
    }
    let t = plus.tail();
    let plus = plus.with_tail(if t.coeff > 0.0 { t } else { t.scaled(0.0) });
    weighted_l1_norm(&plus, s)
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidKernel(format!("order {s} outside (0, 1]")));
    }
    Ok(())
}

fn radius(p: [f64; 2]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

fn far_box(f: &GridFunction) -> f64 {
    f.grid().exterior_radius() + 0.5 * f.grid().h()
}

/// `∫_{|x|_∞ > rr} |x|^m / (1 + |x|^q) dx` via the series `Σ (-1)^k |x|^{-q(k+1)}`
/// integrated term by term along rays (`rr >= 2` keeps it rapidly convergent).
fn outer_integral(dim: usize, rr: f64, m: f64, q: f64) -> f64 {
    let n = dim as f64;
    let radial = |rho: f64| {
        let mut acc = 0.0;
        for k in 0..200 {
            let e = m + n - q * (k as f64 + 1.0);
            let term = rho.powf(e) / (-e);
            acc += if k % 2 == 0 { term } else { -term };
            if term.abs() < 1e-17 * acc.abs() {
                break;
            }
        }
        acc
    };
    if dim == 1 {
        2.0 * radial(rr)
    } else {
        let (th, wt) = arc_rule([0.0, 0.0], rr);
        th.iter()
            .zip(&wt)
            .map(|(&t, &w)| w * radial(box_exit([0.0, 0.0], rr, t)))
            .sum()
    }
}
