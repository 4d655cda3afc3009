//! Operator norms of `ρ (Δ − λ)^{-1} ρ` on `Z^d` truncations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::driving::WeightFamily;
use crate::error::{Error, Result};
use crate::graph::{FiniteLattice, PeriodicGraph};
use crate::linalg::{BandedLu, HermitianOperator};
use crate::scalar::{inner, norm2, C};

/// Multiplication weight on both sides of the resolvent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ResolventWeight {
    /// `(1 + |x|)^{−a}`.
    Rho { a: f64 },
    /// `b_x` from `b_x² = scale (1+|x|)^{−exponent}`.
    B(WeightFamily),
}

impl ResolventWeight {
    fn values(&self, lat: &FiniteLattice) -> Vec<f64> {
        match self {
            Self::Rho { a } => (0..lat.len()).map(|x| (1.0 + lat.abs_position(x)).powf(-a)).collect(),
            Self::B(w) => w.values(lat),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Relative Ritz residual accepted for the top eigenvalue of `A*A`.
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_iter: 400, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventRow {
    pub re: f64,
    pub im: f64,
    pub norm: f64,
    /// Distance from λ to `[0, 2d]`.
    pub varrho: f64,
    /// `norm · max(1, ϱ)`, bounded uniformly by the theory.
    pub scaled: f64,
    /// False within δ of a threshold `{0, 2, …, 2d}`.
    pub in_domain: bool,
    pub lanczos_iterations: usize,
    /// Same norm from a truncated Neumann series, for `|λ| > ‖Δ‖`.
    pub neumann: Option<f64>,
    /// `‖ρ‖_∞² / ϱ`, the far-field scale.
    pub neumann_estimate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventSample {
    pub dim: usize,
    pub radius: usize,
    pub weight: ResolventWeight,
    pub delta: f64,
    pub rows: Vec<ResolventRow>,
    /// `(max − min) / norm(λ₀)` over in-domain rows with `Im λ ≠ 0` and
    /// `Re λ` inside the spectrum, where `λ₀` is the row closest to the axis.
    pub plateau_spread: Option<f64>,
}

impl ResolventSample {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "re", "im", "norm", "varrho", "scaled", "in_domain", "iterations", "neumann", "neumann_estimate",
        ])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.15e}"));
        for r in &self.rows {
            out.write_record([
                format!("{:.15e}", r.re),
                format!("{:.15e}", r.im),
                format!("{:.15e}", r.norm),
                format!("{:.15e}", r.varrho),
                format!("{:.15e}", r.scaled),
                r.in_domain.to_string(),
                r.lanczos_iterations.to_string(),
                opt(r.neumann),
                opt(r.neumann_estimate),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Top eigenvalue of a positive semidefinite operator given by its action,
/// by Lanczos with full reorthogonalization.
fn lanczos_top(apply: impl Fn(&[C<f64>]) -> Result<Vec<C<f64>>>, n: usize, opts: &LanczosOptions) -> Result<(f64, usize)> {
    let mut q: Vec<C<f64>> = (0..n).map(|i| C::new(1.0 + 0.25 * (i as f64 * 0.7).sin(), 0.0)).collect();
    let s = norm2(&q);
    q.iter_mut().for_each(|z| *z /= s);
    let mut basis: Vec<Vec<C<f64>>> = vec![q];
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut last = f64::NAN;
    for j in 0..opts.max_iter.min(n) {
        let mut w = apply(&basis[j])?;
        let a = inner(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = inner(v, &w);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= *y * c);
            }
        }
        let b = norm2(&w);
        let k = alpha.len();
        let check = k < 64 || k % 8 == 0 || b == 0.0;
        if check {
            let t = DMatrix::from_fn(k, k, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = t.symmetric_eigen();
            let (top, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
            last = theta;
            let residual = b * eig.eigenvectors[(k - 1, top)].abs();
            if residual <= opts.tol * theta.abs().max(f64::MIN_POSITIVE) || b <= 1e-14 * theta.abs() {
                return Ok((theta.max(0.0), k));
            }
        }
        if b == 0.0 {
            return Ok((last.max(0.0), k));
        }
        beta.push(b);
        basis.push(w.into_iter().map(|z| z / b).collect());
    }
    Err(Error::SolverStagnation(format!(
        "Lanczos did not converge in {} iterations (last estimate {last:e})",
        opts.max_iter
    )))
}

fn weighted<'a>(rho: &'a [f64], op: impl Fn(&[C<f64>]) -> Vec<C<f64>> + 'a) -> impl Fn(&[C<f64>]) -> Vec<C<f64>> + 'a {
    move |x| {
        let y: Vec<C<f64>> = x.iter().zip(rho).map(|(z, r)| z * *r).collect();
        op(&y).into_iter().zip(rho).map(|(z, r)| z * *r).collect()
    }
}

/// `‖ρ S ρ‖` where `S(λ)` is applied by `solve` and `S(λ)* = S(λ̄)` by `solve_adj`.
fn weighted_norm(
    rho: &[f64],
    solve: impl Fn(&[C<f64>]) -> Vec<C<f64>>,
    solve_adj: impl Fn(&[C<f64>]) -> Vec<C<f64>>,
    opts: &LanczosOptions,
) -> Result<(f64, usize)> {
    let a = weighted(rho, solve);
    let a_adj = weighted(rho, solve_adj);
    let (top, it) = lanczos_top(|x| Ok(a_adj(&a(x))), rho.len(), opts)?;
    Ok((top.sqrt(), it))
}

/// `−Σ_{k≤K} Δ^k x / λ^{k+1}` with `K` set by the geometric tail.
fn neumann_apply(delta: &HermitianOperator<f64>, norm: f64, lambda: C<f64>, x: &[C<f64>]) -> Vec<C<f64>> {
    let r = norm / lambda.norm();
    let tail = |k: usize| r.powi(k as i32 + 1) / (1.0 - r) / lambda.norm();
    let mut k_max = 0;
    while tail(k_max) > 1e-15 * (1.0 / lambda.norm()) && k_max < 4000 {
        k_max += 1;
    }
    let inv = 1.0 / lambda;
    let mut term: Vec<C<f64>> = x.iter().map(|z| -z * inv).collect();
    let mut out = term.clone();
    for _ in 0..k_max {
        term = delta.apply(&term).into_iter().map(|z| z * inv).collect();
        out.iter_mut().zip(&term).for_each(|(o, t)| *o += t);
    }
    out
}

/// Samples `‖w (Δ − λ)^{-1} w‖` on the truncation of `Z^d` of radius `radius`.
pub fn weighted_resolvent_sample(
    dim: usize,
    radius: usize,
    weight: ResolventWeight,
    lambdas: &[C<f64>],
    delta: f64,
    opts: &LanczosOptions,
) -> Result<ResolventSample> {
    if dim == 0 {
        return Err(Error::ConfigInvalid("dimension must be positive".into()));
    }
    let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(dim), radius)?;
    let lap = super::free_laplacian(&lat);
    let rho = weight.values(&lat);
    let rho_sup = rho.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let top = 2.0 * dim as f64;
    let lap_norm = lap.spectral_bounds().1;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::ConfigInvalid(format!("λ = {lambda} is not finite")));
        }
        let fwd = BandedLu::factor_shifted(&lap, lambda)?;
        let adj = BandedLu::factor_shifted(&lap, lambda.conj())?;
        let (norm, iters) = weighted_norm(&rho, |x| fwd.solve(x), |x| adj.solve(x), opts)
            .map_err(|e| e.context(format!("λ = {lambda}")))?;
        let varrho = if lambda.re < 0.0 {
            lambda.norm()
        } else if lambda.re > top {
            C::new(lambda.re - top, lambda.im).norm()
        } else {
            lambda.im.abs()
        };
        let in_domain = (0..=dim).all(|k| (lambda - C::new(2.0 * k as f64, 0.0)).norm() >= delta);
        let (neumann, neumann_estimate) = if lambda.norm() > lap_norm * 1.05 {
            let n = weighted_norm(
                &rho,
                |x| neumann_apply(&lap, lap_norm, lambda, x),
                |x| neumann_apply(&lap, lap_norm, lambda.conj(), x),
                opts,
            )?
            .0;
            (Some(n), Some(rho_sup * rho_sup / varrho))
        } else {
            (None, None)
        };
        rows.push(ResolventRow {
            re: lambda.re,
            im: lambda.im,
            norm,
            varrho,
            scaled: norm * varrho.max(1.0),
            in_domain,
            lanczos_iterations: iters,
            neumann,
            neumann_estimate,
        });
    }
    let inside: Vec<&ResolventRow> = rows
        .iter()
        .filter(|r| r.in_domain && r.im != 0.0 && r.re > 0.0 && r.re < top)
        .collect();
    let plateau_spread = (inside.len() >= 2).then(|| {
        let (lo, hi) = inside.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), r| (l.min(r.norm), h.max(r.norm)));
        let edge = inside.iter().min_by(|a, b| a.im.abs().total_cmp(&b.im.abs())).expect("nonempty");
        (hi - lo) / edge.norm
    });
    Ok(ResolventSample {
        dim,
        radius,
        weight,
        delta,
        rows,
        plateau_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, op_norm};

    #[test]
    fn matches_dense_norm_on_small_truncation() {
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 15).unwrap();
        let lap = super::super::free_laplacian(&lat).to_dense();
        let rho: Vec<f64> = (0..lat.len()).map(|x| 1.0 / (1.0 + lat.abs_position(x))).collect();
        let lambda = C::new(0.7, 0.05);
        let shifted = &lap - DMatrix::<C<f64>>::identity(lat.len(), lat.len()) * lambda;
        let r = shifted.try_inverse().unwrap();
        let w = DMatrix::from_fn(lat.len(), lat.len(), |i, j| r[(i, j)] * rho[i] * rho[j]);
        let s = weighted_resolvent_sample(1, 15, ResolventWeight::Rho { a: 1.0 }, &[lambda], 0.1, &Default::default())
            .unwrap();
        assert!((s.rows[0].norm - op_norm(&w)).abs() < 1e-8 * op_norm(&w));
    }

    #[test]
    fn far_field_matches_neumann_series() {
        let s = weighted_resolvent_sample(
            2,
            10,
            ResolventWeight::Rho { a: 1.0 },
            &[C::new(-10.0, 0.0), C::new(-20.0, 0.0)],
            0.1,
            &Default::default(),
        )
        .unwrap();
        for r in &s.rows {
            let n = r.neumann.unwrap();
            assert!((r.norm - n).abs() < 1e-9 * n);
            let est = r.neumann_estimate.unwrap();
            assert!(r.norm <= est && r.norm >= est / 2.0, "{} vs {est}", r.norm);
        }
        // falls like 1/|λ|
        let ratio = s.rows[0].norm / s.rows[1].norm;
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn threshold_norms_grow() {
        let eps = [1e-1, 1e-2];
        let lambdas: Vec<C<f64>> = eps.iter().map(|&e| C::new(0.0, e)).collect();
        let s = weighted_resolvent_sample(1, 300, ResolventWeight::Rho { a: 1.0 }, &lambdas, 0.2, &Default::default())
            .unwrap();
        assert!(s.rows.iter().all(|r| !r.in_domain));
        assert!(s.rows[1].norm > 2.0 * s.rows[0].norm);
        assert!(s.plateau_spread.is_none());
    }

    #[test]
    fn b_weight_uses_square_root() {
        let w = ResolventWeight::B(WeightFamily { scale: 4.0, exponent: 0.0 });
        let s = weighted_resolvent_sample(1, 5, w, &[C::new(-30.0, 0.0)], 0.1, &Default::default()).unwrap();
        // b = 2 everywhere, so the norm is 4‖(Δ+30)^{-1}‖ = 4/(30 + min σ)
        let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), 5).unwrap();
        let lo = hermitian_eigen(super::super::free_laplacian(&lat).to_dense(), "t").unwrap().values[0];
        assert!((s.rows[0].norm - 4.0 / (30.0 + lo)).abs() < 1e-10);
    }
}
