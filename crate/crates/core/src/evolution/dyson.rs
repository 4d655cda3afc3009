use nalgebra::DMatrix;

use super::{Propagator, PropagatorMethod};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, hermitian_eigen, op_norm, unitarity_defect};
use crate::scalar::{czero, lit, to_f64, Real, C};

/// Highest Dyson order accepted.
pub const MAX_ORDER: usize = 200;
/// Largest quadrature grid accepted per axis.
pub const MAX_NODES: usize = 1_000_001;

/// `Σ_{j>J} A^j / j!`.
pub fn dyson_tail(a: f64, order: usize) -> f64 {
    let mut term = 1.0;
    for j in 1..=order {
        term *= a / j as f64;
    }
    let mut tail = 0.0;
    let mut j = order;
    loop {
        j += 1;
        term *= a / j as f64;
        tail += term;
        if term <= tail * f64::EPSILON || term == 0.0 || j > order + 10_000 {
            return tail;
        }
    }
}

/// Smallest `J` with `dyson_tail(a, J) ≤ target`.
pub fn order_for_tail(a: f64, target: f64) -> Result<usize> {
    (0..=MAX_ORDER).find(|&j| dyson_tail(a, j) <= target).ok_or_else(|| {
        Error::QuadratureBudgetExceeded(format!("Dyson order above {MAX_ORDER} needed for A = {a}, tail {target:e}"))
    })
}

/// `min{A, 1} e^A`, the a priori bound on `‖U − U_0‖`.
pub fn dyson_bound(a: f64) -> f64 {
    a.min(1.0) * a.exp()
}

#[derive(Clone, Debug)]
pub struct DysonPropagator<T: Real> {
    pub propagator: Propagator<T>,
    /// Unperturbed `U_0(t, s) = e^{−i(t−s)h_0}`.
    pub free: DMatrix<C<T>>,
    /// `A(t, s) = ∫_s^t ‖V(σ)‖ dσ`.
    pub a_integral: f64,
    pub nodes: usize,
}

/// `U(t, s) ≈ U_0(t, s) Σ_{j≤J} (−i)^j X_j(t)` for `h_0 + V(t)`, with
/// `X_j(r) = ∫_s^r V_I(σ) X_{j−1}(σ) dσ` in the interaction picture and
/// cumulative Simpson quadrature on `nodes` points (odd).
pub fn dyson_propagator<T: Real>(
    h0: &DMatrix<C<T>>,
    v: impl Fn(f64) -> DMatrix<C<T>>,
    s: f64,
    t: f64,
    order: usize,
    nodes: usize,
) -> Result<DysonPropagator<T>> {
    if order > MAX_ORDER || nodes > MAX_NODES {
        return Err(Error::QuadratureBudgetExceeded(format!(
            "order {order} with {nodes} nodes exceeds the budget"
        )));
    }
    if nodes < 3 || nodes.is_multiple_of(2) {
        return Err(Error::ConfigInvalid(format!("Dyson quadrature needs an odd node count ≥ 3, got {nodes}")));
    }
    let n = h0.nrows();
    let eig = hermitian_eigen(h0.clone(), "Dyson free part")?;
    let h = (t - s) / (nodes - 1) as f64;
    let mut norms = Vec::with_capacity(nodes);
    let interaction: Vec<DMatrix<C<T>>> = (0..nodes)
        .map(|k| {
            let sigma = s + k as f64 * h;
            let vk = v(sigma);
            norms.push(to_f64(op_norm(&vk)));
            let u = expm_hermitian(&eig, lit(sigma - s));
            u.adjoint() * vk * u
        })
        .collect();
    let simpson = |f: &[f64]| -> f64 {
        let mut acc = f[0] + f[nodes - 1];
        for (k, x) in f.iter().enumerate().take(nodes - 1).skip(1) {
            acc += if k % 2 == 1 { 4.0 * x } else { 2.0 * x };
        }
        (acc * h / 3.0).abs()
    };
    let a_integral = simpson(&norms);

    let identity = DMatrix::<C<T>>::identity(n, n);
    let mut x: Vec<DMatrix<C<T>>> = vec![identity.clone(); nodes];
    let mut sum = identity;
    let mut phase = C::new(T::one(), T::zero());
    let minus_i = C::new(T::zero(), -T::one());
    let (h3, h12) = (C::new(lit::<T>(h / 3.0), T::zero()), C::new(lit::<T>(h / 12.0), T::zero()));
    let c = |a: f64| C::new(lit::<T>(a), T::zero());
    for _ in 0..order {
        let g: Vec<DMatrix<C<T>>> = interaction.iter().zip(&x).map(|(vi, xk)| vi * xk).collect();
        let mut next = vec![DMatrix::from_element(n, n, czero::<T>()); nodes];
        for k in (0..nodes - 1).step_by(2) {
            next[k + 1] = &next[k] + (&g[k] * c(5.0) + &g[k + 1] * c(8.0) - &g[k + 2]) * h12;
            next[k + 2] = &next[k] + (&g[k] + &g[k + 1] * c(4.0) + &g[k + 2]) * h3;
        }
        x = next;
        phase *= minus_i;
        sum += &x[nodes - 1] * phase;
    }
    let free = expm_hermitian(&eig, lit(t - s));
    let matrix = &free * sum;
    Ok(DysonPropagator {
        propagator: Propagator {
            unitarity_defect: unitarity_defect(&matrix),
            matrix,
            method: PropagatorMethod::Dyson { order },
            s,
            t,
            tail_bound: lit(dyson_tail(a_integral, order)),
        },
        free,
        a_integral,
        nodes,
    })
}
