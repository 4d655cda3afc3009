//! Clause-by-clause checks of the field conditions on a truncation.
//!
//! A truncation only sees finitely many vertices, so every clause that
//! involves an infinite sum or a limit |x| → ∞ is settled by the decay
//! exponents the field families carry. Without one the clause is reported
//! as unverifiable.

use serde::{Deserialize, Serialize};

use super::spec::BoundFields;
use super::Envelope;
use crate::error::{Error, Result};
use crate::graph::FiniteLattice;

pub const CONDITIONS: [&str; 8] = ["MZ_p", "MZ_a", "VZ_p", "VZ_a", "M", "V", "H", "R"];

/// `b_x² = scale · (1+|x|)^{−exponent}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightFamily {
    pub scale: f64,
    pub exponent: f64,
}

impl WeightFamily {
    pub fn b_squared(&self, r: f64) -> f64 {
        self.scale * (1.0 + r).powf(-self.exponent)
    }

    /// `b_x` per vertex.
    pub fn values(&self, lat: &FiniteLattice) -> Vec<f64> {
        (0..lat.len()).map(|x| self.b_squared(lat.abs_position(x)).sqrt()).collect()
    }
}

/// Weight data named by the conditions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<WeightFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Envelope>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    UnverifiableAtTruncation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClauseReport {
    pub clause: String,
    pub verdict: Verdict,
    /// Value measured on the truncation.
    pub measured: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub verdict: Verdict,
    pub clauses: Vec<ClauseReport>,
    pub weights: Weights,
}

/// Sampling options for [`check_condition`].
#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    /// Time samples per period (or per window for aperiodic fields).
    pub samples: usize,
    /// Time window `[0, window]` for Condition R.
    pub window: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            window: 20.0,
        }
    }
}

struct Ctx<'a> {
    lat: &'a FiniteLattice,
    f: &'a BoundFields,
    times: Vec<f64>,
    dim: f64,
}

impl Ctx<'_> {
    fn over_times(&self, mut g: impl FnMut(f64) -> f64) -> Vec<f64> {
        self.times.iter().map(|&t| g(t)).collect()
    }

    fn sup(&self, g: impl FnMut(f64) -> f64) -> f64 {
        self.over_times(g).into_iter().fold(0.0, f64::max)
    }

    /// Trapezoid over the sample times.
    fn integral(&self, g: impl FnMut(f64) -> f64) -> f64 {
        let v = self.over_times(g);
        self.times
            .windows(2)
            .zip(v.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
            .sum()
    }
}

fn clause(name: &str, verdict: Verdict, measured: f64, bound: Option<f64>, note: impl Into<String>) -> ClauseReport {
    ClauseReport {
        clause: name.into(),
        verdict,
        measured,
        bound,
        note: note.into(),
    }
}

/// Truncated check combined with a tail certificate.
fn settle(holds_on_truncation: bool, tail: Option<bool>) -> Verdict {
    match (holds_on_truncation, tail) {
        (false, _) => Verdict::Fail,
        (true, Some(true)) => Verdict::Pass,
        (true, Some(false)) => Verdict::Fail,
        (true, None) => Verdict::UnverifiableAtTruncation,
    }
}

fn summable(decay: Option<f64>, power: f64, dim: f64) -> Option<bool> {
    decay.map(|e| e * power > dim)
}

fn need<T: Copy>(v: Option<T>, condition: &str, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingWeight {
        condition: condition.into(),
        field: field.into(),
    })
}

fn bp_range(dim: f64, p: f64) -> bool {
    if dim == 3.0 {
        (1.0..1.2).contains(&p)
    } else if dim >= 4.0 {
        (1.0..4.0 / 3.0).contains(&p)
    } else {
        false
    }
}

fn weight_class(ctx: &Ctx, w: &Weights, name: &str, kind: char) -> Result<ClauseReport> {
    let b = need(w.b, name, "b")?;
    Ok(match kind {
        'a' => {
            let a = need(w.a, name, "a")?;
            let ok = a > 1.0 && b.exponent >= a && b.scale > 0.0;
            clause(
                "weight_class",
                if ok { Verdict::Pass } else { Verdict::Fail },
                b.exponent,
                Some(a),
                "(1+|x|)^a b² bounded with a > 1",
            )
        }
        _ => {
            let p = need(w.p, name, "p")?;
            let ok = bp_range(ctx.dim, p) && b.exponent * p > ctx.dim && b.scale > 0.0;
            clause(
                "weight_class",
                if ok { Verdict::Pass } else { Verdict::Fail },
                b.exponent * p,
                Some(ctx.dim),
                "b² in ℓ^p with d ≥ 3 and p in the admissible range",
            )
        }
    })
}

fn q_period_zero(ctx: &Ctx) -> ClauseReport {
    let (_, r) = ctx.f.big_q.period_residual();
    let tol = ctx.f.big_q.tolerance();
    let tail = if ctx.f.q.is_zero() { Some(true) } else { ctx.f.big_q.decay_exponent().map(|_| true) };
    clause("Q_period_zero", settle(r <= tol, tail), r, Some(tol), "|Q_x(τ)| on retained vertices")
}

fn periodicity(ctx: &Ctx, name: &str, mut defect: impl FnMut(f64) -> f64, structural: bool) -> ClauseReport {
    let d = ctx.sup(&mut defect);
    clause(name, settle(d <= 1e-12, Some(structural)), d, Some(1e-12), "sampled |g(t+τ) − g(t)|")
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn outer_shell_sup(ctx: &Ctx) -> f64 {
    let l = ctx.lat.radius();
    let shell: Vec<usize> = (0..ctx.lat.len()).filter(|&x| ctx.lat.sup_norm(x) == l).collect();
    ctx.sup(|t| {
        let q = ctx.f.big_q.eval(t);
        shell.iter().fold(0.0, |m, &x| m.max(q[x].abs()))
    })
}

fn mz(ctx: &Ctx, w: &Weights, kind: char) -> Result<Vec<ClauseReport>> {
    let name = if kind == 'a' { "MZ_a" } else { "MZ_p" };
    let b = need(w.b, name, "b")?;
    let bv = b.values(ctx.lat);
    let f = ctx.f;
    let tau = f.period;
    let edges = ctx.lat.edges();
    let ratio = ctx.sup(|t| {
        f.beta(t)
            .iter()
            .zip(edges)
            .fold(0.0, |m, (beta, e)| m.max(beta.abs() / (2.0 * bv[e.x] * bv[e.y])))
    });
    let tail = f.beta_decay().map(|e| e >= b.exponent);
    Ok(vec![
        periodicity(ctx, "beta_periodic", |t| sup_diff(&f.beta(t), &f.beta(t + tau)), f.delta.is_periodic()),
        weight_class(ctx, w, name, kind)?,
        clause("beta_bound", settle(ratio <= 1.0, tail), ratio, Some(1.0), "max |β(e,t)| / (2 b_x b_y)"),
    ])
}

fn vz(ctx: &Ctx, w: &Weights, kind: char) -> Result<Vec<ClauseReport>> {
    let name = if kind == 'a' { "VZ_a" } else { "VZ_p" };
    let b = need(w.b, name, "b")?;
    let bv = b.values(ctx.lat);
    let f = ctx.f;
    let n = ctx.lat.len();
    let v_ratio = ctx.sup(|t| {
        let v = f.v.sample(t);
        (0..n).fold(0.0, |m, x| m.max(v[x].abs() / (bv[x] * bv[x])))
    });
    let v_tail = f.v.decay_exponent().map(|e| e >= b.exponent);
    let q_decay = f.big_q.decay_exponent();
    let shell = outer_shell_sup(ctx);
    let q_decay_verdict = if f.q.is_zero() {
        Verdict::Pass
    } else {
        match q_decay {
            Some(e) if e > 0.0 => Verdict::Pass,
            Some(_) => Verdict::Fail,
            None => Verdict::UnverifiableAtTruncation,
        }
    };
    let edges = ctx.lat.edges();
    let dq_ratio = ctx.sup(|t| {
        let q = f.big_q.eval(t);
        edges
            .iter()
            .fold(0.0, |m, e| m.max((q[e.y] - q[e.x]).abs() / (bv[e.x] * bv[e.y])))
    });
    let dq_tail = if f.q.is_zero() { Some(true) } else { q_decay.map(|e| e >= b.exponent) };
    let sup_vq = ctx.sup(|t| {
        let (v, q) = (f.v.sample(t), f.q.sample(t));
        v.iter().chain(&q).fold(0.0, |m, z| m.max(z.abs()))
    });
    Ok(vec![
        clause("vq_bounded", Verdict::Pass, sup_vq, None, "sup |v|, |q| over samples; families are bounded"),
        clause("v_bound", settle(v_ratio <= 1.0, v_tail), v_ratio, Some(1.0), "max |v_x(t)| / b_x²"),
        q_period_zero(ctx),
        clause("Q_decay", q_decay_verdict, shell, None, "sup_t |Q_x(t)| on the outermost shell"),
        clause("Q_difference", settle(dq_ratio <= 1.0, dq_tail), dq_ratio, Some(1.0), "max |Q_y − Q_x| / (b_x b_y)"),
        weight_class(ctx, w, name, kind)?,
    ])
}

fn m_condition(ctx: &Ctx) -> Vec<ClauseReport> {
    let f = ctx.f;
    let tau = f.period;
    let pmax = f.p.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let integral = ctx.integral(|t| f.delta.sample(t).iter().map(|d| d.sin().abs()).sum());
    let tail = if f.delta.is_zero() || integral == 0.0 {
        Some(true)
    } else {
        summable(f.delta.decay_exponent(), 1.0, ctx.dim)
    };
    vec![
        clause("p_bounded", settle(pmax.is_finite(), Some(true)), pmax, None, "max |𝔭_x|"),
        periodicity(
            ctx,
            "delta_periodic",
            |t| sup_diff(&f.delta.sample(t), &f.delta.sample(t + tau)),
            f.delta.is_periodic(),
        ),
        clause(
            "sin_delta_integrable",
            settle(integral.is_finite(), tail),
            integral,
            None,
            "∫_0^τ Σ_e |sin δ(e,t)| dt",
        ),
    ]
}

fn q_l2(ctx: &Ctx, name: &str) -> ClauseReport {
    let f = ctx.f;
    let val = ctx.integral(|t| f.big_q.eval(t).iter().map(|q| q * q).sum());
    let tail = if f.q.is_zero() { Some(true) } else { summable(f.big_q.decay_exponent(), 2.0, ctx.dim) };
    clause(name, settle(val.is_finite(), tail), val, None, "∫_0^τ Σ_x Q_x(t)² dt")
}

fn v_l1(ctx: &Ctx, name: &str) -> ClauseReport {
    let f = ctx.f;
    let val = ctx.integral(|t| f.v.sample(t).iter().map(|v| v.abs()).sum());
    let tail = if f.v.is_zero() { Some(true) } else { summable(f.v.decay_exponent(), 1.0, ctx.dim) };
    clause(name, settle(val.is_finite(), tail), val, None, "∫_0^τ Σ_x |v_x(t)| dt")
}

fn q_linf(ctx: &Ctx, name: &str) -> ClauseReport {
    let f = ctx.f;
    let val = ctx.integral(|t| f.q.sample(t).iter().fold(0.0, |m, q| m.max(q.abs())));
    clause(name, settle(val.is_finite(), Some(true)), val, None, "∫_0^τ sup_x |q_x(t)| dt")
}

/// `Σ_{e ∈ 𝒜} |Q_y − Q_x|` summed over both orientations.
fn q_edge_sum(ctx: &Ctx, t: f64) -> f64 {
    let q = ctx.f.big_q.eval(t);
    2.0 * ctx.lat.edges().iter().map(|e| (q[e.y] - q[e.x]).abs()).sum::<f64>()
}

fn q_difference_l1(ctx: &Ctx, name: &str, note: &str) -> ClauseReport {
    let f = ctx.f;
    let val = ctx.integral(|t| q_edge_sum(ctx, t));
    let tail = if f.q.is_zero() {
        Some(true)
    } else {
        match f.big_q.decay_exponent() {
            Some(e) if e > ctx.dim => Some(true),
            _ => None,
        }
    };
    clause(name, settle(val.is_finite(), tail), val, None, note)
}

fn v_condition(ctx: &Ctx) -> Vec<ClauseReport> {
    vec![
        v_l1(ctx, "v_L1_l1"),
        q_linf(ctx, "q_L1_linf"),
        q_period_zero(ctx),
        q_l2(ctx, "Q_L2_l2"),
        q_difference_l1(ctx, "Q_difference_L1", "∫_0^τ Σ_{e=(x,y)} |Q_y − Q_x| dt"),
    ]
}

fn h_condition(ctx: &Ctx) -> Vec<ClauseReport> {
    let f = ctx.f;
    // ∫_0^t q_x Q_x ds = Q_x(t)²/2 for diagonal q
    let qq = ctx.sup(|t| f.big_q.eval(t).iter().map(|q| 0.5 * q * q).sum());
    let qq_tail = if f.q.is_zero() { Some(true) } else { summable(f.big_q.decay_exponent(), 2.0, ctx.dim) };
    vec![
        q_linf(ctx, "q_L1_B"),
        v_l1(ctx, "v_L1_B1"),
        q_period_zero(ctx),
        q_l2(ctx, "Q_L2_B2"),
        clause("qQ_Linf_B1", settle(qq.is_finite(), qq_tail), qq, None, "sup_t Σ_x Q_x(t)²/2"),
        q_difference_l1(
            ctx,
            "commutator_L1_B1",
            "∫_0^τ Σ_{e=(x,y)} |Q_x − Q_y| dt, an upper bound for ∫ ‖QΔ − ΔQ‖_B1",
        ),
    ]
}

fn r_condition(ctx: &Ctx, w: &Weights) -> Result<Vec<ClauseReport>> {
    let b = need(w.b, "R", "b")?;
    let a = need(w.a, "R", "a")?;
    let p = need(w.p, "R", "p")?;
    let c = need(w.c, "R", "c")?;
    let env = need(w.w.as_ref(), "R", "w")?;
    let f = ctx.f;
    let lat = ctx.lat;
    let n = lat.len();
    let bv = b.values(lat);
    let big_f: Vec<f64> = (0..n).map(|x| c * (1.0 + lat.abs_position(x)).powf(-a) + bv[x]).collect();
    let late: Vec<f64> = ctx.times.iter().copied().filter(|&t| t >= 1.0).collect();
    let shell_late = {
        let l = lat.radius();
        late.iter().fold(0.0f64, |m, &t| {
            let q = f.big_q.eval(t);
            (0..n).filter(|&x| lat.sup_norm(x) == l).fold(m, |m, x| m.max(q[x].abs()))
        })
    };
    let q_decay = if f.q.is_zero() {
        Verdict::Pass
    } else {
        match f.big_q.field().primitive_decay_exponent() {
            Some(e) if e > 0.0 => Verdict::Pass,
            Some(_) => Verdict::Fail,
            None => Verdict::UnverifiableAtTruncation,
        }
    };
    let v_ratio = ctx.sup(|t| {
        let v = f.v.sample(t);
        let wt = env.eval(t);
        (0..n).fold(0.0, |m, x| m.max(v[x].abs() / (wt * big_f[x])))
    });
    let f_decay = a.min(0.5 * b.exponent);
    let v_tail = if f.v.is_zero() { Some(true) } else { f.v.decay_exponent().map(|e| e >= f_decay) };
    let edges = lat.edges();
    let e_ratio = ctx.sup(|t| {
        let beta = f.beta(t);
        let q = f.big_q.eval(t);
        let wt = env.eval(t);
        edges.iter().zip(&beta).fold(0.0, |m, (e, be)| {
            m.max((be.abs() + (q[e.y] - q[e.x]).abs()) / (wt * big_f[e.y]))
        })
    });
    let e_tail = match (f.beta_decay(), f.big_q.decay_exponent()) {
        (Some(x), Some(y)) => Some(x.min(y) >= f_decay),
        (Some(x), None) if f.q.is_zero() => Some(x >= f_decay),
        _ => None,
    };
    let b_lp = bp_range(ctx.dim, p) && 0.5 * b.exponent * p > ctx.dim;
    Ok(vec![
        clause(
            "dimension",
            if ctx.dim >= 3.0 { Verdict::Pass } else { Verdict::Fail },
            ctx.dim,
            Some(3.0),
            "d ≥ 3",
        ),
        clause("Q_decay_late", q_decay, shell_late, None, "sup_{t≥1} |Q_x(t)| on the outermost shell"),
        clause(
            "v_bound",
            settle(v_ratio <= 1.0, v_tail),
            v_ratio,
            Some(1.0),
            "max |v_x(t)| / (w(t) F_x) over the sampled window",
        ),
        clause(
            "edge_bound",
            settle(e_ratio <= 1.0, e_tail),
            e_ratio,
            Some(1.0),
            "max (|β| + |Q_y − Q_x|) / (w(t) F_y) over the sampled window",
        ),
        clause(
            "w_L2",
            if env.square_integrable() { Verdict::Pass } else { Verdict::Fail },
            0.0,
            None,
            "w ∈ L²(R)",
        ),
        clause(
            "b_lp",
            if b_lp { Verdict::Pass } else { Verdict::Fail },
            0.5 * b.exponent * p,
            Some(ctx.dim),
            "b ∈ ℓ^p with p in the admissible range",
        ),
        clause(
            "a_gt_one",
            if a > 1.0 { Verdict::Pass } else { Verdict::Fail },
            a,
            Some(1.0),
            "a > 1",
        ),
    ])
}

/// Checks the named condition clause by clause on `lat`.
pub fn check_condition(
    name: &str,
    lat: &FiniteLattice,
    fields: &BoundFields,
    weights: &Weights,
    opts: CheckOptions,
) -> Result<ConditionReport> {
    if !CONDITIONS.contains(&name) {
        return Err(Error::UnknownCondition(name.into()));
    }
    let samples = opts.samples.max(2);
    let span = if name == "R" { opts.window } else { fields.period };
    let times = (0..=samples).map(|j| span * j as f64 / samples as f64).collect();
    let ctx = Ctx {
        lat,
        f: fields,
        times,
        dim: lat.graph().dim() as f64,
    };
    let clauses = match name {
        "MZ_p" => mz(&ctx, weights, 'p')?,
        "MZ_a" => mz(&ctx, weights, 'a')?,
        "VZ_p" => vz(&ctx, weights, 'p')?,
        "VZ_a" => vz(&ctx, weights, 'a')?,
        "M" => m_condition(&ctx),
        "V" => v_condition(&ctx),
        "H" => h_condition(&ctx),
        _ => r_condition(&ctx, weights)?,
    };
    let verdict = if clauses.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if clauses.iter().any(|c| c.verdict == Verdict::UnverifiableAtTruncation) {
        Verdict::UnverifiableAtTruncation
    } else {
        Verdict::Pass
    };
    Ok(ConditionReport {
        condition: name.into(),
        verdict,
        clauses,
        weights: weights.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{ElectricField, Envelope, FieldSpec};
    use crate::graph::PeriodicGraph;

    fn lattice(d: usize, l: usize) -> FiniteLattice {
        FiniteLattice::new(&PeriodicGraph::hypercubic(d), l).unwrap()
    }

    fn full_weights() -> Weights {
        Weights {
            b: Some(WeightFamily { scale: 1.0, exponent: 8.0 }),
            a: Some(2.0),
            p: Some(1.1),
            c: Some(1.0),
            w: Some(Envelope::Algebraic { s: 1.0 }),
        }
    }

    #[test]
    fn zero_fields_pass_everything() {
        let lat = lattice(3, 2);
        let spec = FieldSpec::default();
        let f = spec.bind(&lat, 1.0).unwrap();
        for name in CONDITIONS {
            let r = check_condition(name, &lat, &f, &full_weights(), CheckOptions::default()).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "{name}: {:?}", r.clauses);
        }
    }

    #[test]
    fn moving_bump_satisfies_vz_a() {
        let lat = lattice(1, 50);
        let spec = FieldSpec {
            v: ElectricField::MovingBump {
                amplitude: 0.5,
                a: 2.0,
                envelope: Envelope::None,
            },
            ..FieldSpec::default()
        };
        let f = spec.bind(&lat, spec.period).unwrap();
        let w = Weights {
            b: Some(WeightFamily { scale: 4.0, exponent: 2.0 }),
            a: Some(1.5),
            ..Weights::default()
        };
        let r = check_condition("VZ_a", &lat, &f, &w, CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.clauses);
        assert_eq!(r.clauses.len(), 6);
    }

    #[test]
    fn oscillatory_q_satisfies_vz_a() {
        let lat = lattice(1, 40);
        let spec = FieldSpec {
            q: ElectricField::SiteOscillatory {
                amplitude: 0.5,
                exponent: None,
                gamma: 1.0,
            },
            ..FieldSpec::default()
        };
        let f = spec.bind(&lat, spec.period).unwrap();
        let w = Weights {
            b: Some(WeightFamily { scale: 4.0, exponent: 2.0 }),
            a: Some(2.0),
            ..Weights::default()
        };
        let r = check_condition("VZ_a", &lat, &f, &w, CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.clauses);
        let decay = r.clauses.iter().find(|c| c.clause == "Q_decay").unwrap();
        assert!(decay.measured <= 0.5 / 1600.0 + 1e-15);
    }

    #[test]
    fn uniform_v_fails_summability() {
        let lat = lattice(1, 5);
        let spec = FieldSpec {
            period: 1.0,
            v: ElectricField::Separable {
                amplitude: 1.0,
                spatial: crate::driving::Spatial::Uniform,
                temporal: crate::driving::Temporal::Cos { harmonic: 1, phase: 0.0 },
                envelope: Envelope::None,
            },
            ..FieldSpec::default()
        };
        let f = spec.bind(&lat, 1.0).unwrap();
        let r = check_condition("V", &lat, &f, &Weights::default(), CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn errors() {
        let lat = lattice(1, 2);
        let f = FieldSpec::default().bind(&lat, 1.0).unwrap();
        assert!(matches!(
            check_condition("Z", &lat, &f, &Weights::default(), CheckOptions::default()),
            Err(Error::UnknownCondition(_))
        ));
        assert!(matches!(
            check_condition("MZ_a", &lat, &f, &Weights::default(), CheckOptions::default()),
            Err(Error::MissingWeight { .. })
        ));
    }

    #[test]
    fn r_fails_dimension_below_three() {
        let lat = lattice(1, 3);
        let f = FieldSpec::default().bind(&lat, 1.0).unwrap();
        let r = check_condition("R", &lat, &f, &full_weights(), CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.clauses[0].verdict, Verdict::Fail);
    }
}
