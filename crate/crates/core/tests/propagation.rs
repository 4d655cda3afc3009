use magfloquet::driving::{ElectricField, FieldSpec, Spatial, Temporal};
use magfloquet::evolution::{propagator_matrix, Hamiltonian, StepOptions, StepSequence};
use magfloquet::linalg::{max_abs_diff, StepExponential};
use magfloquet::{Complex, DrivenHamiltonian, FiniteLattice, PeriodicGraph};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn driven(radius: usize, amplitude: f64, harmonic: u32) -> DrivenHamiltonian {
    let lat = FiniteLattice::new(&PeriodicGraph::hypercubic(1), radius).unwrap();
    let spec = FieldSpec {
        period: 1.0,
        v: ElectricField::Separable {
            amplitude,
            spatial: Spatial::Exponential { rate: 0.5 },
            temporal: Temporal::Cos { harmonic, phase: 0.0 },
            envelope: Default::default(),
        },
        ..Default::default()
    };
    DrivenHamiltonian::new(&lat, spec.bind(&lat, 4.0).unwrap()).unwrap()
}

fn chebyshev_only() -> StepOptions {
    StepOptions {
        dense_threshold: 0,
        ..Default::default()
    }
}

fn identity(n: usize) -> DMatrix<Complex> {
    DMatrix::identity(n, n)
}

#[test]
fn snapshots_and_suffixes_compose_to_the_monodromy() {
    let h = driven(12, 0.8, 1);
    let opts = chebyshev_only();
    let seq = StepSequence::new(&h, 0.0, 1.0, 64, &opts).unwrap();
    let cuts = [0, 16, 40, 64];
    let mut full = identity(h.dim());
    let prefixes = seq.apply_columns_with_snapshots(&mut full, &cuts);
    let suffixes = seq.suffix_propagators(&cuts);
    for ((a, b), r) in prefixes.iter().zip(&suffixes).zip(cuts) {
        assert!(max_abs_diff(&(b * a), &full) < 1e-12, "cut {r}");
    }
    assert!(max_abs_diff(&prefixes[0], &identity(h.dim())) == 0.0);
    assert!(max_abs_diff(&prefixes[3], &full) == 0.0);
    let direct = propagator_matrix(&h, 0.0, 16.0 / 64.0, 16, &opts).unwrap();
    assert!(max_abs_diff(&direct.matrix, &prefixes[1]) < 1e-12);
}

#[test]
fn dense_and_chebyshev_steps_agree() {
    let h = driven(8, 1.3, 2);
    let cheb = propagator_matrix(&h, 0.2, 0.9, 50, &chebyshev_only()).unwrap();
    let dense = propagator_matrix(
        &h,
        0.2,
        0.9,
        50,
        &StepOptions {
            dense_threshold: 1000,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(max_abs_diff(&cheb.matrix, &dense.matrix) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn block_step_matches_columnwise(amp in -2.0f64..2.0, t in 0.0f64..1.0, dt in 0.001f64..0.3, width in 1usize..6) {

        let h = driven(9, amp, 1);
        let g = h.step_generator(t, t + dt).unwrap();
        let step = StepExponential::new(g, dt, 0, 1e-15).unwrap();
        let m = DMatrix::<Complex>::from_fn(h.dim(), width, |i, j| Complex::new((i * 7 + j) as f64 % 3.0, (i + 2 * j) as f64 % 5.0));
        let mut block = m.clone();
        step.apply_columns(&mut block);
        for j in 0..width {
            let col: Vec<Complex> = m.column(j).iter().copied().collect();
            let y = step.apply(&col);
            for (a, b) in block.column(j).iter().zip(&y) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
        step.apply_adjoint_columns(&mut block);
        prop_assert!(max_abs_diff(&block, &m) < 1e-11);
    }

    #[test]
    fn propagator_is_unitary(amp in -3.0f64..3.0, harmonic in 1u32..4, n in 8usize..64) {
        let h = driven(10, amp, harmonic);
        let p = propagator_matrix(&h, 0.0, 1.0, n, &chebyshev_only()).unwrap();
        let n = p.matrix.nrows();
        let defect = max_abs_diff(&(p.matrix.adjoint() * &p.matrix), &identity(n));
        prop_assert!(defect < 1e-12, "defect {defect}");
    }
}
