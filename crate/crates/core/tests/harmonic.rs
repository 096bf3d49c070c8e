use devissage::dudley::*;
use devissage::harmonic::*;
use devissage::sde::{run_ensemble, TimeGrid};
use devissage::stats::mean_and_se;
use devissage::toy::{ToyId, ToySystem};
use devissage::Execution;

fn dudley_model() -> DudleyBoundaryModel {
    DudleyBoundaryModel {
        params: DudleyParams::new(3, 1.0).unwrap(),
        tolerance: 1e-2,
    }
}

#[test]
fn half_space_from_a_symmetric_start_is_one_half() {
    let start = DudleyState::origin(3, 1.0, 0.0).unwrap().to_vec();
    let grid = TimeGrid::new(30.0, 1e-3, 100).unwrap();
    let psi = Psi::HalfSpace {
        coord: 0,
        threshold: 0.0,
    };
    let est = mc_harmonic(&dudley_model(), &start, &psi, 400, &grid, 50, Execution::default()).unwrap();
    assert!((est.value - 0.5).abs() <= 3.0 * est.std_error, "{est:?}");
    assert!(!est.warning);
}

#[test]
fn toy_harmonic_function_has_the_tower_property() {
    let model = ToyBoundaryModel {
        system: ToySystem::new(ToyId::One),
        tolerance: 1e-2,
    };
    let grid = TimeGrid::new(20.0, 1e-2, 10).unwrap();
    let psi = Psi::HalfSpace {
        coord: 0,
        threshold: 1.5,
    };
    let config = TowerConfig {
        direct_paths: 2000,
        outer: 50,
        inner: 200,
        t_mid: 5.0,
    };
    let report = tower_check(&model, &[0.0, 0.5], &psi, &config, &grid, 51, Execution::default()).unwrap();
    assert!(report.agree, "{report:?}");
    assert!(report.direct.value > 0.05 && report.direct.value < 0.95);
}

#[test]
fn toy_boundary_law_is_translation_equivariant() {
    let model = ToyBoundaryModel {
        system: ToySystem::new(ToyId::One),
        tolerance: 1e-2,
    };
    let grid = TimeGrid::new(20.0, 1e-2, 10).unwrap();
    let report =
        boundary_law_equivariance(&model, &[0.0, 0.0], &[0.5], 1000, &grid, 52, 53, Execution::default()).unwrap();
    assert!(report.min_p() > 1e-3, "{report:?}");
}

/// Threshold functionals of the terminal direction of `γ`, a tail quantity
/// of the `(α, β, γ)` sub-diffusion.
fn gamma_functionals(g: &[f64]) -> [f64; 5] {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    [
        ind(g[0] > 0.0),
        ind(g[1] > 0.0),
        ind(g[0] > g[1]),
        ind(g[0] > -g[1]),
        ind(g[0] > 2.0 * g[1]),
    ]
}

fn terminal_states(start: &DudleyState, seed: u64) -> Vec<DudleyState> {
    let params = DudleyParams::new(3, 1.0).unwrap();
    let grid = TimeGrid::new(30.0, 1e-3, 1000).unwrap();
    let ens = run_ensemble(&dudley_fields(params), &start.to_vec(), 400, &grid, seed, Execution::default()).unwrap();
    ens.paths.iter().map(|p| DudleyState::from_slice(p.last())).collect()
}

fn agree(a: &[f64], b: &[f64]) -> bool {
    let (ma, sa) = mean_and_se(a);
    let (mb, sb) = mean_and_se(b);
    (ma - mb).abs() <= 3.0 * (sa * sa + sb * sb).sqrt()
}

#[test]
fn sub_diffusion_tail_events_do_not_remember_the_start() {
    let a = terminal_states(&DudleyState::origin(3, 1.0, 0.0).unwrap(), 54);
    let b = terminal_states(
        &DudleyState::new(1.0, 2.0, vec![1.0, -0.5], vec![0.0, 0.0], 0.0).unwrap(),
        55,
    );
    for k in 0..5 {
        let fa: Vec<f64> = a.iter().map(|s| gamma_functionals(&s.gamma)[k]).collect();
        let fb: Vec<f64> = b.iter().map(|s| gamma_functionals(&s.gamma)[k]).collect();
        assert!(agree(&fa, &fb), "functional {k}");
    }
}

#[test]
fn tail_functionals_carry_nothing_beyond_the_boundary_bins() {
    // Conditioning on the sign of h_∞¹ from two starts that share h_0 must
    // leave the γ-direction functionals unchanged.
    let a = terminal_states(&DudleyState::origin(3, 1.0, 0.0).unwrap(), 56);
    let b = terminal_states(
        &DudleyState::new(0.5, 3.0, vec![-1.0, 1.0], vec![0.0, 0.0], 0.0).unwrap(),
        57,
    );
    for bin in [false, true] {
        let pick = |xs: &[DudleyState], k: usize| -> Vec<f64> {
            xs.iter()
                .filter(|s| (s.h[0] > 0.0) == bin)
                .map(|s| gamma_functionals(&s.gamma)[k])
                .collect()
        };
        for k in 0..5 {
            assert!(agree(&pick(&a, k), &pick(&b, k)), "bin {bin}, functional {k}");
        }
    }
}
