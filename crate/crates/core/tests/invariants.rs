//! Cross-module properties: kernel-catalog degeneracies that must make
//! independent code paths coincide, exact structural identities of the
//! frontier and the scaling factor, and randomized round-trip checks.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use roughmv::cli::ResultTable;
use roughmv::kernels::KernelSpec;
use roughmv::portfolio::{
    efficient_frontier, m0_forms, m_t, solve_mv, xi0, ModelParams, RateCurve,
};
use roughmv::simulate::bootstrap_bands;
use roughmv::volterra_solver::{draw_params, solve_psi_with, SolverOptions};
use roughmv::Grid;

fn market() -> ModelParams {
    ModelParams {
        v0: 0.09,
        kappa: 1.5,
        phi: 0.09,
        sigma: 0.35,
        rho: -0.65,
        theta: 0.8,
        rate: RateCurve::Constant(0.01),
        horizon: 1.0,
        x0: 1.0,
        c: 1.25,
    }
}

/// The power kernel at exponent 1 is the constant kernel; the two take
/// different quadrature paths, so agreement is a real cross-check.
#[test]
fn unit_exponent_power_kernel_collapses_to_constant() {
    let p = market();
    let grid = Grid::new(1.0, 400).unwrap();
    let options = SolverOptions::default();
    for scale in [0.7, 1.0, 1.9] {
        let flat = solve_psi_with(&p, &KernelSpec::constant(scale).unwrap(), &grid, options)
            .unwrap();
        let power = solve_psi_with(
            &p,
            &KernelSpec::fractional(scale, 1.0).unwrap(),
            &grid,
            options,
        )
        .unwrap();
        for i in 0..grid.len() {
            let gap = (flat.value(i) - power.value(i)).abs();
            assert!(gap <= 1e-12, "scale {scale}, node {i}: gap {gap:.3e}");
        }
    }
}

/// A zero decay rate turns the exponential kernel into the constant one.
#[test]
fn zero_decay_exponential_kernel_collapses_to_constant() {
    let p = market();
    let grid = Grid::new(1.0, 400).unwrap();
    let options = SolverOptions::default();
    let flat = solve_psi_with(&p, &KernelSpec::constant(1.3).unwrap(), &grid, options).unwrap();
    let exp = solve_psi_with(
        &p,
        &KernelSpec::exponential(1.3, 0.0).unwrap(),
        &grid,
        options,
    )
    .unwrap();
    for i in 0..grid.len() {
        let gap = (flat.value(i) - exp.value(i)).abs();
        assert!(gap <= 1e-12, "node {i}: gap {gap:.3e}");
    }
}

/// The anchored scaling factor evaluated on the time-0 forward-variance
/// curve must reproduce the direct time-0 form, here for a genuinely
/// singular kernel.
#[test]
fn anchored_scaling_factor_matches_direct_form_on_singular_kernel() {
    let p = market();
    let grid = Grid::new(1.0, 2000).unwrap();
    let kernel = KernelSpec::fractional(1.0, 0.7).unwrap();
    let psi = solve_psi_with(&p, &kernel, &grid, SolverOptions::default()).unwrap();
    let (direct, _) = m0_forms(&p, &psi).unwrap();
    let curve = xi0(&p, &kernel, &grid).unwrap();
    let anchored = m_t(&p, &psi, &curve).unwrap();
    let gap = (direct - anchored).abs() / direct;
    assert!(gap <= 1e-6, "direct {direct} vs anchored {anchored}: {gap:.3e}");
}

/// Variance along the frontier is exactly quadratic in the target: the
/// ratio Var / (c e^{-int r} - x0)^2 is one number for the whole curve.
#[test]
fn frontier_variance_is_exactly_quadratic_in_the_target() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let grid = Grid::new(1.0, 300).unwrap();
    for draw in 0..8 {
        let p = draw_params(&mut rng, (-0.9, 0.9));
        let kernel = match draw % 3 {
            0 => KernelSpec::constant(1.0).unwrap(),
            1 => KernelSpec::fractional(1.0, 0.7).unwrap(),
            _ => KernelSpec::exponential(1.0, 2.0).unwrap(),
        };
        let d1 = (-p.rate_integral(0.0, 1.0)).exp();
        let targets = [1.1, 1.3, 1.6, 2.2];
        let curve = efficient_frontier(&p, &kernel, &grid, &targets, SolverOptions::default())
            .unwrap();
        let ratios: Vec<f64> = targets
            .iter()
            .zip(curve.variances())
            .map(|(&c, &v)| {
                let surplus = c * d1 - p.x0;
                v / (surplus * surplus)
            })
            .collect();
        for r in &ratios[1..] {
            let spread = (r - ratios[0]).abs() / ratios[0];
            assert!(spread <= 1e-12, "draw {draw}: ratio spread {spread:.3e}");
        }
    }
}

/// The frontier must also be symmetric under replacing the target list by
/// any permutation: values depend on the target alone.
#[test]
fn frontier_values_do_not_depend_on_target_order() {
    let p = market();
    let grid = Grid::new(1.0, 200).unwrap();
    let kernel = KernelSpec::fractional(1.0, 0.6).unwrap();
    let forward = efficient_frontier(&p, &kernel, &grid, &[1.2, 1.5, 1.9], SolverOptions::default())
        .unwrap();
    let reversed = efficient_frontier(&p, &kernel, &grid, &[1.9, 1.5, 1.2], SolverOptions::default())
        .unwrap();
    assert_eq!(forward.variances()[0], reversed.variances()[2]);
    assert_eq!(forward.variances()[2], reversed.variances()[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Node lookup inverts node placement on arbitrary grids.
    #[test]
    fn grid_node_lookup_round_trips(t_max in 0.1..20.0f64, n in 1usize..2000) {
        let grid = Grid::new(t_max, n).unwrap();
        for i in (0..=n).step_by(1 + n / 17) {
            prop_assert_eq!(grid.index_of(grid.node(i)).unwrap(), i);
        }
    }

    /// CSV serialization is lossless for every finite double, including
    /// subnormals and negative zero.
    #[test]
    fn table_csv_round_trip_is_bit_exact(bits in prop::collection::vec(any::<u64>(), 1..40)) {
        let values: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).collect();
        let mut table = ResultTable::new("probe", &["x"]);
        for &v in &values {
            table.push_row(vec![v]);
        }
        let parsed = ResultTable::parse_csv(&table.to_csv()).unwrap();
        prop_assert_eq!(parsed.rows().len(), values.len());
        for (row, &want) in parsed.rows().iter().zip(&values) {
            // NaN payloads are not preserved, only the NaN-ness
            if want.is_nan() {
                prop_assert!(row[0].is_nan());
            } else {
                prop_assert_eq!(row[0].to_bits(), want.to_bits());
            }
        }
    }

    /// Bootstrap bands bracket the pathwise mean curve at every node and
    /// any confidence level.
    #[test]
    fn bootstrap_bands_bracket_the_mean(
        seed: u64,
        n_paths in 2usize..40,
        n_nodes in 1usize..12,
        level in 0.5..0.999f64,
    ) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let matrix: Vec<Vec<f64>> = (0..n_paths)
            .map(|_| (0..n_nodes).map(|_| rand::Rng::random_range(&mut rng, -3.0..5.0)).collect())
            .collect();
        let times: Vec<f64> = (0..n_nodes).map(|i| i as f64).collect();
        let summary = bootstrap_bands(&matrix, &times, 200, level, seed ^ 1).unwrap();
        for i in 0..n_nodes {
            prop_assert!(summary.lower()[i] <= summary.mean()[i] + 1e-12);
            prop_assert!(summary.mean()[i] <= summary.upper()[i] + 1e-12);
        }
    }
}
