mod common;

use common::*;
use constrained_nod::dynamics::{full_rhs, reduced_rhs};
use constrained_nod::effective_bias;
use nalgebra::DMatrix;

#[test]
fn projected_states_stay_on_constraints() {
    for i in 0..20 {
        let f = random_fixture(i);
        let drift = invariance_drift(&f);
        assert!(drift <= 1e-8, "{}: drift {drift:e}", f.label);
    }
}

#[test]
fn random_suite_covers_higher_ranks() {
    let ranks: Vec<usize> = (0..20).map(|i| random_fixture(i).constraints.max_rank()).collect();
    assert!(ranks.contains(&1) && ranks.contains(&2) && ranks.contains(&3), "{ranks:?}");
}

#[test]
fn reduced_model_tracks_full_model() {
    for i in (0..20).step_by(2) {
        let f = random_fixture(i);
        let gap = equivalence_gap(&f);
        assert!(gap <= 1e-6, "{}: gap {gap:e}", f.label);
    }
}

#[test]
fn effective_bias_of_the_simulation_examples() {
    let hom = complete6_fixture(&[1.0, 1.0, 1.0], 0.14);
    let het = complete6_fixture(&[1.0, 1.0, 3.0], 0.14);
    let b_hom = effective_bias(&hom.constraints, &hom.bias).unwrap().b_e;
    let b_het = effective_bias(&het.constraints, &het.bias).unwrap().b_e;
    assert!((b_hom[1] - 0.5773502691896258).abs() < 1e-12);
    assert!((b_het[1] + 0.30151134457776363).abs() < 1e-12);

    let mut b = DMatrix::zeros(6, 3);
    b.row_mut(0).copy_from_slice(&[0.3, 0.3, 0.3]);
    b.row_mut(3).copy_from_slice(&[-0.24, -0.24, -0.24]);
    let b_e = effective_bias(&hom.constraints, &b).unwrap().b_e;
    assert!((b_e[0] - 0.5196152422706632).abs() < 1e-12);
    assert!((b_e[3] + 0.41569219381653055).abs() < 1e-12);
}

#[test]
fn constraint_on_the_biased_agent_flips_the_group_decision() {
    let hom = steady_effective(&complete6_fixture(&[1.0, 1.0, 1.0], 0.14));
    let het = steady_effective(&complete6_fixture(&[1.0, 1.0, 3.0], 0.14));
    assert!(hom.iter().all(|&y| y > 1e-6), "{hom}");
    assert!(het.iter().all(|&y| y < -1e-6), "{het}");
}

#[test]
fn unbiased_fields_are_odd() {
    for i in 0..6 {
        let mut f = random_fixture(i);
        f.bias.fill(0.0);
        let z = f.constraints.project_state(&DMatrix::from_fn(f.graph.n(), f.constraints.n_options(), |r, c| {
            ((r * 7 + c * 3) as f64).sin()
        }));
        let plus = full_rhs(&z, &f.graph, &f.constraints, &f.params, &f.bias).unwrap();
        let minus = full_rhs(&-&z, &f.graph, &f.constraints, &f.params, &f.bias).unwrap();
        assert!((plus + minus).amax() < 1e-14, "{}", f.label);
        if f.constraints.is_rank_one() {
            let y = z.column(0).into_owned();
            let b_e = nalgebra::DVector::zeros(f.graph.n());
            let plus = reduced_rhs(&y, &f.graph, &f.constraints, &f.params, &b_e).unwrap();
            let minus = reduced_rhs(&-&y, &f.graph, &f.constraints, &f.params, &b_e).unwrap();
            assert!((plus + minus).amax() < 1e-14);
        }
    }
}
