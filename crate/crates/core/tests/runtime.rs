mod common;

use imdp_synth::benchmarks;
use imdp_synth::pipeline::{synthesize, Synthesis};
use imdp_synth::runtime::qp::kkt_residual;
use imdp_synth::runtime::{wilson_interval, ClosedLoop, McEstimate, TrueDynamics};
use nalgebra::DVector;
use rand::Rng;

fn small_drone() -> Synthesis {
    let mut cfg = benchmarks::drone_config();
    cfg.samples = 2_000;
    synthesize(&cfg).unwrap()
}

fn closed_loop(s: &Synthesis) -> ClosedLoop<'_> {
    ClosedLoop {
        model: &s.model,
        partition: &s.partition,
        policy: &s.policy,
        controller: &s.controller,
        objective: imdp_synth::imdp::Objective::ReachAvoid,
    }
}

#[test]
fn every_policy_step_has_an_optimal_feasible_input() {
    let syn = small_drone();
    let mut rng = common::rng(51);
    let mut solves = 0;
    for s in 1..=syn.partition.len() {
        for k in 0..syn.policy.horizon() {
            let Some(action) = syn.policy.action(s, k) else { continue };
            let region = syn.partition.region_of_state(s);
            for _ in 0..3 {
                let x = common::point_in(&mut rng, region);
                let sol = syn.controller.solve(&x, action).unwrap();
                let res = kkt_residual(&sol.hessian, &sol.linear, &sol.constraints, &sol.rhs, &sol.solution);
                assert!(res < 1e-8, "KKT residual {res} at state {s}, action {action}");
                assert!(syn.controller.target_violation(&x, &sol.solution.u, action) <= 1e-9);
                solves += 1;
            }
        }
    }
    assert!(solves > 100);
}

#[test]
fn simulation_checks_the_feasibility_chain() {
    let syn = small_drone();
    let cl = closed_loop(&syn);
    let mut rng = common::rng(52);
    let robust = benchmarks::drone_config().build_model().unwrap();
    for _ in 0..200 {
        let m = rng.random_range(0.75..1.25);
        let dynamics = TrueDynamics::at(&robust, &benchmarks::drone_alpha(m)).unwrap();
        let x0 = common::point_in(&mut rng, syn.partition.domain());
        let mut noise = syn.model.noise().source(rng.random(), 0).unwrap();
        let trace = cl.simulate(&dynamics, &x0, &mut noise, &cl.centered_disturbance()).unwrap();
        assert_eq!(trace.states.len(), trace.inputs.len() + 1);
    }
}

#[test]
fn monte_carlo_spread_is_binomial() {
    let syn = small_drone();
    let cl = closed_loop(&syn);
    let dynamics = TrueDynamics::at(&syn.model, syn.model.alpha_hat()).unwrap();
    // A start state with a success probability away from 0 and 1.
    let bounds = syn.region_bounds();
    let i = (0..bounds.len())
        .find(|&i| bounds[i] > 0.0 && syn.partition.regions()[i].center()[0] < 0.0)
        .expect("a state with positive bound");
    let x0 = DVector::from_vec(syn.partition.regions()[i].center());
    let pilot = cl.monte_carlo(&dynamics, &x0, 4_000, 999).unwrap();
    let p = pilot.estimate;
    let trials = 200;
    let reps = 60;
    let estimates: Vec<f64> = (0..reps)
        .map(|r| cl.monte_carlo(&dynamics, &x0, trials, 1_000 + r).unwrap().estimate)
        .collect();
    if p <= 0.02 || p >= 0.98 {
        // Degenerate proportions have no spread to compare.
        assert!(estimates.iter().all(|e| (e - p).abs() < 0.1));
        return;
    }
    let var = p * (1.0 - p) / trials as f64;
    let chi2: f64 = estimates.iter().map(|e| (e - p).powi(2) / var).sum();
    // 60 degrees of freedom; 99.9% quantiles are about 29.6 and 99.6.
    assert!((25.0..110.0).contains(&chi2), "chi-square {chi2} with p = {p}");
}

#[test]
fn wilson_interval_matches_closed_form() {
    let (lo, hi) = wilson_interval(30, 100, 2.0);
    let (n, p, z) = (100.0, 0.3, 2.0f64);
    let center = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
    let half = z / (1.0 + z * z / n) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    assert!((lo - (center - half)).abs() < 1e-12 && (hi - (center + half)).abs() < 1e-12);
    let e = McEstimate::new(0, 50);
    assert_eq!(e.lower, 0.0);
    assert!(e.upper > 0.0);
}
