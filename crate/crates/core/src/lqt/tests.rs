use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn min_jerk(from: &[f64], to: &[f64], samples: usize) -> Vec<Vec<f64>> {
    (0..samples)
        .map(|k| {
            let s = k as f64 / (samples - 1) as f64;
            let blend = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
            from.iter().zip(to).map(|(a, b)| a + blend * (b - a)).collect()
        })
        .collect()
}

struct Instance {
    model: IntegratorModel,
    basis: BasisFamily,
    weights: WeightSchedule,
    reference: ReferenceTrajectory,
}

fn random_instance(rng: &mut ChaCha8Rng, dim: usize, horizon: usize, count: usize) -> Instance {
    let dt = 0.01;
    let positions: Vec<Vec<f64>> = {
        let coeffs: Vec<[f64; 3]> = (0..dim).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        (0..=horizon)
            .map(|t| {
                let s = t as f64 / horizon as f64;
                coeffs.iter().map(|c| c[0] * s + c[1] * (3.0 * s).sin() * 0.1 + c[2] * s * s).collect()
            })
            .collect()
    };
    let goal = positions[horizon].clone();
    let reference = ReferenceTrajectory::from_positions(&positions, dt, &goal).unwrap();
    let model = IntegratorModel::new(dim, dt).unwrap();
    let basis = BasisFamily::new(count, dim, horizon).unwrap();
    let weights = WeightSchedule::build(&reference, 1.0, 1e4, 1e-5, &[]).unwrap();
    Instance { model, basis, weights, reference }
}

fn solved(inst: &Instance) -> ControlPrimitiveController {
    ControlPrimitiveController::solve(&inst.model, &inst.basis, &inst.weights)
        .unwrap()
        .derive_gains(&inst.model, &inst.basis)
        .unwrap()
}

/// Cost of the open-loop command family `u = −Ψ w`, evaluated by forward
/// simulation only.
fn simulated_cost(inst: &Instance, x0: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let u = -(inst.basis.matrix() * w);
    let d = inst.model.dim();
    let mut states = vec![x0.clone()];
    let mut commands = Vec::new();
    for t in 0..inst.weights.horizon() {
        let ut = u.rows(t * d, d).into_owned();
        states.push(inst.model.step(t, &states[t], &ut));
        commands.push(ut);
    }
    inst.weights.cost(&states, &commands)
}

/// Dense least-squares oracle: stacks weighted residuals of the
/// non-augmented problem and solves by SVD.
fn dense_oracle(inst: &Instance, x0: &DVector<f64>, design: &DMatrix<f64>) -> DVector<f64> {
    let horizon = inst.weights.horizon();
    let n = inst.model.state_dim();
    let d = inst.model.dim();
    let batch = inst.model.batch(horizon);
    let cols = design.ncols();
    let rows = (horizon + 1) * n + horizon * d;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    let free = &batch.sx * x0;
    let su_design = &batch.su * design;
    for t in 0..=horizon {
        let q = inst.weights.q(t);
        for i in 0..n {
            let s = q[(i, i)].sqrt();
            if s == 0.0 {
                continue;
            }
            let row = t * n + i;
            for c in 0..cols {
                a[(row, c)] = s * su_design[(row, c)];
            }
            b[row] = s * (inst.weights.target(t)[i] - free[row]);
        }
    }
    for t in 0..horizon {
        let r = inst.weights.r(t);
        for i in 0..d {
            let s = r[(i, i)].sqrt();
            let row = (horizon + 1) * n + t * d + i;
            for c in 0..cols {
                a[(row, c)] = s * design[(t * d + i, c)];
            }
        }
    }
    a.svd(true, true).solve(&b, 1e-14).unwrap()
}

#[test]
fn rest_equilibrium_needs_no_command() {
    let p = vec![0.4, -0.1];
    let reference = ReferenceTrajectory::from_positions(&vec![p.clone(); 101], 0.01, &p).unwrap();
    let gen = MotionGenerator::new(2, 0.01, 100, WeightConfig::default()).unwrap();
    let out = gen.generate(&reference).unwrap();
    for u in &out.rollout.commands {
        assert!(u.norm() < 1e-8, "{:e}", u.norm());
    }
}

#[test]
fn weights_match_dense_least_squares_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inst = random_instance(&mut rng, 1, 20, 8);
    let ctrl = solved(&inst);
    let x0 = rest_state(inst.reference.start());
    let w_hat = ctrl.weights() * IntegratorModel::augment(&x0);
    let c_hat = simulated_cost(&inst, &x0, &w_hat);

    // optimum over the basis span, negated because u = −Ψw
    let w_oracle = dense_oracle(&inst, &x0, &(-inst.basis.matrix()));
    let c_oracle = simulated_cost(&inst, &x0, &w_oracle);
    assert!((c_hat - c_oracle).abs() <= 1e-9 * (1.0 + c_oracle), "{c_hat} vs {c_oracle}");

    // unconstrained optimum projected onto the basis can only be worse
    let identity = DMatrix::<f64>::identity(20, 20);
    let u_free = dense_oracle(&inst, &x0, &(-identity));
    let w_proj = inst.basis.matrix().clone().svd(true, true).solve(&u_free, 1e-14).unwrap();
    let c_proj = simulated_cost(&inst, &x0, &w_proj);
    assert!(c_hat <= c_proj + 1e-9 * (1.0 + c_proj), "{c_hat} > {c_proj}");
}

#[test]
fn cost_is_locally_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = random_instance(&mut rng, 2, 40, 8);
    let ctrl = solved(&inst);
    let x0 = rest_state(inst.reference.start());
    let w_hat = ctrl.weights() * IntegratorModel::augment(&x0);
    let base = simulated_cost(&inst, &x0, &w_hat);
    for _ in 0..100 {
        let delta = DVector::from_fn(w_hat.len(), |_, _| rng.random_range(-1.0..1.0));
        let probe = simulated_cost(&inst, &x0, &(&w_hat + delta * 1e-4));
        assert!(base <= probe + 1e-12 * (1.0 + base), "{base} > {probe}");
    }
}

#[test]
fn recursive_gains_reproduce_batch_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let inst = random_instance(&mut rng, 2, 50, 10);
        let ctrl = solved(&inst);
        let x0 = rest_state(inst.reference.start());
        let rollout = ctrl.rollout(&inst.model, &x0, None).unwrap();
        let batch = ctrl.batch_states(&inst.model, &inst.basis, &x0);
        for (a, b) in rollout.states.iter().zip(&batch) {
            assert!((a - b).amax() < 1e-6);
        }
        // K̃0 = Ψ0 Ŵ
        let k0 = inst.basis.step(0) * ctrl.weights();
        assert!((&ctrl.gains()[0] - k0).amax() == 0.0);
        assert_eq!(ctrl.propagator(0), &DMatrix::identity(7, 7));
    }
}

#[test]
fn augmented_precision_sandwich_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inst = random_instance(&mut rng, 2, 10, 4);
    for t in [1, 5, 10] {
        let qt = inst.weights.augmented_q(t);
        let mu = inst.weights.target(t);
        let q = inst.weights.q(t);
        let mut constant = None;
        for _ in 0..100 {
            let x = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
            let xa = IntegratorModel::augment(&x);
            let lhs = (xa.transpose() * &qt * &xa)[(0, 0)];
            let e = &x - mu;
            let rhs = (e.transpose() * q * &e)[(0, 0)];
            let c = lhs - rhs;
            match constant {
                None => constant = Some(c),
                Some(c0) => assert!((c - c0).abs() < 1e-9),
            }
        }
    }
}

#[test]
fn closed_loop_rejects_perturbations() {
    let gen = MotionGenerator::new(2, 0.01, 100, WeightConfig::default()).unwrap();
    let demo = min_jerk(&[0.3, -0.2], &[0.55, 0.15], 101);
    let reference = ReferenceTrajectory::from_positions(&demo, 0.01, &[0.55, 0.15]).unwrap();
    let out = gen.generate(&reference).unwrap();
    let goal = DVector::from_vec(reference.goal.clone());
    let end = |r: &Rollout| (r.states[100].rows(0, 2) - &goal).norm();
    assert!(end(&out.rollout) < 1e-3);

    let mut kicks = BTreeMap::new();
    kicks.insert(33, DVector::from_vec(vec![0.05, -0.04, 0.0, 0.0, 0.0, 0.0]));
    let kicked = out.controller.rollout(gen.model(), &rest_state(reference.start()), Some(&kicks)).unwrap();
    assert!(end(&kicked) < 1e-2, "{}", end(&kicked));

    let shifted = rest_state(&[0.4, -0.2]);
    let moved = out.controller.rollout(gen.model(), &shifted, None).unwrap();
    assert!(end(&moved) < 1e-2, "{}", end(&moved));
}

#[test]
fn rollout_is_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inst = random_instance(&mut rng, 2, 30, 6);
    let ctrl = solved(&inst);
    let x0 = rest_state(inst.reference.start());
    let a = ctrl.rollout(&inst.model, &x0, None).unwrap();
    let b = ctrl.rollout(&inst.model, &x0, None).unwrap();
    let c = ctrl.rollout(&inst.model, &x0, Some(&BTreeMap::new())).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn rank_deficient_basis_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let inst = random_instance(&mut rng, 1, 10, 4);
    let wide = BasisFamily::new(40, 1, 10).unwrap();
    let err = ControlPrimitiveController::solve(&inst.model, &wide, &inst.weights).unwrap_err();
    assert!(matches!(err, LqtError::IllConditioned { .. }), "{err}");
}

#[test]
fn rollout_without_gains_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inst = random_instance(&mut rng, 1, 10, 4);
    let ctrl = ControlPrimitiveController::solve(&inst.model, &inst.basis, &inst.weights).unwrap();
    assert_eq!(ctrl.rollout(&inst.model, &rest_state(&[0.0]), None).unwrap_err(), LqtError::MissingGains);
}

#[test]
fn controller_record_round_trip_preserves_feedback() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let inst = random_instance(&mut rng, 2, 20, 5);
    let ctrl = solved(&inst);
    let record = ctrl.to_record();
    let json = serde_json::to_string(&record).unwrap();
    assert!(json.contains("\"K\":5") && json.contains("\"W\":"));
    let back: ControllerRecord = serde_json::from_str(&json).unwrap();
    let rebuilt = back.into_controller().unwrap();
    let x0 = rest_state(inst.reference.start());
    assert_eq!(ctrl.rollout(&inst.model, &x0, None).unwrap(), rebuilt.rollout(&inst.model, &x0, None).unwrap());
}

#[test]
fn normal_matrix_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let inst = random_instance(&mut rng, 2, 20, 6);
    let (m, _) = normal_equations(&inst.model, &inst.basis, &inst.weights);
    assert!((&m - m.transpose()).amax() < 1e-9 * m.amax());
}

#[test]
fn default_weights_pass_displaced_via_points_and_goal() {
    let demo = min_jerk(&[0.3, -0.2], &[0.5, 0.0], 101);
    let reference = ReferenceTrajectory::from_positions(&demo, 0.01, &[0.5, 0.0]).unwrap();
    let cfg = WeightConfig::default();
    let gen = MotionGenerator::new(2, 0.01, 100, cfg).unwrap();
    let via = vec![
        ViaPoint { step: 40, position: vec![demo[40][0] + 0.1, demo[40][1] - 0.1], precision: cfg.via_precision },
        ViaPoint { step: 70, position: vec![demo[70][0] - 0.1, demo[70][1] + 0.1], precision: cfg.via_precision },
    ];
    let out = gen.generate(&reference.with_via(via.clone())).unwrap();
    for v in &via {
        let p = out.rollout.states[v.step].rows(0, 2);
        assert!((p - DVector::from_vec(v.position.clone())).norm() < 1e-3);
    }
    let shifted = out.controller.rollout(gen.model(), &rest_state(&[-0.1, -0.6]), None).unwrap();
    assert!((shifted.states[100].rows(0, 2) - DVector::from_vec(vec![0.5, 0.0])).norm() < 1e-3);
}
