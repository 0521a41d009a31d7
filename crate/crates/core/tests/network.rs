mod common;

use common::{rng, toy_network};
use lfc_laa::io::Dataset;
use lfc_laa::network::{
    attack_matrix, build_descriptor, kron_reduce, nearest_generators, simulate_network, Branch, NetworkModel,
};
use lfc_laa::numerics::zoh_discretize;
use lfc_laa::sim::attack::LoadSchedule;
use lfc_laa::sim::RunStatus;
use lfc_laa::Matrix;
use nalgebra::DVector;
use rand::Rng;

const TOY_BRANCHES: [(usize, usize, f64); 4] = [(1, 3, 0.5), (3, 4, 0.25), (4, 2, 0.4), (2, 1, 1.0)];

/// Bus-level DC power balance written straight from the branch list:
/// loads satisfy `sum_j (theta_l - x_j) / X = -P_L`, generators obey
/// `M w' = -K_I d - (K_P + D_G) w - sum_j (d_g - x_j) / X`.
fn swing_oracle(net: &NetworkModel, delta: &[f64], omega: &[f64], p_l: &[f64]) -> Vec<f64> {
    let (ng, nl) = (net.n_gen(), net.n_load());
    let gen_pos = |bus: usize| net.gen_buses.iter().position(|&b| b == bus);
    let load_pos = |bus: usize| net.load_buses.iter().position(|&b| b == bus);
    // Solve the load-bus balance L theta = r.
    let mut l = Matrix::zeros(nl, nl);
    let mut r = DVector::from_iterator(nl, p_l.iter().map(|p| -p));
    for &(a, b, x) in &TOY_BRANCHES {
        let y = 1.0 / x;
        for (from, to) in [(a, b), (b, a)] {
            if let Some(i) = load_pos(from) {
                l[(i, i)] += y;
                match (load_pos(to), gen_pos(to)) {
                    (Some(j), _) => l[(i, j)] -= y,
                    (None, Some(g)) => r[i] += y * delta[g],
                    _ => unreachable!(),
                }
            }
        }
    }
    let theta = l.lu().solve(&r).unwrap();
    let mut rates = vec![0.0; 2 * ng];
    for g in 0..ng {
        rates[g] = omega[g];
        let mut flow = 0.0;
        for &(a, b, x) in &TOY_BRANCHES {
            for (from, to) in [(a, b), (b, a)] {
                if gen_pos(from) == Some(g) {
                    let other = match (gen_pos(to), load_pos(to)) {
                        (Some(h), _) => delta[h],
                        (None, Some(j)) => theta[j],
                        _ => unreachable!(),
                    };
                    flow += (delta[g] - other) / x;
                }
            }
        }
        rates[ng + g] = (-net.k_i[g] * delta[g] - (net.k_p[g] + net.d_g[g]) * omega[g] - flow) / net.m[g];
    }
    rates
}

#[test]
fn reduced_model_matches_bus_level_power_balance() {
    let net = toy_network();
    let reduced = kron_reduce(&net).unwrap();
    let mut r = rng(41);
    for _ in 0..20 {
        let delta: Vec<f64> = (0..2).map(|_| r.gen_range(-0.3..0.3)).collect();
        let omega: Vec<f64> = (0..2).map(|_| r.gen_range(-0.1..0.1)).collect();
        let p_l: Vec<f64> = (0..2).map(|_| r.gen_range(0.0..1.0)).collect();
        let x = DVector::from_iterator(4, delta.iter().chain(&omega).copied());
        let got = &reduced.a * &x + &reduced.b * DVector::from_column_slice(&p_l);
        let want = swing_oracle(&net, &delta, &omega, &p_l);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }
}

#[test]
fn attacked_model_matches_power_balance_with_frequency_dependent_load() {
    let mut net = toy_network();
    net.k_lg = vec![0.7, 1.3];
    // Load 3 sits 0.5 from generator 1 and 0.65 from generator 2; load 4
    // sits 0.4 from generator 2.
    assert_eq!(net.sensing, vec![0, 1]);
    let reduced = kron_reduce(&net).unwrap();
    let a_star = attack_matrix(&reduced.a, &reduced.b, &net.attack_gain_matrix()).unwrap();
    let mut r = rng(43);
    for _ in 0..20 {
        let delta: Vec<f64> = (0..2).map(|_| r.gen_range(-0.3..0.3)).collect();
        let omega: Vec<f64> = (0..2).map(|_| r.gen_range(-0.1..0.1)).collect();
        let p_ls: Vec<f64> = (0..2).map(|_| r.gen_range(0.0..1.0)).collect();
        let p_l: Vec<f64> = (0..2).map(|k| p_ls[k] - net.k_lg[k] * omega[net.sensing[k]]).collect();
        let x = DVector::from_iterator(4, delta.iter().chain(&omega).copied());
        let got = &a_star * &x + &reduced.b * DVector::from_column_slice(&p_ls);
        let want = swing_oracle(&net, &delta, &omega, &p_l);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }
}

#[test]
fn descriptor_and_reduction_agree() {
    let net = toy_network();
    let d = build_descriptor(&net).unwrap();
    let reduced = kron_reduce(&net).unwrap();
    // Eliminate theta from the algebraic rows of the descriptor directly.
    let (ng, nl) = (2, 2);
    let p_l = DVector::from_vec(vec![0.3, -0.2]);
    let delta = DVector::from_vec(vec![0.1, -0.05]);
    let omega = DVector::from_vec(vec![0.02, 0.01]);
    let a_tt = d.a.view((ng, ng), (nl, nl)).into_owned();
    let a_td = d.a.view((ng, 0), (nl, ng)).into_owned();
    let theta = a_tt.lu().solve(&-(a_td * &delta + &p_l)).unwrap();
    let mut x = DVector::zeros(2 * ng + nl);
    x.rows_mut(0, ng).copy_from(&delta);
    x.rows_mut(ng, nl).copy_from(&theta);
    x.rows_mut(ng + nl, ng).copy_from(&omega);
    let rhs = &d.a * &x + &d.b * &p_l;
    // E = diag(I, 0, -M).
    let omega_dot: Vec<f64> = (0..ng).map(|g| -rhs[ng + nl + g] / net.m[g]).collect();
    let reduced_rate = &reduced.a * DVector::from_iterator(4, delta.iter().chain(omega.iter()).copied()) + &reduced.b * &p_l;
    for g in 0..ng {
        assert!((reduced_rate[g] - omega[g]).abs() < 1e-15);
        assert!((reduced_rate[ng + g] - omega_dot[g]).abs() < 1e-12);
    }
}

#[test]
fn doubling_attack_gains_shifts_lower_right_block_exactly() {
    for net in [toy_network(), Dataset::builtin("ieee39-3area").unwrap().network_model().unwrap()] {
        let reduced = kron_reduce(&net).unwrap();
        let ng = net.n_gen();
        let gains: Vec<f64> = (0..net.n_load()).map(|k| 0.5 + 0.25 * (k % 3) as f64).collect();
        let k1 = net.gain_matrix_for(&gains);
        let k2 = &k1 * 2.0;
        let a1 = attack_matrix(&reduced.a, &reduced.b, &k1).unwrap();
        let a2 = attack_matrix(&reduced.a, &reduced.b, &k2).unwrap();
        let m_inv = Matrix::from_diagonal(&DVector::from_iterator(ng, net.m.iter().map(|m| 1.0 / m)));
        let expected = &m_inv * &net.h_gl * &reduced.h_inv * (&k2 - &k1);
        let diff = (&a2 - &a1).view((ng, ng), (ng, ng)).into_owned();
        let scale = expected.amax().max(1.0);
        assert!((&diff - &expected).amax() < 1e-12 * scale);
        // The other three blocks do not move.
        assert_eq!(a1.view((0, 0), (ng, 2 * ng)), a2.view((0, 0), (ng, 2 * ng)));
        assert_eq!(a1.view((ng, 0), (ng, ng)), a2.view((ng, 0), (ng, ng)));
    }
}

#[test]
fn rk4_network_trace_matches_exact_zoh_propagation() {
    let mut net = toy_network();
    net.k_lg = vec![0.2, 0.1];
    let reduced = kron_reduce(&net).unwrap();
    let a_star = attack_matrix(&reduced.a, &reduced.b, &net.attack_gain_matrix()).unwrap();
    let dt = 0.001;
    let step_time = 1.0;
    let eps = vec![
        LoadSchedule::new(vec![(step_time, 0.05)]).unwrap(),
        LoadSchedule::new(vec![]).unwrap(),
    ];
    let x0 = [0.01, -0.02, 0.0, 0.0];
    let trace = simulate_network(&a_star, &reduced.b, &net.p_ls, &eps, &x0, dt, 2.0).unwrap();
    assert_eq!(trace.status, RunStatus::Completed);

    let propagate = |x: DVector<f64>, load: &[f64], steps: usize| {
        let forcing = &reduced.b * DVector::from_column_slice(load);
        let (ad, bd) = zoh_discretize(&a_star, &Matrix::from_column_slice(4, 1, forcing.as_slice()), dt).unwrap();
        (0..steps).fold(x, |x, _| &ad * x + bd.column(0))
    };
    let k_step = (step_time / dt).round() as usize;
    let x1 = propagate(DVector::from_column_slice(&x0), &net.p_ls, k_step);
    let loaded = [net.p_ls[0] + 0.05, net.p_ls[1]];
    let x2 = propagate(x1.clone(), &loaded, trace.time.len() - 1 - k_step);
    for (k, x) in [(k_step, &x1), (trace.time.len() - 1, &x2)] {
        for g in 0..2 {
            assert!((trace.delta[g][k] - x[g]).abs() < 1e-9, "delta {g} at {k}");
            assert!((trace.omega[g][k] - x[2 + g]).abs() < 1e-9, "omega {g} at {k}");
        }
    }
}

#[test]
fn network_divergence_records_the_blown_sample() {
    let mut net = toy_network();
    net.k_lg = vec![50.0, 50.0];
    let reduced = kron_reduce(&net).unwrap();
    let a_star = net.attacked_matrix().unwrap();
    let s = lfc_laa::numerics::eigenvalues(&a_star).unwrap();
    assert!(s.max_real() > 0.0, "gain should destabilize the toy net");
    let trace = simulate_network(&a_star, &reduced.b, &net.p_ls, &[], &[0.0; 4], 0.01, 500.0).unwrap();
    let RunStatus::Diverged { time } = trace.status else {
        panic!("expected divergence");
    };
    assert_eq!(*trace.time.last().unwrap(), time);
    let last = trace.time.len() - 1;
    assert!((0..2).any(|g| trace.delta[g][last].abs() > 1e6 || trace.omega[g][last].abs() > 1e6));
}

#[test]
fn sensing_map_follows_electrical_distance() {
    let branches: Vec<Branch> = TOY_BRANCHES
        .iter()
        .map(|&(from, to, reactance)| Branch { from, to, reactance })
        .collect();
    assert_eq!(nearest_generators(&[1, 2], &[3, 4], &branches).unwrap(), vec![1, 2]);
    // Shorten the path from load 3 to generator 2 below 0.5.
    let mut shorter = branches.clone();
    shorter[1].reactance = 0.05;
    shorter[2].reactance = 0.1;
    assert_eq!(nearest_generators(&[1, 2], &[3, 4], &shorter).unwrap(), vec![2, 2]);
}

#[test]
fn shipped_network_blocks_are_consistent() {
    let net = Dataset::builtin("ieee39-3area").unwrap().network_model().unwrap();
    assert_eq!((net.n_gen(), net.n_load()), (10, 29));
    assert_eq!(net.h_lg, net.h_gl.transpose());
    assert_eq!(net.h_gg, net.h_gg.transpose());
    assert_eq!(net.h_ll, net.h_ll.transpose());
    for i in 0..10 {
        assert_eq!(net.h_gg[(i, i)], 0.0);
    }
    let k_i_on: Vec<usize> = (0..10).filter(|&g| net.k_i[g] > 0.0).collect();
    assert_eq!(k_i_on, vec![2, 5, 9], "secondary control at generators 3, 6 and 10");
}
