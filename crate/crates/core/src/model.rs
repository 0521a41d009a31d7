//! Continuous-time state-space model of one LFC area.
//!
//! State ordering is fixed for the whole crate:
//! `[df, dP_tie, dP_m(1..n), dP_g(1..n)]` where `n` is the number of
//! generators in the area. Inputs are `w = [dP_L, v]` (load change and the
//! coupling term from neighbouring areas) and `u = dP_C` (LFC command).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Tolerance on the per-area participation factor sum.
pub const PARTICIPATION_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Turbine time constant T_t, seconds.
    pub turbine_time_constant: f64,
    /// Governor time constant T_g, seconds.
    pub governor_time_constant: f64,
    /// Droop R, pu frequency per pu power.
    pub droop: f64,
    /// LFC participation factor alpha in [0, 1].
    pub participation: f64,
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("turbine time constant", self.turbine_time_constant),
            ("governor time constant", self.governor_time_constant),
            ("droop", self.droop),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.participation) {
            return Err(Error::InvalidParameter(format!(
                "participation factor must lie in [0, 1], got {}",
                self.participation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaParams {
    /// Load damping D, pu power per pu frequency.
    pub damping: f64,
    /// Equivalent inertia constant H, seconds.
    pub inertia: f64,
    pub generators: Vec<GeneratorParams>,
    /// Synchronizing coefficient T_ij to each neighbouring area, keyed by
    /// the neighbour's index.
    pub tie_coefficients: BTreeMap<usize, f64>,
}

impl AreaParams {
    pub fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(Error::InvalidParameter("area has no generators".into()));
        }
        if !(self.inertia > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inertia must be positive, got {}",
                self.inertia
            )));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must be non-negative, got {}",
                self.damping
            )));
        }
        for g in &self.generators {
            g.validate()?;
        }
        let total: f64 = self.generators.iter().map(|g| g.participation).sum();
        if (total - 1.0).abs() > PARTICIPATION_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "participation factors sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        2 + 2 * self.generators.len()
    }

    pub fn total_tie_coefficient(&self) -> f64 {
        self.tie_coefficients.values().sum()
    }
}

/// System-wide check that `T_ij` stored in area `i` equals `T_ji` in area `j`.
pub fn check_tie_symmetry(areas: &[AreaParams]) -> Result<()> {
    for (i, area) in areas.iter().enumerate() {
        for (&j, &t_ij) in &area.tie_coefficients {
            if j == i || j >= areas.len() {
                return Err(Error::InvalidParameter(format!(
                    "area {i} has a tie coefficient to invalid area {j}"
                )));
            }
            let t_ji = areas[j].tie_coefficients.get(&i).copied();
            if t_ji != Some(t_ij) {
                return Err(Error::InvalidParameter(format!(
                    "tie coefficient asymmetry: T[{i}][{j}] = {t_ij}, T[{j}][{i}] = {t_ji:?}"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaMatrices {
    pub a: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    pub c: Matrix,
}

/// Frequency bias `beta = D + sum(1/R_k)`.
pub fn compute_beta(area: &AreaParams) -> Result<f64> {
    let mut inverse_droop = 0.0;
    for g in &area.generators {
        if !(g.droop > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "droop must be positive, got {}",
                g.droop
            )));
        }
        inverse_droop += 1.0 / g.droop;
    }
    Ok(area.damping + inverse_droop)
}

/// Synchronizing torque coefficient of a tie between two equivalent machines.
pub fn tie_coefficient(
    v_i: f64,
    v_j: f64,
    reactance: f64,
    angle_i: f64,
    angle_j: f64,
) -> Result<f64> {
    if reactance == 0.0 || !reactance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tie reactance must be non-zero, got {reactance}"
        )));
    }
    Ok(v_i.abs() * v_j.abs() / reactance * (angle_i - angle_j).cos())
}

/// Area control error `beta * df + dP_tie`.
pub fn ace(beta: f64, freq_dev: f64, tie_dev: f64) -> f64 {
    beta * freq_dev + tie_dev
}

pub fn build_area_matrices(area: &AreaParams) -> Result<AreaMatrices> {
    area.validate()?;
    let n = area.generators.len();
    let order = area.order();
    let two_h = 2.0 * area.inertia;
    let beta = compute_beta(area)?;

    let mut a = Matrix::zeros(order, order);
    let mut b1 = Matrix::zeros(order, 2);
    let mut b2 = Matrix::zeros(order, 1);
    let mut c = Matrix::zeros(1, order);

    a[(0, 0)] = -area.damping / two_h;
    a[(0, 1)] = -1.0 / two_h;
    a[(1, 0)] = 2.0 * PI * area.total_tie_coefficient();
    b1[(0, 0)] = -1.0 / two_h;
    b1[(1, 1)] = -2.0 * PI;

    for (k, g) in area.generators.iter().enumerate() {
        let m = 2 + k;
        let gov = 2 + n + k;
        a[(0, m)] = 1.0 / two_h;
        a[(m, m)] = -1.0 / g.turbine_time_constant;
        a[(m, gov)] = 1.0 / g.turbine_time_constant;
        a[(gov, 0)] = -1.0 / (g.governor_time_constant * g.droop);
        a[(gov, gov)] = -1.0 / g.governor_time_constant;
        b2[(gov, 0)] = g.participation / g.governor_time_constant;
    }

    c[(0, 0)] = beta;
    c[(0, 1)] = 1.0;

    Ok(AreaMatrices { a, b1, b2, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gen(tt: f64, tg: f64, r: f64, alpha: f64) -> GeneratorParams {
        GeneratorParams {
            turbine_time_constant: tt,
            governor_time_constant: tg,
            droop: r,
            participation: alpha,
        }
    }

    fn area(d: f64, h: f64, gens: Vec<GeneratorParams>) -> AreaParams {
        AreaParams {
            damping: d,
            inertia: h,
            generators: gens,
            tie_coefficients: BTreeMap::new(),
        }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(compute_beta(&area(1.0, 5.0, vec![gen(0.3, 0.1, 0.05, 1.0)])).unwrap(), 21.0);
        assert_eq!(compute_beta(&area(0.0, 5.0, vec![gen(0.3, 0.1, 1.0, 1.0)])).unwrap(), 1.0);
        let three = area(
            0.8,
            5.0,
            vec![gen(0.3, 0.1, 0.04, 0.5), gen(0.3, 0.1, 0.05, 0.5), gen(0.3, 0.1, 0.10, 0.0)],
        );
        assert!((compute_beta(&three).unwrap() - 55.8).abs() < 1e-12);
    }

    #[test]
    fn beta_rejects_bad_droop() {
        assert!(compute_beta(&area(1.0, 5.0, vec![gen(0.3, 0.1, 0.0, 1.0)])).is_err());
        assert!(compute_beta(&area(1.0, 5.0, vec![gen(0.3, 0.1, -0.1, 1.0)])).is_err());
    }

    #[test]
    fn tie_coefficient_examples() {
        assert_eq!(tie_coefficient(1.0, 1.0, 0.5, 0.3, 0.3).unwrap(), 2.0);
        assert!(tie_coefficient(1.0, 1.0, 0.5, PI / 2.0, 0.0).unwrap().abs() < 1e-15);
        // 1.02 * 1.01 / 0.025 * cos(5 deg), evaluated by hand: 41.208 * 0.9961947 = 41.0512
        let t = tie_coefficient(1.02, 1.01, 0.025, 5f64.to_radians(), 0.0).unwrap();
        assert!((t - 41.05119).abs() < 1e-4, "{t}");
        assert!(tie_coefficient(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ace_examples() {
        assert_eq!(ace(21.0, 0.0, 0.0), 0.0);
        assert!((ace(21.0, 0.01, 0.05) - 0.26).abs() < 1e-15);
        assert!(ace(55.8, -0.002, 0.1116).abs() < 1e-15);
    }

    #[test]
    fn matrix_dimensions_and_entries() {
        let a = area(1.0, 5.0, vec![gen(0.3, 0.2, 0.05, 0.6), gen(0.4, 0.1, 0.04, 0.4)]);
        let m = build_area_matrices(&a).unwrap();
        assert_eq!(m.a.shape(), (6, 6));
        assert_eq!(m.b1.shape(), (6, 2));
        assert_eq!(m.b2.shape(), (6, 1));
        assert_eq!(m.c.shape(), (1, 6));
        assert!((m.a[(0, 0)] + 0.1).abs() < 1e-15);
        assert!((m.a[(4, 0)] + 100.0).abs() < 1e-12);
        assert_eq!(m.c[(0, 0)], 1.0 + 20.0 + 25.0);
    }

    #[test]
    fn rejects_empty_and_bad_participation() {
        assert!(build_area_matrices(&area(1.0, 5.0, vec![])).is_err());
        let bad = area(1.0, 5.0, vec![gen(0.3, 0.2, 0.05, 0.5), gen(0.3, 0.2, 0.05, 0.4)]);
        assert!(build_area_matrices(&bad).is_err());
    }

    #[test]
    fn tie_symmetry() {
        let mut a0 = area(1.0, 5.0, vec![gen(0.3, 0.2, 0.05, 1.0)]);
        let mut a1 = a0.clone();
        a0.tie_coefficients.insert(1, 2.0);
        a1.tie_coefficients.insert(0, 2.0);
        assert!(check_tie_symmetry(&[a0.clone(), a1.clone()]).is_ok());
        a1.tie_coefficients.insert(0, 2.5);
        assert!(check_tie_symmetry(&[a0, a1]).is_err());
    }

    fn arb_area() -> impl Strategy<Value = AreaParams> {
        (
            0.0f64..3.0,
            0.5f64..20.0,
            prop::collection::vec((0.05f64..1.0, 0.05f64..1.0, 0.01f64..0.5, 0.0f64..1.0), 1..5),
            prop::collection::btree_map(1usize..6, 0.0f64..10.0, 0..3),
        )
            .prop_map(|(d, h, gens, ties)| {
                let weight: f64 = gens.iter().map(|g| g.3).sum::<f64>().max(1e-6);
                let n = gens.len();
                let mut generators: Vec<GeneratorParams> = gens
                    .into_iter()
                    .map(|(tt, tg, r, w)| gen(tt, tg, r, w / weight))
                    .collect();
                if weight <= 1e-6 {
                    for g in &mut generators {
                        g.participation = 1.0 / n as f64;
                    }
                }
                // Renormalise so the sum is 1 to rounding.
                let s: f64 = generators.iter().map(|g| g.participation).sum();
                for g in &mut generators {
                    g.participation = (g.participation / s).min(1.0);
                }
                AreaParams {
                    damping: d,
                    inertia: h,
                    generators,
                    tie_coefficients: ties,
                }
            })
    }

    proptest! {
        #[test]
        fn block_structure_matches_closed_form(area in arb_area()) {
            let m = build_area_matrices(&area).unwrap();
            let n = area.generators.len();
            let h2 = 2.0 * area.inertia;
            let tsum: f64 = area.tie_coefficients.values().sum();
            let beta = area.damping + area.generators.iter().map(|g| 1.0 / g.droop).sum::<f64>();
            for i in 0..2 + 2 * n {
                for j in 0..2 + 2 * n {
                    let expected = match (i, j) {
                        (0, 0) => -area.damping / h2,
                        (0, 1) => -1.0 / h2,
                        (0, j) if j < 2 + n => 1.0 / h2,
                        (1, 0) => 2.0 * PI * tsum,
                        (i, j) if i >= 2 && i < 2 + n && j == i => -1.0 / area.generators[i - 2].turbine_time_constant,
                        (i, j) if i >= 2 && i < 2 + n && j == i + n => 1.0 / area.generators[i - 2].turbine_time_constant,
                        (i, 0) if i >= 2 + n => {
                            let g = &area.generators[i - 2 - n];
                            -1.0 / (g.governor_time_constant * g.droop)
                        }
                        (i, j) if i >= 2 + n && j == i => -1.0 / area.generators[i - 2 - n].governor_time_constant,
                        _ => 0.0,
                    };
                    prop_assert!((m.a[(i, j)] - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                        "A[{}][{}] = {} expected {}", i, j, m.a[(i, j)], expected);
                }
                let b2 = if i >= 2 + n {
                    let g = &area.generators[i - 2 - n];
                    g.participation / g.governor_time_constant
                } else { 0.0 };
                prop_assert!((m.b2[(i, 0)] - b2).abs() <= 1e-12 * b2.abs().max(1.0));
                let b1 = match i { 0 => [-1.0 / h2, 0.0], 1 => [0.0, -2.0 * PI], _ => [0.0, 0.0] };
                prop_assert_eq!(m.b1[(i, 0)], b1[0]);
                prop_assert_eq!(m.b1[(i, 1)], b1[1]);
            }
            prop_assert!((m.c[(0, 0)] - beta).abs() <= 1e-12 * beta);
            prop_assert_eq!(m.c[(0, 1)], 1.0);
            prop_assert!(m.c.iter().skip(2).all(|v| *v == 0.0));
        }

        #[test]
        fn beta_increases_with_damping_and_inverse_droop(area in arb_area(), dd in 0.01f64..1.0, k in 0usize..4) {
            let base = compute_beta(&area).unwrap();
            let mut more_damping = area.clone();
            more_damping.damping += dd;
            prop_assert!(compute_beta(&more_damping).unwrap() > base);
            let mut stiffer = area.clone();
            let k = k % stiffer.generators.len();
            stiffer.generators[k].droop *= 0.5;
            prop_assert!(compute_beta(&stiffer).unwrap() > base);
        }

        #[test]
        fn ace_is_linear(beta in 0.0f64..100.0, f1 in -0.1f64..0.1, f2 in -0.1f64..0.1,
                         p1 in -1.0f64..1.0, p2 in -1.0f64..1.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let lhs = ace(beta, a * f1 + b * f2, a * p1 + b * p2);
            let rhs = a * ace(beta, f1, p1) + b * ace(beta, f2, p2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
