//! Bus-level swing-equation network under load altering attacks.
//!
//! Generator buses carry `[delta, omega]`; load-bus angles `theta` are
//! algebraic and eliminated to give an ordinary `2 * n_gen` system. A
//! dynamic attack feeds back `eps_L = -K_LG * omega`, where each load bus
//! senses the frequency of one generator.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, Matrix};
use crate::sim::attack::LoadSchedule;
use crate::sim::{RunStatus, DIVERGENCE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Series reactance, pu.
    pub reactance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub gen_buses: Vec<usize>,
    pub load_buses: Vec<usize>,
    pub h_gg: Matrix,
    pub h_gl: Matrix,
    pub h_lg: Matrix,
    pub h_ll: Matrix,
    /// Inertia per generator.
    pub m: Vec<f64>,
    pub d_g: Vec<f64>,
    pub k_p: Vec<f64>,
    pub k_i: Vec<f64>,
    /// Secure load per load bus, pu.
    pub p_ls: Vec<f64>,
    /// Attack gain per load bus.
    pub k_lg: Vec<f64>,
    /// Generator index whose frequency each load bus senses.
    pub sensing: Vec<usize>,
}

/// Per-generator dynamic constants, in `gen_buses` order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConstants {
    pub m: Vec<f64>,
    pub d_g: Vec<f64>,
    pub k_p: Vec<f64>,
    pub k_i: Vec<f64>,
}

impl NetworkModel {
    /// Builds the coupling blocks from a branch list. `H_ij = 1/X_ij`
    /// between connected buses (parallel branches add); diagonals stay zero.
    pub fn from_branches(
        gen_buses: &[usize],
        load_buses: &[usize],
        branches: &[Branch],
        constants: GeneratorConstants,
        p_ls: Vec<f64>,
    ) -> Result<Self> {
        let position = bus_positions(gen_buses, load_buses)?;
        let n = gen_buses.len() + load_buses.len();
        let mut h = Matrix::zeros(n, n);
        for br in branches {
            let (Some(&i), Some(&j)) = (position.get(&br.from), position.get(&br.to)) else {
                return Err(Error::InvalidParameter(format!(
                    "branch {}-{} references an unknown bus",
                    br.from, br.to
                )));
            };
            if i == j {
                return Err(Error::InvalidParameter(format!("branch {}-{} is a self loop", br.from, br.to)));
            }
            if !(br.reactance > 0.0) || !br.reactance.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "branch {}-{} reactance must be positive, got {}",
                    br.from, br.to, br.reactance
                )));
            }
            h[(i, j)] += 1.0 / br.reactance;
            h[(j, i)] += 1.0 / br.reactance;
        }
        let ng = gen_buses.len();
        let nl = load_buses.len();
        let sensing = nearest_generators(gen_buses, load_buses, branches)?
            .into_iter()
            .map(|bus| gen_buses.iter().position(|&g| g == bus).expect("generator bus"))
            .collect();
        let net = NetworkModel {
            gen_buses: gen_buses.to_vec(),
            load_buses: load_buses.to_vec(),
            h_gg: h.view((0, 0), (ng, ng)).into_owned(),
            h_gl: h.view((0, ng), (ng, nl)).into_owned(),
            h_lg: h.view((ng, 0), (nl, ng)).into_owned(),
            h_ll: h.view((ng, ng), (nl, nl)).into_owned(),
            m: constants.m,
            d_g: constants.d_g,
            k_p: constants.k_p,
            k_i: constants.k_i,
            p_ls,
            k_lg: vec![0.0; nl],
            sensing,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn n_gen(&self) -> usize {
        self.gen_buses.len()
    }

    pub fn n_load(&self) -> usize {
        self.load_buses.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (ng, nl) = (self.n_gen(), self.n_load());
        let shapes = [
            ("H_GG", self.h_gg.shape(), (ng, ng)),
            ("H_GL", self.h_gl.shape(), (ng, nl)),
            ("H_LG", self.h_lg.shape(), (nl, ng)),
            ("H_LL", self.h_ll.shape(), (nl, nl)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Dimension(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        if self.h_lg != self.h_gl.transpose() {
            return Err(Error::InvalidParameter("H_LG must equal the transpose of H_GL".into()));
        }
        for (name, v, len) in [
            ("M", &self.m, ng),
            ("D_G", &self.d_g, ng),
            ("K_P", &self.k_p, ng),
            ("K_I", &self.k_i, ng),
            ("P_LS", &self.p_ls, nl),
            ("K_LG", &self.k_lg, nl),
        ] {
            if v.len() != len {
                return Err(Error::Dimension(format!("{name} has {} entries, expected {len}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
        }
        if self.m.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidParameter("generator inertia M must be positive".into()));
        }
        for (name, v) in [("D_G", &self.d_g), ("K_P", &self.k_p), ("K_I", &self.k_i), ("K_LG", &self.k_lg)] {
            if v.iter().any(|x| *x < 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative")));
            }
        }
        if self.sensing.len() != nl || self.sensing.iter().any(|&g| g >= ng) {
            return Err(Error::Dimension("sensing map must give a generator per load bus".into()));
        }
        Ok(())
    }

    /// `n_load x n_gen` feedback matrix: row `k` holds `K_LG[k]` in the
    /// column of the generator that load bus `k` senses.
    pub fn attack_gain_matrix(&self) -> Matrix {
        self.gain_matrix_for(&self.k_lg)
    }

    pub fn gain_matrix_for(&self, k_lg: &[f64]) -> Matrix {
        let mut k = Matrix::zeros(self.n_load(), self.n_gen());
        for (row, (&gain, &g)) in k_lg.iter().zip(&self.sensing).enumerate() {
            k[(row, g)] = gain;
        }
        k
    }

    pub fn load_index(&self, bus: usize) -> Result<usize> {
        self.load_buses.iter().position(|&b| b == bus).ok_or_else(|| {
            Error::InvalidParameter(format!("bus {bus} is not a load bus"))
        })
    }

    pub fn gen_index(&self, bus_or_number: usize) -> Result<usize> {
        self.gen_buses.iter().position(|&b| b == bus_or_number).ok_or_else(|| {
            Error::InvalidParameter(format!("bus {bus_or_number} is not a generator bus"))
        })
    }

    /// `A*` for the model's own `K_LG`.
    pub fn attacked_matrix(&self) -> Result<Matrix> {
        let reduced = kron_reduce(self)?;
        attack_matrix(&reduced.a, &reduced.b, &self.attack_gain_matrix())
    }
}

fn bus_positions(gen_buses: &[usize], load_buses: &[usize]) -> Result<BTreeMap<usize, usize>> {
    let mut position = BTreeMap::new();
    for (i, &bus) in gen_buses.iter().chain(load_buses).enumerate() {
        if position.insert(bus, i).is_some() {
            return Err(Error::InvalidParameter(format!("bus {bus} listed twice")));
        }
    }
    Ok(position)
}

/// True when the branch graph over `buses` is a single component.
pub fn is_connected(buses: &[usize], branches: &[Branch]) -> bool {
    let Some(&start) = buses.first() else {
        return false;
    };
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for br in branches {
        adjacency.entry(br.from).or_default().push(br.to);
        adjacency.entry(br.to).or_default().push(br.from);
    }
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &v in adjacency.get(&u).into_iter().flatten() {
            if seen.insert(v) {
                stack.push(v);
            }
        }
    }
    buses.iter().all(|b| seen.contains(b))
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, ties broken by the smaller bus id.
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// For each load bus, the electrically nearest generator bus (shortest
/// path in summed branch reactance).
pub fn nearest_generators(
    gen_buses: &[usize],
    load_buses: &[usize],
    branches: &[Branch],
) -> Result<Vec<usize>> {
    let mut adjacency: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for br in branches {
        adjacency.entry(br.from).or_default().push((br.to, br.reactance));
        adjacency.entry(br.to).or_default().push((br.from, br.reactance));
    }
    let generators: BTreeSet<usize> = gen_buses.iter().copied().collect();
    load_buses
        .iter()
        .map(|&load| {
            let mut dist = BTreeMap::from([(load, 0.0)]);
            let mut heap = BinaryHeap::from([Frontier(0.0, load)]);
            while let Some(Frontier(d, u)) = heap.pop() {
                if d > dist[&u] {
                    continue;
                }
                if generators.contains(&u) {
                    return Ok(u);
                }
                for &(v, x) in adjacency.get(&u).into_iter().flatten() {
                    let nd = d + x;
                    if dist.get(&v).is_none_or(|&old| nd < old) {
                        dist.insert(v, nd);
                        heap.push(Frontier(nd, v));
                    }
                }
            }
            Err(Error::InvalidParameter(format!("load bus {load} reaches no generator")))
        })
        .collect()
}

/// Diagonal matrix of the row sums of `m`.
pub fn row_sum_diag(m: &Matrix) -> Matrix {
    let sums: Vec<f64> = m.row_iter().map(|r| r.sum()).collect();
    Matrix::from_diagonal(&DVector::from_vec(sums))
}

fn diag(v: &[f64]) -> Matrix {
    Matrix::from_diagonal(&DVector::from_column_slice(v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub e: Matrix,
    pub a: Matrix,
    pub b: Matrix,
}

/// Descriptor form over `[delta, theta, omega]` with input `P_L`.
pub fn build_descriptor(net: &NetworkModel) -> Result<Descriptor> {
    net.validate()?;
    let (ng, nl) = (net.n_gen(), net.n_load());
    let n = 2 * ng + nl;
    let (d0, t0, w0) = (0, ng, ng + nl);

    let mut e = Matrix::zeros(n, n);
    e.view_mut((d0, d0), (ng, ng)).copy_from(&Matrix::identity(ng, ng));
    e.view_mut((w0, w0), (ng, ng)).copy_from(&(-diag(&net.m)));

    let mut a = Matrix::zeros(n, n);
    a.view_mut((d0, w0), (ng, ng)).copy_from(&Matrix::identity(ng, ng));
    a.view_mut((t0, d0), (nl, ng)).copy_from(&(-&net.h_lg));
    a.view_mut((t0, t0), (nl, nl))
        .copy_from(&(row_sum_diag(&net.h_lg) + row_sum_diag(&net.h_ll) - &net.h_ll));
    a.view_mut((w0, d0), (ng, ng)).copy_from(
        &(diag(&net.k_i) + row_sum_diag(&net.h_gg) - &net.h_gg + row_sum_diag(&net.h_gl)),
    );
    a.view_mut((w0, t0), (ng, nl)).copy_from(&(-&net.h_gl));
    a.view_mut((w0, w0), (ng, ng))
        .copy_from(&(diag(&net.k_p) + diag(&net.d_g)));

    let mut b = Matrix::zeros(n, nl);
    b.view_mut((t0, 0), (nl, nl)).copy_from(&Matrix::identity(nl, nl));

    Ok(Descriptor { e, a, b })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduced {
    /// State matrix over `[delta, omega]`.
    pub a: Matrix,
    /// Input map of the total load `P_L`.
    pub b: Matrix,
    pub h_inv: Matrix,
}

/// Eliminates the load angles: `theta = H_inv (H_LG delta - P_L)`.
pub fn kron_reduce(net: &NetworkModel) -> Result<Reduced> {
    net.validate()?;
    let (ng, nl) = (net.n_gen(), net.n_load());
    let reduction = row_sum_diag(&net.h_lg) + row_sum_diag(&net.h_ll) - &net.h_ll;
    let h_inv = reduction.clone().try_inverse().ok_or_else(|| {
        Error::Singular("load-angle reduction block H_LG1 + H_LL1 - H_LL is singular".into())
    })?;
    ensure_finite(&h_inv, "load-angle reduction inverse")?;
    let m_inv = diag(&net.m.iter().map(|m| 1.0 / m).collect::<Vec<_>>());
    let lower_left = &m_inv
        * (&net.h_gg - row_sum_diag(&net.h_gg) - row_sum_diag(&net.h_gl)
            + &net.h_gl * &h_inv * &net.h_lg
            - diag(&net.k_i));
    let lower_right = -(&m_inv * (diag(&net.k_p) + diag(&net.d_g)));

    let mut a = Matrix::zeros(2 * ng, 2 * ng);
    a.view_mut((0, ng), (ng, ng)).copy_from(&Matrix::identity(ng, ng));
    a.view_mut((ng, 0), (ng, ng)).copy_from(&lower_left);
    a.view_mut((ng, ng), (ng, ng)).copy_from(&lower_right);

    let mut b = Matrix::zeros(2 * ng, nl);
    b.view_mut((ng, 0), (ng, nl)).copy_from(&(-(&m_inv * &net.h_gl * &h_inv)));
    Ok(Reduced { a, b, h_inv })
}

/// `A* = A' + B' [0  -K_LG]`, the reduced matrix with the frequency-feedback
/// attack closed around it.
pub fn attack_matrix(a_reduced: &Matrix, b_reduced: &Matrix, k_lg: &Matrix) -> Result<Matrix> {
    let n = a_reduced.nrows();
    if a_reduced.ncols() != n || n % 2 != 0 {
        return Err(Error::Dimension(format!(
            "reduced matrix must be square of even order, got {:?}",
            a_reduced.shape()
        )));
    }
    let ng = n / 2;
    let nl = b_reduced.ncols();
    if b_reduced.nrows() != n || k_lg.shape() != (nl, ng) {
        return Err(Error::Dimension(format!(
            "B' is {:?} and K_LG is {:?}, expected ({n}, n_load) and (n_load, {ng})",
            b_reduced.shape(),
            k_lg.shape()
        )));
    }
    let mut feedback = Matrix::zeros(nl, n);
    feedback.view_mut((0, ng), (nl, ng)).copy_from(&(-k_lg));
    Ok(a_reduced + b_reduced * feedback)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTrace {
    pub time: Vec<f64>,
    /// Rotor angles, `[generator][sample]`.
    pub delta: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub status: RunStatus,
}

/// Fixed-step RK4 on `x' = A* x + B (P_LS + eps(t))`. The attack load is
/// sampled at the start of each step and held across it. A diverging run
/// ends with its first sample past the divergence threshold.
pub fn simulate_network(
    a_star: &Matrix,
    b: &Matrix,
    p_ls: &[f64],
    eps: &[LoadSchedule],
    x0: &[f64],
    dt: f64,
    duration: f64,
) -> Result<NetworkTrace> {
    let n = a_star.nrows();
    if a_star.ncols() != n || n % 2 != 0 || b.nrows() != n || x0.len() != n {
        return Err(Error::Dimension("network simulation inputs are inconsistent".into()));
    }
    if p_ls.len() != b.ncols() || (!eps.is_empty() && eps.len() != b.ncols()) {
        return Err(Error::Dimension("load vectors must have one entry per load bus".into()));
    }
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(Error::InvalidParameter("network simulation needs positive dt and duration".into()));
    }
    let ng = n / 2;
    let steps = (duration / dt).round() as usize;
    let mut x = DVector::from_column_slice(x0);
    let mut trace = NetworkTrace {
        time: Vec::with_capacity(steps + 1),
        delta: vec![Vec::with_capacity(steps + 1); ng],
        omega: vec![Vec::with_capacity(steps + 1); ng],
        status: RunStatus::Completed,
    };
    let base = DVector::from_column_slice(p_ls);
    for k in 0..=steps {
        let t = k as f64 * dt;
        trace.time.push(t);
        for g in 0..ng {
            trace.delta[g].push(x[g]);
            trace.omega[g].push(x[ng + g]);
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD) {
            trace.status = RunStatus::Diverged { time: t };
            break;
        }
        if k == steps {
            break;
        }
        let mut load = base.clone();
        for (l, sched) in eps.iter().enumerate() {
            load[l] += sched.value_at(t);
        }
        let forcing = b * load;
        let f = |x: &DVector<f64>| a_star * x + &forcing;
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (dt / 2.0)));
        let k3 = f(&(&x + &k2 * (dt / 2.0)));
        let k4 = f(&(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    Ok(trace)
}

/// Active power injection at `bus`:
/// `U_i * sum_j U_j (G_ij cos(theta_i - theta_j) + B_ij sin(theta_i - theta_j))`.
pub fn ac_injection(bus: usize, u: &[f64], theta: &[f64], g: &Matrix, b: &Matrix) -> f64 {
    let n = u.len();
    (0..n)
        .map(|j| {
            let angle = theta[bus] - theta[j];
            u[j] * (g[(bus, j)] * angle.cos() + b[(bus, j)] * angle.sin())
        })
        .sum::<f64>()
        * u[bus]
}
