//! Eigenvalue stability of the attacked network and parameter sweeps.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::NetworkModel;
use crate::numerics::{eigenvalues, Matrix, Spectrum};

/// Real parts up to this value count as stable; it absorbs the rotor-angle
/// reference mode that sits at zero when no generator has integral action.
pub const STABILITY_TOLERANCE: f64 = 1e-9;

/// Relative width to which critical values are bracketed.
pub const CRITICAL_RELATIVE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
}

impl Verdict {
    pub fn is_stable(self) -> bool {
        self == Verdict::Stable
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
        })
    }
}

pub fn stability_verdict(spectrum: &Spectrum, tolerance: f64) -> Verdict {
    if spectrum.eigenvalues.iter().any(|z| z.re > tolerance) {
        Verdict::Unstable
    } else {
        Verdict::Stable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ParameterKind {
    #[serde(rename = "K_LG")]
    AttackGain,
    #[serde(rename = "M")]
    Inertia,
    #[serde(rename = "D_G")]
    Damping,
    #[serde(rename = "K_P")]
    Primary,
    #[serde(rename = "K_I")]
    Secondary,
}

impl ParameterKind {
    pub fn label(self) -> &'static str {
        match self {
            ParameterKind::AttackGain => "K_LG",
            ParameterKind::Inertia => "M",
            ParameterKind::Damping => "D_G",
            ParameterKind::Primary => "K_P",
            ParameterKind::Secondary => "K_I",
        }
    }
}

impl FromStr for ParameterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '_').collect::<String>().to_ascii_uppercase();
        Ok(match key.as_str() {
            "KLG" => ParameterKind::AttackGain,
            "M" => ParameterKind::Inertia,
            "DG" => ParameterKind::Damping,
            "KP" => ParameterKind::Primary,
            "KI" => ParameterKind::Secondary,
            _ => {
                return Err(Error::Unknown {
                    kind: "sweep parameter",
                    name: s.to_string(),
                    available: "K_LG, M, D_G, K_P, K_I".into(),
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Every generator (or every load bus for `K_LG`).
    All,
    /// Load bus ids for `K_LG`, generator numbers (1-based) otherwise.
    Some(Vec<usize>),
}

/// One swept quantity. With `offset` set, swept values are added to the
/// base model's values instead of replacing them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepParameter {
    pub kind: ParameterKind,
    pub target: Target,
    pub offset: bool,
}

impl SweepParameter {
    pub fn new(kind: ParameterKind, target: Target) -> Self {
        SweepParameter {
            kind,
            target,
            offset: false,
        }
    }

    pub fn offset(mut self) -> Self {
        self.offset = true;
        self
    }

    fn indices(&self, net: &NetworkModel) -> Result<Vec<usize>> {
        let count = match self.kind {
            ParameterKind::AttackGain => net.n_load(),
            _ => net.n_gen(),
        };
        match &self.target {
            Target::All => Ok((0..count).collect()),
            Target::Some(ids) if ids.is_empty() => {
                Err(Error::InvalidParameter(format!("{self} names no targets")))
            }
            Target::Some(ids) => ids
                .iter()
                .map(|&id| match self.kind {
                    ParameterKind::AttackGain => net.load_index(id),
                    _ if (1..=count).contains(&id) => Ok(id - 1),
                    _ => Err(Error::InvalidParameter(format!(
                        "generator {id} out of range 1..={count}"
                    ))),
                })
                .collect(),
        }
    }

    fn values<'a>(&self, net: &'a NetworkModel) -> &'a [f64] {
        match self.kind {
            ParameterKind::AttackGain => &net.k_lg,
            ParameterKind::Inertia => &net.m,
            ParameterKind::Damping => &net.d_g,
            ParameterKind::Primary => &net.k_p,
            ParameterKind::Secondary => &net.k_i,
        }
    }

    fn values_mut<'a>(&self, net: &'a mut NetworkModel) -> &'a mut Vec<f64> {
        match self.kind {
            ParameterKind::AttackGain => &mut net.k_lg,
            ParameterKind::Inertia => &mut net.m,
            ParameterKind::Damping => &mut net.d_g,
            ParameterKind::Primary => &mut net.k_p,
            ParameterKind::Secondary => &mut net.k_i,
        }
    }

    /// Copy of `net` with this parameter set to `value`.
    pub fn apply(&self, net: &NetworkModel, value: f64) -> Result<NetworkModel> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{self} value must be finite")));
        }
        let indices = self.indices(net)?;
        let mut out = net.clone();
        let values = self.values_mut(&mut out);
        for i in indices {
            values[i] = if self.offset { values[i] + value } else { value };
        }
        out.validate()?;
        Ok(out)
    }

    /// Value that reproduces `net` unchanged (the mean over targets for
    /// absolute sweeps; zero for offsets).
    pub fn current_value(&self, net: &NetworkModel) -> Result<f64> {
        if self.offset {
            return Ok(0.0);
        }
        let indices = self.indices(net)?;
        let values = self.values(net);
        Ok(indices.iter().map(|&i| values[i]).sum::<f64>() / indices.len() as f64)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@", self.kind.label())?;
        match &self.target {
            Target::All => f.write_str("all")?,
            Target::Some(ids) => {
                let ids: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                f.write_str(&ids.join(","))?;
            }
        }
        if self.offset {
            f.write_str("+")?;
        }
        Ok(())
    }
}

/// Parses `<param>@<target>`, where target is `all` or a comma list and a
/// trailing `+` selects offset mode.
impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, target) = s.split_once('@').ok_or_else(|| {
            Error::schema("sweep", format!("`{s}` is not of the form <param>@<target>"))
        })?;
        let kind: ParameterKind = kind.trim().parse()?;
        let (target, offset) = match target.trim().strip_suffix('+') {
            Some(t) => (t, true),
            None => (target.trim(), false),
        };
        let target = if target.eq_ignore_ascii_case("all") {
            Target::All
        } else {
            Target::Some(
                target
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<usize>().map_err(|_| {
                            Error::schema("sweep", format!("bad target `{t}` in `{s}`"))
                        })
                    })
                    .collect::<Result<_>>()?,
            )
        };
        Ok(SweepParameter {
            kind,
            target,
            offset,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub tolerance: f64,
    pub critical_relative_tolerance: f64,
    /// Optional state reordering applied to `A*` before solving, as a
    /// solver-ordering check. Verdicts must not depend on it.
    pub permutation: Option<Vec<usize>>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tolerance: STABILITY_TOLERANCE,
            critical_relative_tolerance: CRITICAL_RELATIVE_TOLERANCE,
            permutation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocusPoint {
    pub value: f64,
    pub spectrum: Spectrum,
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalValue {
    /// Midpoint of the final bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Verdict just below and just above the crossing.
    pub below: Verdict,
    pub above: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub locus: Vec<LocusPoint>,
    /// `tracks[k][p]` follows eigenvalue `k` across sweep points.
    pub tracks: Vec<Vec<Complex64>>,
    pub critical_value: Option<CriticalValue>,
    pub tolerance: f64,
}

fn permuted(a: &Matrix, perm: &[usize]) -> Result<Matrix> {
    let n = a.nrows();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidParameter("state permutation is not a permutation".into()));
    }
    Ok(Matrix::from_fn(n, n, |i, j| a[(perm[i], perm[j])]))
}

/// Spectrum of `A*` with `parameter` set to `value`.
pub fn evaluate_point(
    net: &NetworkModel,
    parameter: &SweepParameter,
    value: f64,
    options: &SweepOptions,
) -> Result<LocusPoint> {
    let wrap = |e: Error| Error::SweepPoint {
        parameter: parameter.to_string(),
        value,
        source: Box::new(e),
    };
    let model = parameter.apply(net, value)?;
    let mut a_star = model.attacked_matrix().map_err(wrap)?;
    if let Some(perm) = &options.permutation {
        a_star = permuted(&a_star, perm)?;
    }
    let spectrum = eigenvalues(&a_star).map_err(wrap)?;
    let stable = stability_verdict(&spectrum, options.tolerance).is_stable();
    Ok(LocusPoint {
        value,
        spectrum,
        stable,
    })
}

pub fn sweep_parameter(
    net: &NetworkModel,
    parameter: &SweepParameter,
    values: &[f64],
    options: &SweepOptions,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one value".into()));
    }
    if values.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidParameter("sweep values must be sorted ascending".into()));
    }
    let locus: Vec<LocusPoint> = values
        .par_iter()
        .map(|&v| evaluate_point(net, parameter, v, options))
        .collect::<Result<_>>()?;

    let critical_value = match locus.windows(2).find(|w| w[0].stable != w[1].stable) {
        Some(w) => Some(refine_crossing(net, parameter, w[0].value, w[1].value, w[0].stable, options)?),
        None => None,
    };
    let tracks = pair_tracks(&locus);
    Ok(SweepReport {
        parameter: parameter.clone(),
        locus,
        tracks,
        critical_value,
        tolerance: options.tolerance,
    })
}

/// Bisects a verdict change between `lo` and `hi`, where `lo` has verdict
/// `lo_stable`, down to the relative tolerance.
fn refine_crossing(
    net: &NetworkModel,
    parameter: &SweepParameter,
    mut lo: f64,
    mut hi: f64,
    lo_stable: bool,
    options: &SweepOptions,
) -> Result<CriticalValue> {
    let width_ok = |lo: f64, hi: f64| {
        (hi - lo).abs() <= options.critical_relative_tolerance * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    };
    // The iteration cap only matters for pathological brackets near zero.
    for _ in 0..200 {
        if width_ok(lo, hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if evaluate_point(net, parameter, mid, options)?.stable == lo_stable {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let verdict = |stable: bool| if stable { Verdict::Stable } else { Verdict::Unstable };
    let (lower, upper, below, above) = if lo <= hi {
        (lo, hi, verdict(lo_stable), verdict(!lo_stable))
    } else {
        (hi, lo, verdict(!lo_stable), verdict(lo_stable))
    };
    Ok(CriticalValue {
        value: 0.5 * (lower + upper),
        lower,
        upper,
        below,
        above,
    })
}

/// Greedy nearest-neighbour matching of each point's eigenvalues onto the
/// previous point's, globally by ascending distance.
pub fn pair_tracks(locus: &[LocusPoint]) -> Vec<Vec<Complex64>> {
    let Some(first) = locus.first() else {
        return Vec::new();
    };
    let n = first.spectrum.len();
    let mut tracks: Vec<Vec<Complex64>> = first.spectrum.eigenvalues.iter().map(|&z| vec![z]).collect();
    for point in &locus[1..] {
        let current = &point.spectrum.eigenvalues;
        let previous: Vec<Complex64> = tracks.iter().map(|t| *t.last().expect("non-empty track")).collect();
        let assignment = match_nearest(&previous, current);
        for k in 0..n {
            tracks[k].push(current[assignment[k]]);
        }
    }
    tracks
}

/// `result[k]` is the index in `current` matched to `previous[k]`.
pub fn match_nearest(previous: &[Complex64], current: &[Complex64]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(previous.len() * current.len());
    for (i, p) in previous.iter().enumerate() {
        for (j, c) in current.iter().enumerate() {
            pairs.push(((p - c).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut result = vec![usize::MAX; previous.len()];
    let mut taken = vec![false; current.len()];
    for (_, i, j) in pairs {
        if result[i] == usize::MAX && !taken[j] {
            result[i] = j;
            taken[j] = true;
        }
    }
    result
}

/// Grid from `lo` to `hi`: geometric when both are positive and span more
/// than two decades, linear otherwise.
pub fn sweep_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::InvalidParameter(format!(
            "sweep range needs lo <= hi and at least one point, got {lo}..{hi} with {n}"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let last = (n - 1) as f64;
    let grid: Vec<f64> = if lo > 0.0 && hi / lo > 100.0 {
        let (a, b) = (lo.ln(), hi.ln());
        (0..n).map(|k| (a + (b - a) * k as f64 / last).exp()).collect()
    } else {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / last).collect()
    };
    let mut grid = grid;
    grid[0] = lo;
    grid[n - 1] = hi;
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub parameter: SweepParameter,
    /// Search from the model's current value toward this value.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Countermeasure {
    pub parameter: SweepParameter,
    pub limit: f64,
    /// Value closest to the current one that restores stability, if any.
    pub value: Option<f64>,
    /// Unstable eigenvalue count at the limit.
    pub unstable_at_limit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub sweep: SweepOptions,
    pub grid_points: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            sweep: SweepOptions::default(),
            grid_points: 48,
        }
    }
}

/// Scans each candidate from its current value to its limit and bisects the
/// first return to stability. Not finding one is a result, not an error.
pub fn countermeasure_search(
    net: &NetworkModel,
    candidates: &[Candidate],
    options: &SearchOptions,
) -> Result<Vec<Countermeasure>> {
    candidates
        .par_iter()
        .map(|c| search_one(net, c, options))
        .collect()
}

fn search_one(net: &NetworkModel, candidate: &Candidate, options: &SearchOptions) -> Result<Countermeasure> {
    let parameter = &candidate.parameter;
    let start = parameter.current_value(net)?;
    let (lo, hi) = if candidate.limit >= start {
        (start, candidate.limit)
    } else {
        (candidate.limit, start)
    };
    let mut grid = sweep_grid(lo, hi, options.grid_points.max(2))?;
    if candidate.limit < start {
        grid.reverse();
    }
    let mut previous: Option<f64> = None;
    for &value in &grid {
        let point = evaluate_point(net, parameter, value, &options.sweep)?;
        if point.stable {
            let value = match previous {
                None => value,
                Some(prev) => refine_crossing(net, parameter, prev, value, false, &options.sweep)?.stable_end(),
            };
            return Ok(Countermeasure {
                parameter: parameter.clone(),
                limit: candidate.limit,
                value: Some(value),
                unstable_at_limit: 0,
            });
        }
        previous = Some(value);
    }
    let at_limit = evaluate_point(net, parameter, candidate.limit, &options.sweep)?;
    Ok(Countermeasure {
        parameter: parameter.clone(),
        limit: candidate.limit,
        value: None,
        unstable_at_limit: at_limit
            .spectrum
            .eigenvalues
            .iter()
            .filter(|z| z.re > options.sweep.tolerance)
            .count(),
    })
}

impl CriticalValue {
    /// The bracket end on the stable side, so a reported countermeasure is
    /// itself a verified stable point.
    pub fn stable_end(&self) -> f64 {
        if self.above.is_stable() {
            self.upper
        } else {
            self.lower
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(values: &[(f64, f64)]) -> Spectrum {
        Spectrum {
            eigenvalues: values.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
            residual_bound: 0.0,
        }
    }

    #[test]
    fn verdict_examples() {
        assert_eq!(stability_verdict(&spectrum(&[(-1.0, 2.0), (-1.0, -2.0), (-0.5, 0.0)]), 1e-9), Verdict::Stable);
        assert_eq!(stability_verdict(&spectrum(&[(0.1, 0.0), (-3.0, 0.0)]), 1e-9), Verdict::Unstable);
        assert_eq!(stability_verdict(&spectrum(&[(0.0, 0.0), (-2.0, 0.0)]), 1e-9), Verdict::Stable);
        assert_eq!(stability_verdict(&spectrum(&[(5e-10, 0.0)]), 1e-9), Verdict::Stable);
    }

    #[test]
    fn parameter_parsing_round_trips() {
        for s in ["K_LG@16,21", "D_G@4", "M@all+", "K_I@10+", "K_P@all"] {
            let p: SweepParameter = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        let p: SweepParameter = "dg@3".parse().unwrap();
        assert_eq!(p.kind, ParameterKind::Damping);
        assert!("Q@1".parse::<SweepParameter>().is_err());
        assert!("D_G".parse::<SweepParameter>().is_err());
        assert!("D_G@x".parse::<SweepParameter>().is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(sweep_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
        let g = sweep_grid(0.1, 1000.0, 5).unwrap();
        assert_eq!(g[0], 0.1);
        assert_eq!(g[4], 1000.0);
        assert!((g[2] - 10.0).abs() < 1e-9);
        assert_eq!(sweep_grid(2.0, 2.0, 1).unwrap(), vec![2.0]);
        assert!(sweep_grid(2.0, 1.0, 3).is_err());
    }

    #[test]
    fn nearest_matching_prefers_global_minimum() {
        let prev = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let cur = [Complex64::new(1.05, 0.0), Complex64::new(0.1, 0.0)];
        assert_eq!(match_nearest(&prev, &cur), vec![1, 0]);
    }
}
