//! Frequency threshold bands, dwell-time classification and trace metrics.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const THRESHOLD_SCHEMA: &str = "lfc-laa-thresholds/1";

/// Share of final samples used for steady-state detection.
pub const STEADY_STATE_WINDOW: f64 = 0.05;
/// Maximum peak-to-peak spread, Hz, of a steady final window.
pub const STEADY_STATE_SPREAD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Continuous,
    /// Maximum cumulative dwell, seconds.
    Limited(f64),
}

impl Requirement {
    pub fn parse(s: &str) -> Result<Self> {
        let text = s.trim().to_ascii_lowercase();
        if text == "continuous" {
            return Ok(Requirement::Continuous);
        }
        let mut parts = text.split_whitespace();
        let amount = parts.next().and_then(|n| n.parse::<f64>().ok());
        let unit = parts.next();
        let seconds = match (amount, unit, parts.next()) {
            (Some(n), Some("s" | "sec" | "second" | "seconds"), None) => n,
            (Some(n), Some("min" | "minute" | "minutes"), None) => n * 60.0,
            (Some(n), None, None) => n,
            _ => {
                return Err(Error::schema(
                    "requirement",
                    format!("`{s}` is neither `continuous` nor a duration like `30 seconds`"),
                ))
            }
        };
        if !(seconds > 0.0) {
            return Err(Error::schema("requirement", format!("duration must be positive in `{s}`")));
        }
        Ok(Requirement::Limited(seconds))
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::Continuous => f.write_str("continuous"),
            Requirement::Limited(s) if s % 60.0 == 0.0 && *s >= 60.0 => write!(f, "{} minutes", s / 60.0),
            Requirement::Limited(s) => write!(f, "{s} seconds"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdBand {
    /// Under-frequency interval `[lo, hi]`, Hz.
    pub below: (f64, f64),
    /// Over-frequency interval `[lo, hi]`, Hz.
    pub above: (f64, f64),
    pub requirement: Requirement,
}

/// Bands ordered outward from nominal. Frequencies in the gap between two
/// bands count toward the outer one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub bands: Vec<ThresholdBand>,
}

impl Default for ThresholdTable {
    fn default() -> Self {
        ThresholdTable {
            bands: vec![
                ThresholdBand {
                    below: (58.8, 60.0),
                    above: (60.0, 60.5),
                    requirement: Requirement::Continuous,
                },
                ThresholdBand {
                    below: (57.5, 58.7),
                    above: (60.6, 61.5),
                    requirement: Requirement::Limited(1800.0),
                },
                ThresholdBand {
                    below: (57.0, 57.4),
                    above: (61.6, 62.5),
                    requirement: Requirement::Limited(30.0),
                },
            ],
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    schema: String,
    band: Vec<BandFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BandFile {
    below: [f64; 2],
    above: [f64; 2],
    requirement: String,
}

impl ThresholdTable {
    pub fn new(bands: Vec<ThresholdBand>) -> Result<Self> {
        let table = ThresholdTable { bands };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .bands
            .first()
            .ok_or_else(|| Error::schema("thresholds", "at least one band is required"))?;
        if first.requirement != Requirement::Continuous {
            return Err(Error::schema("thresholds", "the innermost band must be continuous"));
        }
        for (k, b) in self.bands.iter().enumerate() {
            let ok = b.below.0 <= b.below.1 && b.above.0 <= b.above.1 && b.below.1 <= b.above.0;
            if !ok || [b.below.0, b.below.1, b.above.0, b.above.1].iter().any(|v| !v.is_finite()) {
                return Err(Error::schema(format!("thresholds.band[{k}]"), "intervals are malformed"));
            }
            if k > 0 {
                let inner = &self.bands[k - 1];
                if !(b.below.1 < inner.below.0) || !(b.above.0 > inner.above.1) {
                    return Err(Error::schema(
                        format!("thresholds.band[{k}]"),
                        "bands must not overlap and must be ordered outward",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TableFile = toml::from_str(text).map_err(|e| Error::schema("thresholds", e.to_string()))?;
        if file.schema != THRESHOLD_SCHEMA {
            return Err(Error::schema(
                "thresholds.schema",
                format!("expected `{THRESHOLD_SCHEMA}`, got `{}`", file.schema),
            ));
        }
        let bands = file
            .band
            .into_iter()
            .map(|b| {
                Ok(ThresholdBand {
                    below: (b.below[0], b.below[1]),
                    above: (b.above[0], b.above[1]),
                    requirement: Requirement::parse(&b.requirement)?,
                })
            })
            .collect::<Result<_>>()?;
        ThresholdTable::new(bands)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ThresholdTable::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = format!("schema = \"{THRESHOLD_SCHEMA}\"\n");
        for b in &self.bands {
            out.push_str(&format!(
                "\n[[band]]\nbelow = [{:?}, {:?}]\nabove = [{:?}, {:?}]\nrequirement = \"{}\"\n",
                b.below.0, b.below.1, b.above.0, b.above.1, b.requirement
            ));
        }
        out
    }

    /// Band index of `f`, or `None` outside the outermost band.
    pub fn band_of(&self, f: f64) -> Option<usize> {
        if f <= self.bands[0].below.1 {
            self.bands.iter().position(|b| f >= b.below.0)
        } else {
            self.bands.iter().position(|b| f <= b.above.1)
        }
    }

    /// The continuous band as one interval, the default settling target.
    pub fn continuous_range(&self) -> (f64, f64) {
        (self.bands[0].below.0, self.bands[0].above.1)
    }

    pub fn outer_range(&self) -> (f64, f64) {
        let last = self.bands.last().expect("validated table");
        (last.below.0, last.above.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVerdict {
    Compliant,
    Violation,
    Diverged,
}

impl fmt::Display for GridVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridVerdict::Compliant => "compliant",
            GridVerdict::Violation => "violation",
            GridVerdict::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandOccupancy {
    pub band: usize,
    pub requirement: Requirement,
    pub samples: usize,
    pub dwell_seconds: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub bands: Vec<BandOccupancy>,
    /// Samples outside every band.
    pub outside_samples: usize,
    pub verdict: GridVerdict,
}

/// Dwell counts samples; a band's limit is exceeded once its sample count
/// passes `limit / dt` (so `n * dt > limit` without rounding drift).
pub fn classify(freq_hz: &[f64], dt: f64, table: &ThresholdTable) -> Result<Classification> {
    if freq_hz.is_empty() {
        return Err(Error::InvalidParameter("cannot classify an empty trace".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("sample period must be positive, got {dt}")));
    }
    let mut counts = vec![0usize; table.bands.len()];
    let mut outside = 0usize;
    for &f in freq_hz {
        match table.band_of(f) {
            Some(k) => counts[k] += 1,
            None => outside += 1,
        }
    }
    let bands: Vec<BandOccupancy> = table
        .bands
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(k, (b, &samples))| {
            let exceeded = match b.requirement {
                Requirement::Continuous => false,
                Requirement::Limited(limit) => samples > allowed_samples(limit, dt),
            };
            BandOccupancy {
                band: k,
                requirement: b.requirement,
                samples,
                dwell_seconds: samples as f64 * dt,
                exceeded,
            }
        })
        .collect();
    let verdict = if outside > 0 || bands.iter().any(|b| b.exceeded) {
        GridVerdict::Violation
    } else {
        GridVerdict::Compliant
    };
    Ok(Classification {
        bands,
        outside_samples: outside,
        verdict,
    })
}

fn allowed_samples(limit: f64, dt: f64) -> usize {
    let ratio = limit / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceMetrics {
    pub steady_state: Option<f64>,
    pub settling_time: Option<f64>,
    pub nadir: f64,
    pub nadir_time: f64,
    pub zenith: f64,
    pub zenith_time: f64,
    pub verdict: GridVerdict,
}

impl TraceMetrics {
    /// Table cells in column order, with `-` for missing values.
    pub fn cells(&self) -> [String; 7] {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        [
            opt(self.steady_state),
            opt(self.settling_time),
            format!("{:.3}", self.nadir),
            format!("{:.2}", self.nadir_time),
            format!("{:.3}", self.zenith),
            format!("{:.2}", self.zenith_time),
            self.verdict.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    /// Interval the frequency must stay in to count as settled, Hz.
    pub settling_band: (f64, f64),
    /// The run ended early on divergence.
    pub diverged: bool,
}

impl MetricsOptions {
    pub fn for_table(table: &ThresholdTable) -> Self {
        MetricsOptions {
            settling_band: table.continuous_range(),
            diverged: false,
        }
    }
}

pub fn metrics(time: &[f64], freq_hz: &[f64], table: &ThresholdTable, options: &MetricsOptions) -> Result<TraceMetrics> {
    if freq_hz.is_empty() || time.len() != freq_hz.len() {
        return Err(Error::InvalidParameter(
            "metrics need a non-empty trace with one time per sample".into(),
        ));
    }
    let dt = if time.len() > 1 { time[1] - time[0] } else { 1.0 };
    let classification = classify(freq_hz, dt, table)?;

    let (mut nadir_idx, mut zenith_idx) = (0, 0);
    for (k, &f) in freq_hz.iter().enumerate() {
        if f < freq_hz[nadir_idx] {
            nadir_idx = k;
        }
        if f > freq_hz[zenith_idx] {
            zenith_idx = k;
        }
    }

    let n = freq_hz.len();
    let window = ((n as f64 * STEADY_STATE_WINDOW).ceil() as usize).clamp(1, n);
    let tail = &freq_hz[n - window..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &f| (lo.min(f), hi.max(f)));
    let steady_state = (hi - lo < STEADY_STATE_SPREAD).then(|| tail.iter().sum::<f64>() / window as f64);

    let (band_lo, band_hi) = options.settling_band;
    let outside = |f: f64| !(band_lo..=band_hi).contains(&f);
    let settling_time = match freq_hz.iter().rposition(|&f| outside(f)) {
        None => Some(time[0]),
        Some(k) if k + 1 == n => None,
        Some(k) => Some(time[k + 1]),
    };

    let (verdict, steady_state, settling_time) = if options.diverged {
        (GridVerdict::Diverged, None, None)
    } else {
        (classification.verdict, steady_state, settling_time)
    };
    Ok(TraceMetrics {
        steady_state,
        settling_time,
        nadir: freq_hz[nadir_idx],
        nadir_time: time[nadir_idx],
        zenith: freq_hz[zenith_idx],
        zenith_time: time[zenith_idx],
        verdict,
    })
}
