//! Behavioural fingerprints: a frozen policy evaluated over a fixed state
//! grid, and correlations between such fingerprints.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sac::{SacAgent, STATE_DIM};
use crate::scalar::Scalar;

pub const FINGERPRINT_SCHEMA: &str = "co-maze-fingerprint/v1";

#[derive(Debug, Error, PartialEq)]
pub enum FingerprintError {
    #[error("non-finite action at grid index {index}")]
    NonFinite { index: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero variance in {which}")]
    ZeroVariance { which: &'static str },
    #[error("no fingerprints given")]
    Empty,
    #[error("fingerprint length {found} does not match the grid ({expected})")]
    GridMismatch { found: usize, expected: usize },
    #[error("malformed fingerprint file: {0}")]
    Format(String),
}

/// Anything that maps raw observation rows to deterministic actions.
pub trait Policy<S>: Sync {
    fn act_batch(&self, states: ArrayView2<S>) -> Array1<S>;
}

impl<S: Scalar> Policy<S> for SacAgent<S> {
    fn act_batch(&self, states: ArrayView2<S>) -> Array1<S> {
        self.act_deterministic_batch(states)
    }
}

/// Returns the same action everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy<S>(pub S);

impl<S: Scalar> Policy<S> for ConstantPolicy<S> {
    fn act_batch(&self, states: ArrayView2<S>) -> Array1<S> {
        Array1::from_elem(states.nrows(), self.0)
    }
}

/// A per-state closure as a policy.
pub struct FnPolicy<F>(pub F);

impl<S: Scalar, F: Fn(&[S; STATE_DIM]) -> S + Sync> Policy<S> for FnPolicy<F> {
    fn act_batch(&self, states: ArrayView2<S>) -> Array1<S> {
        states
            .rows()
            .into_iter()
            .map(|r| {
                let s: [S; STATE_DIM] = std::array::from_fn(|i| r[i]);
                (self.0)(&s)
            })
            .collect()
    }
}

/// Cartesian grid over the eight state dimensions, `x` slowest and `phi_rate`
/// fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintGrid {
    pub axes: [Vec<f64>; STATE_DIM],
}

fn centred_axis(count: usize, spacing: f64) -> Vec<f64> {
    let mid = (count as f64 - 1.0) / 2.0;
    (0..count).map(|i| (i as f64 - mid) * spacing).collect()
}

impl Default for FingerprintGrid {
    fn default() -> Self {
        Self::standard()
    }
}

impl FingerprintGrid {
    /// 9 x 9 positions at 5.5 cm, five velocities at 30 cm/s, five tilts at
    /// 0.05 rad and five tilt rates at 0.2 rad/s, all centred on zero.
    pub fn standard() -> Self {
        let pos = centred_axis(9, 0.055);
        let vel = centred_axis(5, 0.30);
        let tilt = centred_axis(5, 0.05);
        let rate = centred_axis(5, 0.20);
        Self {
            axes: [
                pos.clone(),
                pos,
                vel.clone(),
                vel,
                tilt.clone(),
                tilt,
                rate.clone(),
                rate,
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of grid states sharing one `(x, y)` cell.
    pub fn cell_len(&self) -> usize {
        self.axes[2..].iter().map(Vec::len).product()
    }

    pub fn coords(&self, mut index: usize) -> [usize; STATE_DIM] {
        let mut c = [0; STATE_DIM];
        for d in (0..STATE_DIM).rev() {
            let n = self.axes[d].len();
            c[d] = index % n;
            index /= n;
        }
        c
    }

    pub fn index(&self, coords: &[usize; STATE_DIM]) -> usize {
        coords
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&c, axis)| acc * axis.len() + c)
    }

    pub fn state(&self, index: usize) -> [f64; STATE_DIM] {
        let c = self.coords(index);
        std::array::from_fn(|d| self.axes[d][c[d]])
    }

    /// Raw observation rows for `start..start + len`.
    pub fn states<S: Scalar>(&self, start: usize, len: usize) -> Array2<S> {
        let mut out = Array2::zeros((len, STATE_DIM));
        for (r, mut row) in out.rows_mut().into_iter().enumerate() {
            for (o, v) in row.iter_mut().zip(self.state(start + r)) {
                *o = S::lit(v);
            }
        }
        out
    }

    /// SHA-256 over the axis values, identifying the grid in file headers.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for axis in &self.axes {
            h.update((axis.len() as u64).to_le_bytes());
            for v in axis {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint<S> {
    pub tag: String,
    pub actions: Vec<S>,
}

/// Grid states per work item.
pub const CHUNK_LEN: usize = 15_625;

fn fingerprint_chunk<S: Scalar, P: Policy<S> + ?Sized>(
    policy: &P,
    grid: &FingerprintGrid,
    start: usize,
    len: usize,
) -> Result<Vec<S>, FingerprintError> {
    let actions = policy.act_batch(grid.states::<S>(start, len).view());
    match actions.iter().position(|a| !a.is_finite()) {
        Some(i) => Err(FingerprintError::NonFinite { index: start + i }),
        None => Ok(actions.to_vec()),
    }
}

/// Evaluates `policy` at every grid state, in grid order. Chunks run on the
/// rayon pool when `parallel` is set; the result is identical either way.
pub fn compute_fingerprint_with<S: Scalar, P: Policy<S> + ?Sized>(
    policy: &P,
    grid: &FingerprintGrid,
    tag: &str,
    chunk_len: usize,
    parallel: bool,
) -> Result<Fingerprint<S>, FingerprintError> {
    let n = grid.len();
    let chunk_len = chunk_len.max(1);
    let starts: Vec<usize> = (0..n).step_by(chunk_len).collect();
    let run = |&start: &usize| fingerprint_chunk(policy, grid, start, chunk_len.min(n - start));
    let chunks: Result<Vec<Vec<S>>, _> = if parallel {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };
    Ok(Fingerprint {
        tag: tag.to_string(),
        actions: chunks?.concat(),
    })
}

pub fn compute_fingerprint<S: Scalar, P: Policy<S> + ?Sized>(
    policy: &P,
    grid: &FingerprintGrid,
    tag: &str,
) -> Result<Fingerprint<S>, FingerprintError> {
    compute_fingerprint_with(policy, grid, tag, CHUNK_LEN, true)
}

/// Pearson correlation, accumulated in `f64`.
pub fn pearson<S: Scalar>(a: &[S], b: &[S]) -> Result<f64, FingerprintError> {
    if a.len() != b.len() {
        return Err(FingerprintError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(FingerprintError::ZeroVariance { which: "left" });
    }
    let n = a.len() as f64;
    let ma = a.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let mb = b.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x.as_f64() - ma;
        let dy = y.as_f64() - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 {
        return Err(FingerprintError::ZeroVariance { which: "left" });
    }
    if sbb == 0.0 {
        return Err(FingerprintError::ZeroVariance { which: "right" });
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn correlate<S: Scalar>(f1: &Fingerprint<S>, f2: &Fingerprint<S>) -> Result<f64, FingerprintError> {
    pearson(&f1.actions, &f2.actions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub tags: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Header row of tags, then one labelled row per agent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent");
        for t in &self.tags {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (t, row) in self.tags.iter().zip(&self.values) {
            out.push_str(t);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise correlations; exactly symmetric with a unit diagonal.
pub fn correlation_matrix<S: Scalar>(fps: &[Fingerprint<S>]) -> Result<CorrelationMatrix, FingerprintError> {
    if fps.is_empty() {
        return Err(FingerprintError::Empty);
    }
    let n = fps.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        correlate(&fps[i], &fps[i])?;
        values[i][i] = 1.0;
        for j in i + 1..n {
            let r = correlate(&fps[i], &fps[j])?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        tags: fps.iter().map(|f| f.tag.clone()).collect(),
        values,
    })
}

/// Per-`(x, y)` correlations; `None` marks a zero-variance cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialCorrelationMap {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `cells[i][j]` is the cell at `x[i]`, `y[j]`.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl SpatialCorrelationMap {
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().flatten().filter_map(|c| *c)
    }

    /// Rows are x values, columns y values; undefined cells print as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x\\y");
        for y in &self.y {
            out.push_str(&format!(",{y}"));
        }
        out.push('\n');
        for (x, row) in self.x.iter().zip(&self.cells) {
            out.push_str(&format!("{x}"));
            for c in row {
                match c {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn spatial_map<S: Scalar>(
    f1: &Fingerprint<S>,
    f2: &Fingerprint<S>,
    grid: &FingerprintGrid,
) -> Result<SpatialCorrelationMap, FingerprintError> {
    for f in [f1, f2] {
        if f.actions.len() != grid.len() {
            return Err(FingerprintError::GridMismatch {
                found: f.actions.len(),
                expected: grid.len(),
            });
        }
    }
    let cell = grid.cell_len();
    let (nx, ny) = (grid.axes[0].len(), grid.axes[1].len());
    let mut cells = vec![vec![None; ny]; nx];
    for (i, row) in cells.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let start = (i * ny + j) * cell;
            let range = start..start + cell;
            *slot = match pearson(&f1.actions[range.clone()], &f2.actions[range]) {
                Ok(r) => Some(r),
                Err(FingerprintError::ZeroVariance { .. }) => None,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(SpatialCorrelationMap {
        x: grid.axes[0].clone(),
        y: grid.axes[1].clone(),
        cells,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct FileHeader {
    schema: String,
    tag: String,
    grid_hash: String,
    length: usize,
    dtype: String,
}

impl<S: Scalar> Fingerprint<S> {
    /// One JSON header line, then the actions as little-endian scalars.
    pub fn to_bytes(&self, grid: &FingerprintGrid) -> Vec<u8> {
        let header = FileHeader {
            schema: FINGERPRINT_SCHEMA.into(),
            tag: self.tag.clone(),
            grid_hash: grid.hash(),
            length: self.actions.len(),
            dtype: S::DTYPE.into(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serialises");
        out.push(b'\n');
        out.reserve(self.actions.len() * std::mem::size_of::<S>());
        for a in &self.actions {
            a.write_le(&mut out);
        }
        out
    }

    /// Parses a fingerprint file, checking schema, dtype, length and grid.
    pub fn from_bytes(bytes: &[u8], grid: &FingerprintGrid) -> Result<Self, FingerprintError> {
        let fmt = |m: String| FingerprintError::Format(m);
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| fmt("missing header line".into()))?;
        let header: FileHeader = serde_json::from_slice(&bytes[..nl]).map_err(|e| fmt(e.to_string()))?;
        if header.schema != FINGERPRINT_SCHEMA {
            return Err(fmt(format!("unsupported schema {:?}", header.schema)));
        }
        if header.dtype != S::DTYPE {
            return Err(fmt(format!("dtype {} where {} expected", header.dtype, S::DTYPE)));
        }
        if header.grid_hash != grid.hash() {
            return Err(fmt("fingerprint was computed on a different grid".into()));
        }
        let width = std::mem::size_of::<S>();
        let payload = &bytes[nl + 1..];
        if payload.len() != header.length * width {
            return Err(fmt(format!(
                "payload of {} bytes for {} values",
                payload.len(),
                header.length
            )));
        }
        Ok(Self {
            tag: header.tag,
            actions: payload.chunks_exact(width).map(S::read_le).collect(),
        })
    }
}
