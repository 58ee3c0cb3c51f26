//! Radial frequency grids, spectral states and interpolation.
//!
//! In-scope states are Fourier transforms of even (Kac) or radially
//! symmetric (Boltzmann) probability densities, so `fhat` is real, equals 1
//! at the origin, and is bounded by 1 in absolute value. A state stores
//! samples on a radial grid whose first node is exactly 0.
//!
//! Off-grid evaluations (the collision splitting queries `r cos`, `r sin`)
//! use local Lagrange interpolation on a stencil of nearby nodes, with the
//! result clamped to the `[min, max]` of the two bracketing samples. The
//! clamp keeps every interpolated value inside the physical bound
//! `|fhat| <= 1` regardless of polynomial overshoot; the stencil is
//! reflected evenly across `r = 0` so the origin behaves like the interior
//! of the even extension.

use crate::envelopes::GevreyEnvelope;
use crate::error::{Error, Result};
use crate::numerics::fd_weights;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

/// Default interpolation stencil width (degree = width - 1).
pub const DEFAULT_STENCIL_WIDTH: usize = 10;

/// Tolerance on the `|fhat| <= 1` state invariant.
pub const STATE_SUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Kac1d,
    BoltzmannRadial3d,
}

impl Mode {
    /// Canonical second moment: `int v^2 f = 1` (Kac), `int |v|^2 f = 3` (Boltzmann).
    pub fn canonical_second_moment(&self) -> f64 {
        match self {
            Mode::Kac1d => 1.0,
            Mode::BoltzmannRadial3d => 3.0,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Kac1d => write!(f, "kac"),
            Mode::BoltzmannRadial3d => write!(f, "boltzmann"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridSpacing {
    Uniform,
    /// First positive node explicit; the rest follow with a constant ratio.
    Geometric { first: f64 },
}

/// Radial grid `0 = r_0 < r_1 < ... < r_{M-1} = r_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub mode: Mode,
    pub nodes: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(mode: Mode, r_max: f64, m: usize, spacing: GridSpacing) -> Result<Self> {
        if m < 8 {
            return Err(Error::Config(format!(
                "grid needs at least 8 nodes, got {m}"
            )));
        }
        if !(r_max > 0.0) {
            return Err(Error::Config(format!("r_max must be positive, got {r_max}")));
        }
        let nodes = match spacing {
            GridSpacing::Uniform => (0..m)
                .map(|i| r_max * i as f64 / (m - 1) as f64)
                .collect::<Vec<_>>(),
            GridSpacing::Geometric { first } => {
                if !(first > 0.0 && first < r_max) {
                    return Err(Error::Config(format!(
                        "geometric first node must lie in (0, r_max), got {first}"
                    )));
                }
                let ratio = (r_max / first).powf(1.0 / (m - 2) as f64);
                let mut nodes = vec![0.0];
                for k in 0..(m - 1) {
                    nodes.push(first * ratio.powi(k as i32));
                }
                nodes[m - 1] = r_max;
                nodes
            }
        };
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config(
                    "grid nodes must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { mode, nodes })
    }

    pub fn uniform(mode: Mode, r_max: f64, m: usize) -> Result<Self> {
        Self::new(mode, r_max, m, GridSpacing::Uniform)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Cell index `i` with `nodes[i] <= r <= nodes[i+1]` (clamped to the last cell).
    pub fn locate(&self, r: f64) -> usize {
        let i = self.nodes.partition_point(|&x| x <= r);
        i.saturating_sub(1).min(self.len() - 2)
    }
}

/// Sampled values of `fhat` on a radial grid at one instant.
#[derive(Debug, Clone)]
pub struct SpectralState {
    pub grid: Arc<SpectralGrid>,
    pub values: Vec<f64>,
    pub time_label: f64,
}

impl SpectralState {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<f64>, time_label: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "state has {} values for a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        if values[0] != 1.0 {
            return Err(Error::Normalization(format!(
                "fhat(0) must equal 1 exactly (probability normalization), got {}",
                values[0]
            )));
        }
        if let Some(v) = values.iter().find(|v| v.abs() > 1.0 + STATE_SUP_TOL) {
            return Err(Error::Normalization(format!(
                "|fhat| must not exceed 1, found {v}"
            )));
        }
        if !(time_label >= 0.0) {
            return Err(Error::Config(format!(
                "time label must be nonnegative, got {time_label}"
            )));
        }
        Ok(Self {
            grid,
            values,
            time_label,
        })
    }

    /// Interpolated value at radius `r` with the default stencil width.
    pub fn interpolate(&self, r: f64) -> Result<f64> {
        let st = Stencil::at(&self.grid, r, DEFAULT_STENCIL_WIDTH)?;
        Ok(st.eval(&self.values))
    }

    /// `max_i |values[i]| * exp(H(r_i))` for the envelope's bound `H`.
    pub fn weighted_sup(&self, envelope: &GevreyEnvelope) -> f64 {
        self.values
            .iter()
            .zip(&self.grid.nodes)
            .map(|(v, r)| v.abs() * envelope.h(*r).exp())
            .fold(0.0, f64::max)
    }
}

/// One interpolation stencil: node indices, Lagrange weights and the
/// bracketing cell used for clamping.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub idx: Vec<u32>,
    pub w: Vec<f64>,
    pub cell: u32,
}

impl Stencil {
    /// Builds the stencil for radius `r`. Nodes are taken symmetrically
    /// around the bracketing cell, shifted inside the grid at the right end
    /// and reflected evenly (`x -> -x`, same value) across the origin.
    pub fn at(grid: &SpectralGrid, r: f64, width: usize) -> Result<Self> {
        let m = grid.len();
        let nodes = &grid.nodes;
        if !(0.0..=grid.r_max()).contains(&r) {
            return Err(Error::Range {
                r,
                r_max: grid.r_max(),
            });
        }
        let cell = grid.locate(r);
        // exact node hits reproduce samples exactly
        if r == nodes[cell] || r == nodes[cell + 1] {
            let hit = if r == nodes[cell] { cell } else { cell + 1 };
            return Ok(Self {
                idx: vec![hit as u32],
                w: vec![1.0],
                cell: cell as u32,
            });
        }
        let width = width.clamp(2, m);
        let start = (cell as isize - (width as isize / 2 - 1)).min(m as isize - width as isize);
        let virt: Vec<isize> = (start..start + width as isize).collect();
        let coords: Vec<f64> = virt
            .iter()
            .map(|&v| {
                if v >= 0 {
                    nodes[v as usize]
                } else {
                    -nodes[(-v) as usize]
                }
            })
            .collect();
        let w = fd_weights(r, &coords, 0);
        let idx = virt.iter().map(|&v| v.unsigned_abs() as u32).collect();
        Ok(Self {
            idx,
            w,
            cell: cell as u32,
        })
    }

    /// Evaluates the interpolant on `values`, clamped to the bracketing samples.
    #[inline]
    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, w) in self.idx.iter().zip(&self.w) {
            acc += values[*i as usize] * w;
        }
        let a = values[self.cell as usize];
        let b = values[self.cell as usize + 1];
        acc.clamp(a.min(b), a.max(b))
    }
}

/// Precomputed stencils for a fixed set of query radii, stored flat.
///
/// Weights depend only on the grid, so they are built once and reused for
/// every data vector (the hot path of the Wild recursion and the ODE
/// right-hand side).
#[derive(Debug, Clone)]
pub struct StencilTable {
    offsets: Vec<u32>,
    idx: Vec<u32>,
    w: Vec<f64>,
    cells: Vec<u32>,
}

impl StencilTable {
    pub fn build(grid: &SpectralGrid, points: &[f64], width: usize) -> Result<Self> {
        let mut offsets = Vec::with_capacity(points.len() + 1);
        let mut idx = Vec::with_capacity(points.len() * width);
        let mut w = Vec::with_capacity(points.len() * width);
        let mut cells = Vec::with_capacity(points.len());
        offsets.push(0u32);
        for &p in points {
            let st = Stencil::at(grid, p, width)?;
            idx.extend_from_slice(&st.idx);
            w.extend_from_slice(&st.w);
            cells.push(st.cell);
            offsets.push(idx.len() as u32);
        }
        Ok(Self {
            offsets,
            idx,
            w,
            cells,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Evaluates all query points on `values`, writing into `out`.
    pub fn eval_into(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        for (p, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.offsets[p] as usize, self.offsets[p + 1] as usize);
            let mut acc = 0.0;
            for (i, wt) in self.idx[a..b].iter().zip(&self.w[a..b]) {
                acc += values[*i as usize] * wt;
            }
            let cell = self.cells[p] as usize;
            let (lo, hi) = (values[cell], values[cell + 1]);
            *o = acc.clamp(lo.min(hi), lo.max(hi));
        }
    }
}

/// Writes states as CSV rows `(r, value, time_label)` with 17 significant
/// digits (exact decimal round-trip for f64). Leading `#` lines carry
/// caller-provided metadata, typically the resolved run configuration.
pub fn write_states_csv<P: AsRef<Path>>(
    path: P,
    states: &[SpectralState],
    metadata: &[String],
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in metadata {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "r,value,time_label")?;
    for s in states {
        for (r, v) in s.grid.nodes.iter().zip(&s.values) {
            writeln!(f, "{r:.16e},{v:.16e},{:.16e}", s.time_label)?;
        }
    }
    Ok(())
}

/// Reads states back from [`write_states_csv`] output. Consecutive rows with
/// the same time label form one state; the grid is rebuilt from the r column.
pub fn read_states_csv<P: AsRef<Path>>(path: P, mode: Mode) -> Result<Vec<SpectralState>> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for line in f.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('r') {
            continue;
        }
        let mut parts = t.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| Error::Config("short CSV row".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad CSV number: {e}")))
        };
        rows.push((
            parse(parts.next())?,
            parse(parts.next())?,
            parse(parts.next())?,
        ));
    }
    let mut states = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let t = rows[i].2;
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        while i < rows.len() && rows[i].2 == t && (nodes.is_empty() || rows[i].0 > *nodes.last().unwrap())
        {
            nodes.push(rows[i].0);
            values.push(rows[i].1);
            i += 1;
        }
        let grid = Arc::new(SpectralGrid { mode, nodes });
        states.push(SpectralState::new(grid, values, t)?);
    }
    Ok(states)
}
