//! Transition-dipole tables p_{m,n}(t_k) = ⟨φ_m(t_k)|Ô(t_k)|φ_n(t_k)⟩ of
//! semiclassically propagated field-free eigenstates.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{ComplexSeries, EmitterModel, ModelError, PulseConfig, TimeGrid};

#[derive(Debug, Error)]
pub enum DipoleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite table entry at (m={m}, n={n}, k={k})")]
    NonFinite { m: usize, n: usize, k: usize },
    #[error("initial state {0} is not part of the selection")]
    InitialNotSelected(usize),
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    /// All M×M entries at every time.
    Full,
    /// Only the row of the initial state; p_{n,i} follows by Hermiticity.
    RowOnly,
}

/// Time-major table of transition matrix elements over M selected states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDipoleTable {
    pub mode: TableMode,
    /// Global eigenstate indices of the selected states.
    pub states: Vec<usize>,
    pub energies: Vec<f64>,
    /// Local index of the initial state.
    pub initial: usize,
    pub times: Vec<f64>,
    /// 1 − ‖φ_m(T)‖² per selected state (absorber losses).
    pub absorbed_norm: Vec<f64>,
    data: Vec<Complex64>,
}

impl TransitionDipoleTable {
    /// Assemble a table from raw time-major data: `data[k·M·M + m·M + n]`
    /// in full mode or `data[k·M + n]` (= p_{i,n}) in row-only mode.
    pub fn from_parts(
        mode: TableMode,
        energies: Vec<f64>,
        initial: usize,
        times: Vec<f64>,
        data: Vec<Complex64>,
    ) -> Result<Self, DipoleError> {
        let m = energies.len();
        if m == 0 || initial >= m {
            return Err(DipoleError::Malformed(format!("initial index {initial} with {m} states")));
        }
        if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DipoleError::Malformed("times must be strictly increasing with at least 2 samples".into()));
        }
        let per = match mode {
            TableMode::Full => m * m,
            TableMode::RowOnly => m,
        };
        if data.len() != per * times.len() {
            return Err(DipoleError::Malformed(format!("expected {} entries, got {}", per * times.len(), data.len())));
        }
        if let Some(pos) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            let (k, rest) = (pos / per, pos % per);
            let (mm, nn) = match mode {
                TableMode::Full => (rest / m, rest % m),
                TableMode::RowOnly => (initial, rest),
            };
            return Err(DipoleError::NonFinite { m: mm, n: nn, k });
        }
        Ok(Self { mode, states: (0..m).collect(), energies, initial, times, absorbed_norm: vec![0.0; m], data })
    }

    pub fn m(&self) -> usize {
        self.energies.len()
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// p_{i,n}(t_k) for all n.
    pub fn row(&self, k: usize) -> &[Complex64] {
        let m = self.m();
        match self.mode {
            TableMode::Full => &self.data[k * m * m + self.initial * m..k * m * m + (self.initial + 1) * m],
            TableMode::RowOnly => &self.data[k * m..(k + 1) * m],
        }
    }

    /// Full M×M matrix at time k, row-major; `None` in row-only mode.
    pub fn matrix(&self, k: usize) -> Option<&[Complex64]> {
        let m = self.m();
        match self.mode {
            TableMode::Full => Some(&self.data[k * m * m..(k + 1) * m * m]),
            TableMode::RowOnly => None,
        }
    }

    /// p_{m,n}(t_k). In row-only mode one of m, n must be the initial state.
    pub fn get(&self, m: usize, n: usize, k: usize) -> Complex64 {
        let mm = self.m();
        match self.mode {
            TableMode::Full => self.data[k * mm * mm + m * mm + n],
            TableMode::RowOnly if m == self.initial => self.data[k * mm + n],
            TableMode::RowOnly if n == self.initial => self.data[k * mm + m].conj(),
            TableMode::RowOnly => panic!("row-only table has no entry ({m},{n})"),
        }
    }

    /// max |p_{m,n} − conj(p_{n,m})| over the stored entries.
    pub fn hermiticity_residual(&self) -> f64 {
        let m = self.m();
        let mut worst = 0.0f64;
        for k in 0..self.k() {
            match self.matrix(k) {
                Some(a) => {
                    for r in 0..m {
                        for c in r..m {
                            worst = worst.max((a[r * m + c] - a[c * m + r].conj()).norm());
                        }
                    }
                }
                None => worst = worst.max(self.row(k)[self.initial].im.abs()),
            }
        }
        worst
    }

    /// Table restricted to the local states `keep` (which must contain the
    /// initial state), in the given order.
    pub fn subset(&self, keep: &[usize]) -> Result<Self, DipoleError> {
        let new_initial = keep
            .iter()
            .position(|&s| s == self.initial)
            .ok_or(DipoleError::InitialNotSelected(self.states[self.initial]))?;
        let m = self.m();
        let mk = keep.len();
        let mut data = Vec::with_capacity(self.k() * if self.mode == TableMode::Full { mk * mk } else { mk });
        for k in 0..self.k() {
            match self.mode {
                TableMode::Full => {
                    let a = &self.data[k * m * m..(k + 1) * m * m];
                    for &r in keep {
                        data.extend(keep.iter().map(|&c| a[r * m + c]));
                    }
                }
                TableMode::RowOnly => {
                    let row = self.row(k);
                    data.extend(keep.iter().map(|&c| row[c]));
                }
            }
        }
        Ok(Self {
            mode: self.mode,
            states: keep.iter().map(|&s| self.states[s]).collect(),
            energies: keep.iter().map(|&s| self.energies[s]).collect(),
            initial: new_initial,
            times: self.times.clone(),
            absorbed_norm: keep.iter().map(|&s| self.absorbed_norm[s]).collect(),
            data,
        })
    }

    /// Row-only view of a full table.
    pub fn to_row_only(&self) -> Self {
        let data = (0..self.k()).flat_map(|k| self.row(k).to_vec()).collect();
        Self { mode: TableMode::RowOnly, data, ..self.clone_header() }
    }

    /// Every `factor`-th time sample (the last sample is kept only if it
    /// falls on the coarse grid).
    pub fn decimated(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        let per = self.data.len() / self.k();
        let ks: Vec<usize> = (0..self.k()).step_by(factor).collect();
        let data = ks.iter().flat_map(|&k| self.data[k * per..(k + 1) * per].to_vec()).collect();
        Self { times: ks.iter().map(|&k| self.times[k]).collect(), data, ..self.clone_header() }
    }

    fn clone_header(&self) -> Self {
        Self {
            mode: self.mode,
            states: self.states.clone(),
            energies: self.energies.clone(),
            initial: self.initial,
            times: self.times.clone(),
            absorbed_norm: self.absorbed_norm.clone(),
            data: Vec::new(),
        }
    }

    /// Raw time-major entries.
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// Propagate the `selection` of emitter eigenstates over `grid` and record
/// the emission-operator matrix elements at every observation time.
/// `initial` is a global eigenstate index contained in `selection`.
pub fn compute_table(
    emitter: &dyn EmitterModel,
    pulse: &PulseConfig,
    grid: &TimeGrid,
    selection: &[usize],
    initial: usize,
    mode: TableMode,
) -> Result<TransitionDipoleTable, DipoleError> {
    let local_initial = selection.iter().position(|&s| s == initial).ok_or(DipoleError::InitialNotSelected(initial))?;
    let mut prop = emitter.start(pulse, grid.dt, selection)?;
    let m = selection.len();
    let n_obs = grid.obs_times.len();
    let per = match mode {
        TableMode::Full => m * m,
        TableMode::RowOnly => m,
    };
    let mut data = vec![Complex64::new(0.0, 0.0); per * n_obs];
    for (k, &t) in grid.obs_times.iter().enumerate() {
        let block = &mut data[k * per..(k + 1) * per];
        match mode {
            TableMode::Full => prop.emission_matrix(t, block),
            TableMode::RowOnly => prop.emission_row(t, local_initial, block),
        }
        if let Some(pos) = block.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            let (mm, nn) = match mode {
                TableMode::Full => (pos / m, pos % m),
                TableMode::RowOnly => (local_initial, pos),
            };
            return Err(DipoleError::NonFinite { m: mm, n: nn, k });
        }
        if k + 1 < n_obs {
            for s in 0..grid.stride {
                prop.step((k * grid.stride + s) as f64 * grid.dt);
            }
        }
    }
    let energies = selection.iter().map(|&s| emitter.energies()[s]).collect();
    Ok(TransitionDipoleTable {
        mode,
        states: selection.to_vec(),
        energies,
        initial: local_initial,
        times: grid.obs_times.clone(),
        absorbed_norm: prop.norms().into_iter().map(|n| 1.0 - n).collect(),
        data,
    })
}

/// ⟨p_sc(t)⟩ = p_{i,i}(t).
pub fn mean_dipole(table: &TransitionDipoleTable) -> ComplexSeries {
    ComplexSeries { times: table.times.clone(), values: (0..table.k()).map(|k| table.row(k)[table.initial]).collect() }
}

/// ⟨Δp(t_{k1})Δp(t_{k2})⟩ = Σ_{m≠i} p_{i,m}(t_{k1})·p_{m,i}(t_{k2}).
pub fn connected_correlation(table: &TransitionDipoleTable, k1: usize, k2: usize) -> Complex64 {
    let r1 = table.row(k1);
    let r2 = table.row(k2);
    (0..table.m()).filter(|&m| m != table.initial).map(|m| r1[m] * r2[m].conj()).sum()
}

const MAGIC: &[u8; 8] = b"PHDTBL01";

/// Binary layout, little-endian: magic "PHDTBL01"; u32 M, K, initial, mode
/// (0 full, 1 row-only); u64 state indices[M]; f64 energies[M];
/// f64 absorbed norms[M]; f64 times[K]; then the time-major entries as
/// (re, im) f64 pairs.
pub fn write_table<W: Write>(table: &TransitionDipoleTable, mut w: W) -> Result<(), DipoleError> {
    w.write_all(MAGIC)?;
    let mode = match table.mode {
        TableMode::Full => 0u32,
        TableMode::RowOnly => 1u32,
    };
    for v in [table.m() as u32, table.k() as u32, table.initial as u32, mode] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &s in &table.states {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for v in table.energies.iter().chain(&table.absorbed_norm).chain(&table.times) {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(table.data.len() * 16);
    for z in &table.data {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_table<R: Read>(mut r: R) -> Result<TransitionDipoleTable, DipoleError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DipoleError::Malformed("bad magic".into()));
    }
    let mut u32s = [0u32; 4];
    for v in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b);
    }
    let [m, k, initial, mode] = u32s.map(|v| v as usize);
    let mode = match mode {
        0 => TableMode::Full,
        1 => TableMode::RowOnly,
        other => return Err(DipoleError::Malformed(format!("unknown mode {other}"))),
    };
    let read_u64 = |r: &mut R| -> Result<u64, DipoleError> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    };
    let states = (0..m).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
    let floats = |r: &mut R, n: usize| -> Result<Vec<f64>, DipoleError> {
        (0..n).map(|_| read_u64(r).map(f64::from_bits)).collect()
    };
    let energies = floats(&mut r, m)?;
    let absorbed_norm = floats(&mut r, m)?;
    let times = floats(&mut r, k)?;
    let per = if mode == TableMode::Full { m * m } else { m };
    let raw = floats(&mut r, 2 * per * k)?;
    let data = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let mut table = TransitionDipoleTable::from_parts(mode, energies, initial, times, data)?;
    table.states = states;
    table.absorbed_norm = absorbed_norm;
    Ok(table)
}

/// Comma-separated dump of p_{m,n}(t): columns t, re, im.
pub fn write_row_csv<W: Write>(table: &TransitionDipoleTable, m: usize, n: usize, mut w: W) -> Result<(), DipoleError> {
    if m >= table.m() || n >= table.m() {
        return Err(DipoleError::Malformed(format!("entry ({m},{n}) outside {} states", table.m())));
    }
    if table.mode == TableMode::RowOnly && m != table.initial && n != table.initial {
        return Err(DipoleError::Malformed(format!("row-only table stores only entries involving state {}", table.initial)));
    }
    writeln!(w, "t,re,im")?;
    for k in 0..table.k() {
        let z = table.get(m, n, k);
        writeln!(w, "{:.12e},{:.17e},{:.17e}", table.times[k], z.re, z.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_full() -> TransitionDipoleTable {
        let m = 3;
        let times: Vec<f64> = (0..5).map(|k| k as f64 * 0.5).collect();
        let mut data = Vec::new();
        for k in 0..5 {
            for a in 0..m {
                for b in 0..m {
                    let x = (a as f64 + 1.0) * (b as f64 + 2.0) * 0.1 + k as f64 * 0.01;
                    data.push(if a == b { Complex64::new(x, 0.0) } else if a < b { Complex64::new(x, x * 0.5) } else { Complex64::new(0.0, 0.0) });
                }
            }
            for a in 0..m {
                for b in 0..a {
                    let v = data[k * m * m + b * m + a].conj();
                    data[k * m * m + a * m + b] = v;
                }
            }
        }
        TransitionDipoleTable::from_parts(TableMode::Full, vec![-1.0, -0.5, 0.1], 0, times, data).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let t = synthetic_full();
        let mut buf = Vec::new();
        write_table(&t, &mut buf).unwrap();
        let back = read_table(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let r = t.to_row_only();
        let mut buf = Vec::new();
        write_table(&r, &mut buf).unwrap();
        assert_eq!(read_table(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn row_only_accessors_follow_hermiticity() {
        let t = synthetic_full();
        let r = t.to_row_only();
        for k in 0..t.k() {
            for n in 0..3 {
                assert_eq!(r.get(0, n, k), t.get(0, n, k));
                assert_eq!(r.get(n, 0, k), t.get(n, 0, k));
            }
        }
        assert_eq!(t.hermiticity_residual(), 0.0);
    }

    #[test]
    fn non_finite_rejected_with_position() {
        let mut data = vec![Complex64::new(0.0, 0.0); 2 * 2 * 3];
        data[2 * 2 + 3] = Complex64::new(f64::NAN, 0.0);
        let e = TransitionDipoleTable::from_parts(TableMode::Full, vec![0.0, 1.0], 0, vec![0.0, 1.0, 2.0], data).unwrap_err();
        assert!(matches!(e, DipoleError::NonFinite { m: 1, n: 1, k: 1 }));
    }

    #[test]
    fn subset_and_decimation() {
        let t = synthetic_full();
        let s = t.subset(&[2, 0]).unwrap();
        assert_eq!(s.initial, 1);
        assert_eq!(s.get(0, 1, 3), t.get(2, 0, 3));
        assert!(t.subset(&[1, 2]).is_err());
        let d = t.decimated(2);
        assert_eq!(d.times, vec![0.0, 1.0, 2.0]);
        assert_eq!(d.get(1, 2, 1), t.get(1, 2, 2));
    }

    #[test]
    fn csv_export() {
        let t = synthetic_full();
        let mut out = Vec::new();
        write_row_csv(&t, 0, 1, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("t,re,im"));
    }
}
