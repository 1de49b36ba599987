//! CSV and JSON import/export.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilteredIntegrals;
use crate::langevin::DensityTrajectory;
use crate::linalg::Mat2;
use crate::noisegen::TabulatedPsd;
use crate::tomography::rb::RbResult;
use crate::tomography::{CountRecord, N_BASES, N_STATES};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    Ok(serde_json::from_str(&s)?)
}

/// `t,gamma1,gamma2,delta1,delta2,dgamma1`
pub fn write_filtered_csv<W: Write>(out: W, fi: &FilteredIntegrals) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "gamma1", "gamma2", "delta1", "delta2", "dgamma1"])?;
    for p in &fi.points {
        w.write_record([p.t, p.gamma1, p.gamma2, p.delta1, p.delta2, p.dgamma1].map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// `t,sx,sy,sz,se_sx,se_sy,se_sz`
pub fn write_pauli_csv<W: Write>(out: W, traj: &DensityTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "sx", "sy", "sz", "se_sx", "se_sy", "se_sz"])?;
    for ((t, e), s) in traj.times.iter().zip(&traj.expectations).zip(&traj.std_errors) {
        w.write_record([*t, e[0], e[1], e[2], s[0], s[1], s[2]].map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Density matrix as nested [re, im] pairs.
pub fn matrix_json(m: &Mat2) -> [[[f64; 2]; 2]; 2] {
    std::array::from_fn(|i| std::array::from_fn(|j| [m[(i, j)].re, m[(i, j)].im]))
}

/// Generic table writer with a header and full-precision floats.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidInput("row width differs from header".into()));
        }
        w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// `length,survival_mean,survival_se`
pub fn write_rb_csv<W: Write>(out: W, res: &RbResult) -> Result<()> {
    let rows: Vec<Vec<f64>> = res
        .lengths
        .iter()
        .zip(&res.survival_mean)
        .zip(&res.survival_se)
        .map(|((n, m), s)| vec![*n as f64, *m, *s])
        .collect();
    write_table(out, &["length", "survival_mean", "survival_se"], &rows)
}

const BASES: [&str; 3] = ["x", "y", "z"];
const STATES: [&str; 4] = ["0", "1", "+", "+i"];

#[derive(Debug, Serialize, Deserialize)]
struct CountRow {
    state: String,
    basis: String,
    time_s: f64,
    n_plus: u64,
    n_minus: u64,
}

/// `state,basis,time_s,n_plus,n_minus` with states 0, 1, +, +i and bases x, y, z.
pub fn write_counts_csv<W: Write>(out: W, records: &[CountRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in records {
        for s in 0..N_STATES {
            for b in 0..N_BASES {
                w.serialize(CountRow {
                    state: STATES[s].into(),
                    basis: BASES[b].into(),
                    time_s: rec.time,
                    n_plus: rec.counts[s][b].0,
                    n_minus: rec.counts[s][b].1,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Groups rows by time, in order of first appearance. Every time needs all 12 (state, basis) rows.
pub fn read_counts_csv<R: Read>(input: R) -> Result<Vec<CountRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out: Vec<(CountRecord, [[bool; N_BASES]; N_STATES])> = Vec::new();
    for (line, row) in rd.deserialize::<CountRow>().enumerate() {
        let row = row?;
        let s = STATES
            .iter()
            .position(|x| *x == row.state.trim())
            .ok_or_else(|| Error::InvalidInput(format!("row {}: unknown state {:?}", line + 2, row.state)))?;
        let b = BASES
            .iter()
            .position(|x| *x == row.basis.trim())
            .ok_or_else(|| Error::InvalidInput(format!("row {}: unknown basis {:?}", line + 2, row.basis)))?;
        let k = match out.iter().position(|(r, _)| r.time == row.time_s) {
            Some(k) => k,
            None => {
                out.push((CountRecord { time: row.time_s, counts: [[(0, 0); N_BASES]; N_STATES] }, [[false; N_BASES]; N_STATES]));
                out.len() - 1
            }
        };
        if out[k].1[s][b] {
            return Err(Error::InvalidInput(format!("row {}: duplicate state/basis at t = {}", line + 2, row.time_s)));
        }
        out[k].1[s][b] = true;
        out[k].0.counts[s][b] = (row.n_plus, row.n_minus);
    }
    for (rec, seen) in &out {
        if seen.iter().flatten().any(|x| !x) {
            return Err(Error::InvalidInput(format!("missing state/basis rows at t = {}", rec.time)));
        }
    }
    Ok(out.into_iter().map(|(r, _)| r).collect())
}

/// Density convention of a PSD file, declared by its header and sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdUnits {
    /// `freq_hz,psd_one_sided`: S₁(f) over f ≥ 0.
    #[default]
    OneSidedHz,
    /// `omega_rad_s,psd_two_sided`: S(ω), the internal convention.
    TwoSidedRadS,
}

impl PsdUnits {
    fn header(self) -> [&'static str; 2] {
        match self {
            PsdUnits::OneSidedHz => ["freq_hz", "psd_one_sided"],
            PsdUnits::TwoSidedRadS => ["omega_rad_s", "psd_two_sided"],
        }
    }
}

/// Sidecar for a PSD file. Plateaus and band edges use the file's units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdSidecar {
    pub low_plateau: f64,
    pub high_plateau: f64,
    #[serde(default, alias = "excluded_bands_hz")]
    pub excluded_bands: Vec<(f64, f64)>,
    /// Must agree with the file header when given.
    #[serde(default)]
    pub units: Option<PsdUnits>,
}

/// Rows of a two-column PSD file, checked to be strictly increasing.
pub fn read_psd_csv<R: Read>(input: R) -> Result<(PsdUnits, Vec<(f64, f64)>)> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let units = [PsdUnits::OneSidedHz, PsdUnits::TwoSidedRadS]
        .into_iter()
        .find(|u| names == u.header())
        .ok_or_else(|| Error::InvalidInput("PSD header must be freq_hz,psd_one_sided or omega_rad_s,psd_two_sided".into()))?;
    let mut rows = Vec::new();
    for (line, rec) in rd.deserialize::<(f64, f64)>().enumerate() {
        let (f, s) = rec?;
        if let Some(&(prev, _)) = rows.last() {
            if f <= prev {
                return Err(Error::InvalidInput(format!("frequencies not increasing at row {}", line + 2)));
            }
        }
        rows.push((f, s));
    }
    Ok((units, rows))
}

/// Convert to the internal two-sided S(ω). One-sided S₁(f) maps to S(2πf) = S₁(f)/2.
pub fn ingest_psd(units: PsdUnits, rows: &[(f64, f64)], sidecar: &PsdSidecar) -> Result<TabulatedPsd> {
    if sidecar.units.is_some_and(|u| u != units) {
        return Err(Error::InvalidInput(format!("sidecar declares {:?} but the file header is {:?}", sidecar.units, units)));
    }
    let (fx, fs) = match units {
        PsdUnits::OneSidedHz => (TWO_PI, 0.5),
        PsdUnits::TwoSidedRadS => (1.0, 1.0),
    };
    TabulatedPsd::new(
        rows.iter().map(|r| fx * r.0).collect(),
        rows.iter().map(|r| fs * r.1).collect(),
        fs * sidecar.low_plateau,
        fs * sidecar.high_plateau,
        sidecar.excluded_bands.iter().map(|&(a, b)| (fx * a, fx * b)).collect(),
    )
}

pub fn ingest_psd_files(csv_path: &Path, sidecar_path: &Path) -> Result<TabulatedPsd> {
    let (units, rows) = read_psd_csv(File::open(csv_path)?)?;
    let sidecar: PsdSidecar = read_json(sidecar_path)?;
    ingest_psd(units, &rows, &sidecar)
}

/// Write a tabulated PSD in the internal convention, with its sidecar.
pub fn write_psd<W: Write>(out: W, psd: &TabulatedPsd) -> Result<PsdSidecar> {
    let rows: Vec<Vec<f64>> = psd.samples().map(|(w, s)| vec![w, s]).collect();
    write_table(out, &PsdUnits::TwoSidedRadS.header(), &rows)?;
    Ok(PsdSidecar {
        low_plateau: psd.low_plateau(),
        high_plateau: psd.high_plateau(),
        excluded_bands: psd.excluded().to_vec(),
        units: Some(PsdUnits::TwoSidedRadS),
    })
}
