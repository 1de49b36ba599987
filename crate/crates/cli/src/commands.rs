use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dqmap::errormap::{
    avg_gate_fidelity, chi_full, chi_nm_unchecked, depolarizing_chi, depolarizing_rate, gate_error, kraus_nc,
    nm_measure, pauli_twirl, state_fidelity, validity_zeta, Channel, GateModel,
};
use dqmap::filters::{filtered_integrals, filtered_point};
use dqmap::io::{read_counts_csv, write_counts_csv, write_filtered_csv, write_json, write_psd, write_rb_csv, write_table};
use dqmap::langevin::{default_dt, ensemble_superops, DriveConfig};
use dqmap::linalg::{
    apply_superop, chi_to_superop, drive_unitary, hermitian_eigenvalues4, haar_state, kraus_to_superop, projector,
    unitary_superop, Mat2, Mat4,
};
use dqmap::noisegen::{stream_rng, NoiseSource};
use dqmap::tomography::rb::{rb_simulate, PulseNoise, RbOptions};
use dqmap::tomography::{
    born_probs, gate_error_of, mh_chain, mle_fit, sample_shots, summarize, CountRecord, MhOptions, PosteriorSummary,
    TomographySetup,
};
use dqmap::{FilteredPoint, NoisePsd};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RbNoise, RunConfig};
use crate::CliError;

const HAAR_STREAM: u64 = 0x4841;
const SHOT_STREAM: u64 = 0x5348;

/// Files written by a command, relative to the output directory.
pub type Outputs = Vec<PathBuf>;

fn create(dir: &Path, name: &str, outputs: &mut Outputs) -> Result<BufWriter<File>, CliError> {
    outputs.push(PathBuf::from(name));
    Ok(BufWriter::new(File::create(dir.join(name)).map_err(dqmap::Error::from)?))
}

fn json(dir: &Path, name: &str, value: &impl Serialize, outputs: &mut Outputs) -> Result<(), CliError> {
    outputs.push(PathBuf::from(name));
    write_json(&dir.join(name), value)?;
    Ok(())
}

/// 4×4 complex matrix as nested [re, im] pairs.
fn mat4_json(m: &Mat4) -> Vec<Vec<[f64; 2]>> {
    (0..4).map(|i| (0..4).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn model_names(amp: bool) -> Vec<&'static str> {
    let mut v = vec!["D", "NC", "NM", "PT"];
    if amp {
        v.extend(["NC_I", "NM_I", "PT_I"]);
    }
    v
}

/// Average gate error of each model at one point, in [`model_names`] order.
fn model_errors(p: &FilteredPoint, amp: bool) -> Vec<f64> {
    let v = drive_unitary(p.omega, 0.0, p.t);
    let u = unitary_superop(&v);
    let twirl = |a: bool| 1.0 - avg_gate_fidelity(&Channel::Superop(u * chi_to_superop(&pauli_twirl(p, a).chi())), &v);
    let mut out =
        vec![gate_error(p, GateModel::D), gate_error(p, GateModel::NC), gate_error(p, GateModel::NM), twirl(false)];
    if amp {
        out.extend([gate_error(p, GateModel::NcI), gate_error(p, GateModel::NmI), twirl(true)]);
    }
    out
}

#[derive(Serialize)]
struct Snapshot {
    t: f64,
    /// Toggling-frame process matrix.
    chi_error: Vec<Vec<[f64; 2]>>,
    /// Process matrix of the full gate U∘Λ.
    chi_gate: Vec<Vec<[f64; 2]>>,
    min_eigenvalue: f64,
}

#[derive(Serialize)]
struct PredictSummary {
    omega: f64,
    zeta: Option<f64>,
    models: Vec<&'static str>,
    final_errors: Vec<f64>,
    cp_violations: usize,
}

pub fn predict(cfg: &RunConfig, dir: &Path) -> Result<Outputs, CliError> {
    let mut outputs = Vec::new();
    let psd = cfg.dephasing_psd()?;
    let amp_psd = cfg.amplitude_psd()?;
    let amp = amp_psd.is_some();
    let omega = cfg.drive.omega;
    let times = cfg.times();
    let fi = filtered_integrals(&psd, amp_psd.as_ref(), omega, &times)?;
    write_filtered_csv(create(dir, "filtered.csv", &mut outputs)?, &fi)?;

    let names = model_names(amp);
    let mut header = vec!["t"];
    header.extend(&names);
    let rows: Vec<Vec<f64>> = fi
        .points
        .iter()
        .map(|p| std::iter::once(p.t).chain(model_errors(p, amp)).collect())
        .collect();
    write_table(create(dir, "errors.csv", &mut outputs)?, &header, &rows)?;

    let snapshots: Vec<Snapshot> = fi
        .points
        .iter()
        .map(|p| {
            let chi = chi_nm_unchecked(p, amp);
            Snapshot {
                t: p.t,
                chi_error: mat4_json(&chi),
                chi_gate: mat4_json(&chi_full(p, amp)),
                min_eigenvalue: hermitian_eigenvalues4(&chi)[0],
            }
        })
        .collect();
    let cp_violations = snapshots.iter().filter(|s| s.min_eigenvalue < -1e-8).count();
    json(dir, "snapshots.json", &snapshots, &mut outputs)?;

    if !cfg.drive.omega_grid.is_empty() {
        let rows: Vec<Vec<f64>> = cfg
            .drive
            .omega_grid
            .par_iter()
            .map(|&w| -> Result<Vec<f64>, CliError> {
                let p = filtered_point(&psd, amp_psd.as_ref(), w, PI / w)?;
                Ok(std::iter::once(w).chain(model_errors(&p, amp)).collect())
            })
            .collect::<Result<_, _>>()?;
        let mut header = vec!["omega"];
        header.extend(&names);
        write_table(create(dir, "pi_pulse.csv", &mut outputs)?, &header, &rows)?;
    }

    if cfg.drive.nm_curve {
        let curve = nm_measure(&psd, amp_psd.as_ref(), omega, cfg.t_max(), 4 * times.len().max(100) + 1)?;
        let rows: Vec<Vec<f64>> = (0..curve.times.len())
            .map(|k| vec![curve.times[k], curve.gamma_minus[k], curve.n_cp[k]])
            .collect();
        write_table(create(dir, "nm.csv", &mut outputs)?, &["t", "gamma_minus", "n_cp"], &rows)?;
    }

    let summary = PredictSummary {
        omega,
        zeta: validity_zeta(&psd, omega),
        models: names,
        final_errors: rows.last().map(|r| r[1..].to_vec()).unwrap_or_default(),
        cp_violations,
    };
    json(dir, "predict.json", &summary, &mut outputs)?;
    Ok(outputs)
}

/// Shortest correlation time of the noise, for the default step size.
fn correlation_time(psd: &NoisePsd) -> f64 {
    let s = psd.scale();
    if s > 0.0 {
        1.0 / s
    } else {
        f64::INFINITY
    }
}

#[derive(Serialize)]
struct ValidateSummary {
    m_mc: usize,
    n_haar: usize,
    dt: f64,
    n_steps: usize,
    max_norm_drift: f64,
    models: Vec<&'static str>,
    mean_infidelity: Vec<f64>,
    peak_infidelity: Vec<f64>,
}

pub fn validate(cfg: &RunConfig, dir: &Path) -> Result<Outputs, CliError> {
    let mut outputs = Vec::new();
    let psd = cfg.dephasing_psd()?;
    let amp_psd = cfg.amplitude_psd()?;
    let amp = amp_psd.is_some();
    let omega = cfg.drive.omega;
    let t_max = cfg.t_max();
    let mut tau_c = correlation_time(&psd);
    if let Some(a) = &amp_psd {
        tau_c = tau_c.min(correlation_time(a));
    }
    let dt = cfg.simulation.dt.unwrap_or_else(|| default_dt(omega, tau_c));
    let n_steps = (t_max / dt).round().max(1.0) as usize;
    let n_rec = cfg.drive.times.as_ref().map_or(cfg.drive.n_times, Vec::len);
    let every = (n_steps / n_rec.max(1)).max(1);
    let drive = DriveConfig::new(omega, 0.0, dt, n_steps, cfg.simulation.m_mc)?;
    let freq = NoiseSource::from_psd(&psd);
    let amp_src = amp_psd.as_ref().map(NoiseSource::from_psd);
    let mc = ensemble_superops(&drive, &freq, amp_src.as_ref(), cfg.simulation.seed, every)?;

    let mut rng = stream_rng(cfg.simulation.seed, HAAR_STREAM, 0);
    let states: Vec<Mat2> = (0..cfg.simulation.n_haar).map(|_| projector(&haar_state(&mut rng))).collect();
    let names = model_names(amp);
    let rows: Vec<Vec<f64>> = mc
        .times
        .par_iter()
        .zip(&mc.superops)
        .filter(|(t, _)| **t > 0.0)
        .map(|(&t, s_mc)| -> Result<Vec<f64>, CliError> {
            let p = filtered_point(&psd, amp_psd.as_ref(), omega, t)?;
            let u = unitary_superop(&drive_unitary(omega, 0.0, t));
            let mut models = vec![
                u * chi_to_superop(&depolarizing_chi(depolarizing_rate(&p))),
                kraus_to_superop(&kraus_nc(&p, false)?) * u,
                u * chi_to_superop(&chi_nm_unchecked(&p, false)),
                u * chi_to_superop(&pauli_twirl(&p, false).chi()),
            ];
            if amp {
                models.extend([
                    kraus_to_superop(&kraus_nc(&p, true)?) * u,
                    u * chi_to_superop(&chi_nm_unchecked(&p, true)),
                    u * chi_to_superop(&pauli_twirl(&p, true).chi()),
                ]);
            }
            let inf = models.iter().map(|m| {
                states
                    .iter()
                    .map(|r| 1.0 - state_fidelity(&apply_superop(s_mc, r), &apply_superop(m, r)))
                    .sum::<f64>()
                    / states.len() as f64
            });
            Ok(std::iter::once(t).chain(inf).collect())
        })
        .collect::<Result<_, _>>()?;
    let mut header = vec!["t"];
    header.extend(&names);
    write_table(create(dir, "validate.csv", &mut outputs)?, &header, &rows)?;

    let n = rows.len().max(1) as f64;
    let summary = ValidateSummary {
        m_mc: cfg.simulation.m_mc,
        n_haar: cfg.simulation.n_haar,
        dt,
        n_steps,
        max_norm_drift: mc.max_norm_drift,
        mean_infidelity: (1..=names.len()).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect(),
        peak_infidelity: (1..=names.len()).map(|k| rows.iter().map(|r| r[k]).fold(0.0, f64::max)).collect(),
        models: names,
    };
    json(dir, "validate.json", &summary, &mut outputs)?;
    Ok(outputs)
}

#[derive(Serialize)]
struct MleOut {
    gate_error: f64,
    chi: Vec<Vec<[f64; 2]>>,
    nll: f64,
    converged: bool,
}

#[derive(Serialize)]
struct PosteriorOut {
    summary: PosteriorSummary,
    acceptance: f64,
    proposal_width: f64,
    steps: usize,
    warning: Option<String>,
}

#[derive(Serialize)]
struct TomographyPoint {
    time: f64,
    predicted_nm: Option<f64>,
    mle: MleOut,
    posterior: PosteriorOut,
    /// MLE gate error over independent repetitions of the synthetic experiment.
    repetitions: Option<PosteriorSummary>,
}

pub fn tomography(cfg: &RunConfig, dir: &Path) -> Result<Outputs, CliError> {
    let mut outputs = Vec::new();
    let setup = TomographySetup::new();
    let omega = cfg.drive.omega;
    let tc = &cfg.tomography;
    let seed = cfg.simulation.seed;

    // (record, predicted NM error, repetition gate errors)
    let mut data: Vec<(CountRecord, Option<f64>, Vec<f64>)> = Vec::new();
    if let Some(path) = &tc.counts {
        let recs = read_counts_csv(File::open(path).map_err(dqmap::Error::from)?)?;
        data.extend(recs.into_iter().map(|r| (r, None, Vec::new())));
    } else {
        let psd = cfg.dephasing_psd()?;
        let amp_psd = cfg.amplitude_psd()?;
        let amp = amp_psd.is_some();
        let t_max = cfg.t_max();
        let per = tc.shots / 12;
        let points: Vec<(usize, f64)> = (1..=tc.n_times).map(|k| (k, t_max * k as f64 / tc.n_times as f64)).collect();
        let sims: Vec<_> = points
            .par_iter()
            .map(|&(k, t)| -> Result<_, CliError> {
                let p = filtered_point(&psd, amp_psd.as_ref(), omega, t)?;
                let probs = born_probs(&chi_full(&p, amp), &setup);
                let target = drive_unitary(omega, 0.0, t);
                let recs: Vec<CountRecord> = (0..tc.repetitions)
                    .map(|r| {
                        let mut rng = stream_rng(seed, SHOT_STREAM, (k * tc.repetitions + r) as u64);
                        sample_shots(&probs, per, t, &mut rng)
                    })
                    .collect();
                let reps = if tc.repetitions > 1 {
                    recs.iter()
                        .map(|rec| Ok(gate_error_of(&mle_fit(rec, &setup)?.chi, &target)))
                        .collect::<Result<Vec<f64>, CliError>>()?
                } else {
                    Vec::new()
                };
                let nm = if amp { GateModel::NmI } else { GateModel::NM };
                Ok((recs[0], Some(gate_error(&p, nm)), reps))
            })
            .collect::<Result<_, _>>()?;
        data = sims;
        let recs: Vec<CountRecord> = data.iter().map(|d| d.0).collect();
        write_counts_csv(create(dir, "counts.csv", &mut outputs)?, &recs)?;
    }

    let results: Vec<TomographyPoint> = data
        .par_iter()
        .enumerate()
        .map(|(k, (rec, predicted, reps))| -> Result<_, CliError> {
            let target = drive_unitary(omega, 0.0, rec.time);
            let mle = mle_fit(rec, &setup)?;
            let post = mh_chain(
                rec,
                &setup,
                &target,
                &MhOptions { steps: tc.chain_steps, seed: seed.wrapping_add(k as u64), start: Some(mle.ell), ..Default::default() },
            )?;
            Ok(TomographyPoint {
                time: rec.time,
                predicted_nm: *predicted,
                mle: MleOut {
                    gate_error: gate_error_of(&mle.chi, &target),
                    chi: mat4_json(&mle.chi),
                    nll: mle.nll,
                    converged: mle.converged,
                },
                posterior: PosteriorOut {
                    summary: post.summary,
                    acceptance: post.acceptance,
                    proposal_width: post.width,
                    steps: tc.chain_steps,
                    warning: post.warning,
                },
                repetitions: (!reps.is_empty()).then(|| summarize(reps, (0.025, 0.975))),
            })
        })
        .collect::<Result<_, _>>()?;
    json(dir, "tomography.json", &results, &mut outputs)?;
    Ok(outputs)
}

#[derive(Serialize)]
struct RbOut {
    #[serde(flatten)]
    result: dqmap::tomography::rb::RbResult,
    /// Model gate error of a π pulse at the configured drive.
    epsilon_nm_pi: Option<f64>,
    pulse_noise: PulseNoise,
}

pub fn rb(cfg: &RunConfig, dir: &Path) -> Result<Outputs, CliError> {
    let mut outputs = Vec::new();
    let omega = cfg.drive.omega;
    let (noise, eps_pi) = match cfg.rb.noise {
        RbNoise::Depolarizing { p } => (PulseNoise::depolarizing(p), None),
        RbNoise::Model => {
            let psd = cfg.dephasing_psd()?;
            let amp_psd = cfg.amplitude_psd()?;
            let amp = amp_psd.is_some();
            let half = filtered_point(&psd, amp_psd.as_ref(), omega, 0.5 * PI / omega)?;
            let full = filtered_point(&psd, amp_psd.as_ref(), omega, PI / omega)?;
            let nm = if amp { GateModel::NmI } else { GateModel::NM };
            (PulseNoise::from_x_drive_rates(&pauli_twirl(&half, amp)), Some(gate_error(&full, nm)))
        }
    };
    let mut lengths = vec![1usize];
    while lengths.last().unwrap() * 2 <= cfg.rb.max_length {
        lengths.push(lengths.last().unwrap() * 2);
    }
    let opts = RbOptions { lengths, n_seq: cfg.rb.n_seq, shots: cfg.rb.shots, seed: cfg.simulation.seed };
    let result = rb_simulate(&noise, &opts)?;
    write_rb_csv(create(dir, "rb.csv", &mut outputs)?, &result)?;
    json(dir, "rb_fit.json", &RbOut { result, epsilon_nm_pi: eps_pi, pulse_noise: noise }, &mut outputs)?;
    Ok(outputs)
}

#[derive(Serialize)]
struct IngestSummary {
    samples: usize,
    omega_min: f64,
    omega_max: f64,
    /// Largest ratio of densities just inside and outside each excluded band edge.
    max_edge_jump: f64,
}

pub fn ingest_psd(csv: &Path, sidecar: &Path, dir: &Path) -> Result<Outputs, CliError> {
    let mut outputs = Vec::new();
    let tab = dqmap::io::ingest_psd_files(csv, sidecar)?;
    let side = write_psd(create(dir, "psd_two_sided.csv", &mut outputs)?, &tab)?;
    json(dir, "psd_two_sided.json", &side, &mut outputs)?;
    let mut jump = 1.0f64;
    for &(a, b) in tab.excluded() {
        for edge in [a, b] {
            let (lo, hi) = (tab.eval(edge * (1.0 - 1e-9)), tab.eval(edge * (1.0 + 1e-9)));
            if lo > 0.0 && hi > 0.0 {
                jump = jump.max(lo / hi).max(hi / lo);
            }
        }
    }
    let summary = IngestSummary {
        samples: tab.samples().count(),
        omega_min: tab.min_omega(),
        omega_max: tab.max_omega(),
        max_edge_jump: jump,
    };
    json(dir, "ingest.json", &summary, &mut outputs)?;
    Ok(outputs)
}
