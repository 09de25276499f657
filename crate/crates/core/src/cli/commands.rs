//! The experiment subcommands. Each writes its CSVs and a run record into
//! the output directory.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::record::{parse_f64, read_csv_rows, Recorder, RunRecord};
use crate::chaos::{berry_autocorr, que_divergence, spacing_from_lambdas, unfold_gaps};
use crate::diagnostics::Diagnostic;
use crate::domain::{DomainKind, Point};
use crate::error::{LqgError, Result};
use crate::field::{load_snapshot, save_snapshot, CouplingParams};
use crate::heat::{
    boundary_correction_fit, default_time_grid, diag_sample, heat_trace, kpz_solve, plateau_estimate, DiagStat,
};
use crate::lbm::{bridge_identity_check, occupation_check, ClockField, TestFunction};
use crate::pipeline::{seed_offset, stage_seed, Lab, Replica};
use crate::spectral::{counting_function, hs_norm, weyl_fit, window_indices, LiouvilleSpectrum};
use crate::stats::{logspace, mean_var, median, sample_weighted};

pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const SNAPSHOT_FILE: &str = "field.lqgf";

pub type Outcome = (RunRecord, Vec<Diagnostic>);

fn params(cfg: &ExperimentConfig) -> Result<CouplingParams> {
    CouplingParams::new(cfg.field.gamma)
}

fn field_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    stage_seed(cfg.run.base_seed, seed_offset::FIELD, r)
}

fn domain_centre(cfg: &ExperimentConfig) -> Point {
    match cfg.domain.kind {
        DomainKind::Disc => [0.0, 0.0],
        DomainKind::Square => [0.5, 0.5],
    }
}

/// Replica 0, either sampled or rebuilt from a stored field snapshot.
fn first_replica(rec: &mut Recorder, lab: &Lab, cfg: &ExperimentConfig, from: Option<&Path>, vectors: bool) -> Result<Replica> {
    let p = params(cfg)?;
    let seed = field_seed(cfg, 0);
    rec.record.seeds.push(seed);
    match from {
        Some(dir) => {
            let (values, _) = rec.stage("load", || load_snapshot(&dir.join(SNAPSHOT_FILE)))?;
            if values.len() != lab.grid.len() {
                return Err(LqgError::Format(format!(
                    "snapshot holds {} values but the configured grid has {} points",
                    values.len(),
                    lab.grid.len()
                )));
            }
            rec.stage("spectrum", || lab.replica_from_field(p, seed, values, vectors))
        }
        None => rec.stage("spectrum", || lab.replica(p, seed, vectors)),
    }
}

/// Eigenvalues of replica 0, read back from `spectrum.csv` when `from` is given.
fn first_spectrum(rec: &mut Recorder, cfg: &ExperimentConfig, from: Option<&Path>) -> Result<LiouvilleSpectrum> {
    match from {
        Some(dir) => rec.stage("load", || load_spectrum(dir)),
        None => {
            let lab = rec.stage("grid", || Lab::new(cfg.domain, cfg.grid.n))?;
            Ok(first_replica(rec, &lab, cfg, None, false)?.spectrum)
        }
    }
}

/// Eigenvalues from `spectrum.csv` and total mass from the field snapshot.
pub fn load_spectrum(dir: &Path) -> Result<LiouvilleSpectrum> {
    let path = dir.join(SPECTRUM_CSV);
    let lambdas = read_csv_rows(&path)?
        .iter()
        .map(|row| parse_f64(row.get(1).map_or("", String::as_str), &path))
        .collect::<Result<Vec<_>>>()?;
    let (_, weights) = load_snapshot(&dir.join(SNAPSHOT_FILE))?;
    Ok(LiouvilleSpectrum::from_lambdas(lambdas, weights.iter().sum()))
}

pub fn cmd_spectrum(cfg: &ExperimentConfig, out: &Path, from: Option<&Path>) -> Result<Outcome> {
    let mut rec = Recorder::new("spectrum", cfg, out)?;
    let lab = rec.stage("grid", || Lab::new(cfg.domain, cfg.grid.n))?;
    let k = cfg.spectral.save_eigenfunctions;
    let rep = first_replica(&mut rec, &lab, cfg, from, k > 0)?;
    let s = &rep.spectrum;
    rec.csv(SPECTRUM_CSV, "n,lambda", s.lambdas.iter().enumerate().map(|(n, l)| format!("{},{l}", n + 1)))?;
    save_snapshot(&out.join(SNAPSHOT_FILE), &rep.field, &rep.measure.weights)?;
    rec.output(SNAPSHOT_FILE);
    if k > 0 {
        let k = k.min(s.len());
        let f = s.eigfuncs()?;
        let header = std::iter::once("i,x1,x2,mu".to_string())
            .chain((1..=k).map(|n| format!("f{n}")))
            .collect::<Vec<_>>()
            .join(",");
        let rows = (0..lab.grid.len()).map(|i| {
            let x = lab.grid.points[i];
            let mut row = format!("{i},{},{},{}", x[0], x[1], rep.measure.weights[i]);
            for n in 0..k {
                row.push_str(&format!(",{}", f[(i, n)]));
            }
            row
        });
        rec.csv("eigenfunctions.csv", &header, rows)?;
    }
    rec.put("points", lab.grid.len());
    rec.put("eigenvalues", s.len());
    rec.put("mu_total", s.total_mass);
    rec.put("lambda_1", s.lambdas.first());
    rec.put("covariance_jitter", lab.model.jitter_used);
    rec.put("hs_norm", hs_norm(&rep.operator));
    rec.put("frobenius_norm", rep.operator.frobenius_norm());
    rec.flags(s.diagnostics());
    rec.finish()
}

pub fn cmd_weyl(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut rec = Recorder::new("weyl", cfg, out)?;
    let p = params(cfg)?;
    let lab = rec.stage("grid", || Lab::new(cfg.domain, cfg.grid.n))?;
    let seeds: Vec<u64> = (0..cfg.run.replicas).map(|r| field_seed(cfg, r)).collect();
    rec.record.seeds = seeds.clone();
    let spectra: Vec<LiouvilleSpectrum> = rec.stage("replicas", || {
        seeds.par_iter().map(|&s| lab.replica(p, s, false).map(|r| r.spectrum)).collect()
    })?;
    let fits = spectra.iter().map(|s| weyl_fit(s, &p, cfg.spectral.window_frac)).collect::<Result<Vec<_>>>()?;
    let c_hats: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let med = median(&c_hats);
    let (mean, var) = mean_var(&c_hats);
    let rows = fits.iter().zip(&spectra).enumerate().map(|(r, (f, s))| {
        format!("{r},{},{},{},{},{}", seeds[r], s.total_mass, f.slope, f.discrepancy, f.polya_fraction)
    });
    let trailer = format!("aggregate median_c_hat={med} mean_c_hat={mean} var_c_hat={var} target={}", p.weyl_const);
    rec.csv_with_trailer("weyl.csv", "replica,seed,mu_total,c_hat,discrepancy,polya_fraction", rows, Some(trailer))?;

    // Ensemble spread of N(λ) at the window edges and centre of replica 0.
    let (lo, hi) = window_indices(spectra[0].len(), cfg.spectral.window_frac)?;
    let probes = [lo, (lo + hi) / 2, hi].map(|n| spectra[0].lambdas[n - 1]);
    let probe_rows = probes.iter().map(|&l| {
        let counts: Vec<f64> = spectra.iter().map(|s| counting_function(s, l) as f64).collect();
        let (m, v) = mean_var(&counts);
        format!("{l},{m},{v}")
    });
    rec.csv("weyl_probes.csv", "lambda,mean_N,var_N", probe_rows)?;
    rec.put("c_hat", &c_hats);
    rec.put("median_c_hat", med);
    rec.put("target", p.weyl_const);
    rec.put("relative_error", (med - p.weyl_const).abs() / p.weyl_const);
    for s in &spectra {
        rec.flags(s.diagnostics());
    }
    rec.finish()
}

pub fn cmd_heattrace(cfg: &ExperimentConfig, out: &Path, from: Option<&Path>) -> Result<Outcome> {
    let mut rec = Recorder::new("heattrace", cfg, out)?;
    let p = params(cfg)?;
    let first = first_spectrum(&mut rec, cfg, from)?;
    let times = default_time_grid(&first, cfg.heat.decades, cfg.heat.points_per_decade)?;
    let mut spectra = vec![first];
    if from.is_none() && cfg.run.replicas > 1 {
        let lab = rec.stage("grid", || Lab::new(cfg.domain, cfg.grid.n))?;
        let seeds: Vec<u64> = (1..cfg.run.replicas).map(|r| field_seed(cfg, r)).collect();
        rec.record.seeds.extend(&seeds);
        let more: Vec<LiouvilleSpectrum> = rec.stage("replicas", || {
            seeds.par_iter().map(|&s| lab.replica(p, s, false).map(|r| r.spectrum)).collect()
        })?;
        spectra.extend(more);
    }
    let traces = spectra.iter().map(|s| heat_trace(s, &times)).collect::<Result<Vec<_>>>()?;
    let m = spectra.len() as f64;
    let mean_h: Vec<f64> = (0..times.len()).map(|k| traces.iter().map(|t| t.values[k]).sum::<f64>() / m).collect();
    let mean_trace = crate::heat::HeatTrace {
        times: times.clone(),
        scaled: times.iter().zip(&mean_h).map(|(t, h)| t * h).collect(),
        values: mean_h,
    };
    let rows = (0..times.len()).map(|k| format!("{},{},{}", times[k], mean_trace.values[k], mean_trace.scaled[k]));
    rec.csv("heattrace.csv", "t,H,tH", rows)?;

    let mass = spectra.iter().map(|s| s.total_mass).sum::<f64>() / m;
    let target = p.weyl_const * mass;
    let plateau = plateau_estimate(&mean_trace, target)?;
    rec.put("plateau_t", plateau.t_star);
    rec.put("plateau_value", plateau.value);
    rec.put("plateau_target", target);
    rec.put("plateau_ratio", plateau.ratio);
    rec.flags(plateau.diagnostics.clone());

    // Correction fit between the trusted small-time edge and the plateau.
    let (_, n_hi) = window_indices(spectra[0].len(), cfg.spectral.window_frac)?;
    let t_trusted = 1.0 / spectra[0].lambdas[n_hi - 1];
    match boundary_correction_fit(&times, &mean_trace.scaled, target, (t_trusted, plateau.t_star)) {
        Ok(fit) => {
            let delta = kpz_solve(0.5, p.gamma)?.delta;
            rec.put("boundary_alpha", fit.alpha);
            rec.put("boundary_points", fit.used);
            rec.put("kpz_delta_half", delta);
            rec.put("one_minus_delta", 1.0 - delta);
            rec.flags(fit.diagnostics);
        }
        Err(e) => rec.put("boundary_fit_error", e.to_string()),
    }

    if cfg.heat.annealed {
        if from.is_some() {
            return Err(LqgError::config("heat.annealed needs sampled replicas and cannot be combined with --from"));
        }
        let t = plateau.t_star;
        let lab = rec.stage("grid", || Lab::new(cfg.domain, cfg.grid.n))?;
        let rows: Vec<(usize, u64, Point, f64, f64)> = rec.stage("annealed", || {
            (0..cfg.run.replicas)
                .into_par_iter()
                .map(|r| {
                    let seed = field_seed(cfg, r);
                    let rep = lab.replica(p, seed, true)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(cfg.run.base_seed, seed_offset::DIAG_POINT, r));
                    let i = sample_weighted(&rep.measure.weights, rng.random());
                    let (hp, lap) = diag_sample(&rep.spectrum, i, t)?;
                    Ok((r, seed, lab.grid.points[i], hp, lap))
                })
                .collect()
        })?;
        rec.csv(
            "diag.csv",
            "replica,seed,x1,x2,t_p_diag,laplace_stat",
            rows.iter().map(|(r, s, x, hp, lap)| format!("{r},{s},{},{},{hp},{lap}", x[0], x[1])),
        )?;
        let stat = DiagStat::from_samples(
            p.gamma,
            t,
            rows.iter().map(|r| r.3).collect(),
            rows.iter().map(|r| r.4).collect(),
        );
        rec.put("diag_t", t);
        rec.put("diag_mean", stat.mean);
        rec.put("diag_cv", stat.coefficient_of_variation);
        rec.put("diag_target", p.weyl_const);
    }
    rec.finish()
}

pub fn cmd_spacing(cfg: &ExperimentConfig, out: &Path, from: Option<&Path>) -> Result<Outcome> {
    let mut rec = Recorder::new("spacing", cfg, out)?;
    let p = params(cfg)?;
    let spec = first_spectrum(&mut rec, cfg, from)?;
    let st = unfold_gaps(&spec, &p, cfg.spectral.window_frac)?;
    let (lo, _) = window_indices(spec.len(), cfg.spectral.window_frac)?;
    rec.csv("spacing.csv", "j,s", st.gaps.iter().enumerate().map(|(k, s)| format!("{},{s}", lo + k)))?;
    rec.csv(
        "spacing_summary.csv",
        "ks_goe,ks_poisson,mean_gap",
        [format!("{},{},{}", st.ks_goe, st.ks_poisson, st.mean_gap)],
    )?;
    rec.put("gaps", st.gaps.len());
    rec.put("ks_goe", st.ks_goe);
    rec.put("ks_poisson", st.ks_poisson);
    rec.put("mean_gap", st.mean_gap);
    rec.put("reference_law", "Wigner surmise 1 - exp(-pi s^2 / 4) in place of the exact GOE spacing law");
    rec.finish()
}

/// Gaps of an arbitrary stored spectrum; used to compare reload and memory paths.
pub fn spacing_of(spec: &LiouvilleSpectrum, cfg: &ExperimentConfig) -> Result<crate::chaos::SpacingStats> {
    spacing_from_lambdas(&spec.lambdas, params(cfg)?.weyl_const * spec.total_mass, cfg.spectral.window_frac)
}

pub fn cmd_que(cfg: &ExperimentConfig, out: &Path, from: Option<&Path>) -> Result<Outcome> {
    let mut rec = Recorder::new("que", cfg, out)?;
    let lab = rec.stage("grid", || Lab::new(cfg.domain, cfg.grid.n))?;
    let rep = first_replica(&mut rec, &lab, cfg, from, true)?;
    let s = &rep.spectrum;
    let (lo, hi) = window_indices(s.len(), cfg.spectral.window_frac)?;
    let count = cfg.chaos.que_count.clamp(1, hi - lo + 1);
    let ns: Vec<usize> = (0..count).map(|k| lo + k * (hi - lo) / count.max(2).saturating_sub(1).max(1)).collect();
    let reports = ns
        .iter()
        .map(|&n| que_divergence(s, &lab.grid, n, cfg.chaos.partition))
        .collect::<Result<Vec<_>>>()?;
    rec.csv("que.csv", "n,tv,ipr", reports.iter().map(|r| format!("{},{},{}", r.n, r.tv_distance, r.ipr)))?;
    let tv: Vec<f64> = reports.iter().map(|r| r.tv_distance).collect();
    let half = tv.len() / 2;
    if half > 0 {
        rec.put("median_tv_lower_half", median(&tv[..half]));
        rec.put("median_tv_upper_half", median(&tv[half..]));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(cfg.run.base_seed, seed_offset::BERRY_CENTER, 0));
    let centre = lab.grid.points[sample_weighted(&rep.measure.weights, rng.random())];
    let radii: Vec<f64> = (0..16).map(|k| 1.5 * lab.grid.mesh + k as f64 * (0.19 - 1.5 * lab.grid.mesh) / 15.0).collect();
    let n_berry = (lo + hi) / 2;
    let prof = berry_autocorr(s, &lab.grid, n_berry, centre, &radii)?;
    rec.csv(
        "berry.csv",
        "r,autocorr,j0_fit",
        prof.radii.iter().zip(&prof.autocorr).map(|(r, a)| {
            let fit = if prof.k_fit.is_finite() { crate::chaos::bessel_j0(prof.k_fit * r) } else { f64::NAN };
            format!("{r},{a},{fit}")
        }),
    )?;
    rec.put("berry_n", n_berry);
    rec.put("berry_center", centre);
    rec.put("berry_k", prof.k_fit);
    rec.put("berry_misfit", prof.misfit);
    rec.flags(prof.diagnostics());
    rec.finish()
}

pub fn cmd_lbm(cfg: &ExperimentConfig, out: &Path, from: Option<&Path>) -> Result<Outcome> {
    let mut rec = Recorder::new("lbm", cfg, out)?;
    let lab = rec.stage("grid", || Lab::new(cfg.domain, cfg.grid.n))?;
    let rep = first_replica(&mut rec, &lab, cfg, from, true)?;
    let grid = &lab.grid;
    let clock = ClockField::new(std::sync::Arc::clone(grid), &rep.field, cfg.field.gamma)?;
    let dt = cfg.mc.dt.unwrap_or(grid.mesh * grid.mesh / 4.0);
    let x0 = domain_centre(cfg);
    let seed = stage_seed(cfg.run.base_seed, seed_offset::LBM, 0);
    rec.record.seeds.push(seed);
    let c = x0;
    let tests = [
        ("constant", TestFunction::Constant(1.0)),
        ("central_box", TestFunction::indicator_box(grid, [c[0] - 0.25, c[1] - 0.25], [c[0] + 0.25, c[1] + 0.25])),
    ];
    let mut rows = Vec::new();
    for (name, f) in &tests {
        let r = rec.stage("occupation", || {
            occupation_check(&clock, &rep.measure.weights, x0, f, cfg.mc.n_paths, dt, seed)
        })?;
        rows.push(format!("{},{},{},{}", r.paths, r.mc, r.target, r.z));
        rec.put(&format!("occupation_{name}_z"), r.z);
        rec.put(&format!("occupation_{name}_se"), r.se);
        rec.flags(r.diagnostics);
    }
    rec.csv("occupation.csv", "paths,mc,target,z", rows)?;

    let s = &rep.spectrum;
    let lambda = median(&s.lambdas);
    let i = grid.nearest_point(x0);
    let u_grid = logspace(0.01 / lambda, 20.0 / lambda, 16);
    let bseed = stage_seed(cfg.run.base_seed, seed_offset::BRIDGE, 0);
    rec.record.seeds.push(bseed);
    let b = rec.stage("bridge", || {
        bridge_identity_check(&clock, s, i, lambda, cfg.mc.n_bridges, &u_grid, dt, bseed)
    })?;
    rec.csv(
        "bridge.csv",
        "lambda,mc,spectral,rel_gap,n_bridges",
        [format!("{},{},{},{},{}", b.lambda, b.mc, b.spectral, b.rel_gap, b.n_bridges)],
    )?;
    rec.put("bridge_se", b.se);
    rec.flags(b.diagnostics);
    rec.finish()
}

pub fn cmd_kpz(cfg: &ExperimentConfig, out: &Path, x: f64, gamma: f64) -> Result<Outcome> {
    let mut rec = Recorder::new("kpz", cfg, out)?;
    let k = kpz_solve(x, gamma)?;
    rec.csv("kpz.csv", "x,gamma,delta", [format!("{x},{gamma},{}", k.delta)])?;
    rec.put("delta", k.delta);
    println!("{}", k.delta);
    rec.finish()
}
