//! Subcommands. Each returns an [`Outcome`]; the exit status is zero iff
//! `pass` holds.

use std::fs;
use std::path::{Path, PathBuf};

use memwave_core::analysis::*;
use memwave_core::freqdomain::{compute_t_rplus, compute_t_rplus_with_solution, CutoffPair, FrequencyLine};
use memwave_core::krylov::GmresOptions;
use memwave_core::scattering::{
    relative_l2, split_fields_unchecked, support_check, IncidentReference, Spectrum, WINDOW_PENDING_TOL,
};
use memwave_core::timedomain::{simulate, SimulationConfig, Trajectory};
use memwave_core::{Grid1D, PermittivityModel, WavePacket};
use num_complex::Complex64;
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Campaign, RunConfig};
use crate::error::{CliError, Result};

/// `<root>/<name>/{frames,spectra,reports}`.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn new(root: &Path, name: &str) -> Self {
        Self { path: root.join(name) }
    }

    pub fn frames(&self) -> PathBuf {
        self.path.join("frames")
    }

    pub fn spectra(&self) -> PathBuf {
        self.path.join("spectra")
    }

    pub fn reports(&self) -> PathBuf {
        self.path.join("reports")
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Outcome {
    pub pass: bool,
    /// Names of the gates that failed or did not complete.
    pub failures: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json(path: &Path, value: &impl Serialize, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text).map_err(io_err(path))?;
    written.push(path.to_path_buf());
    Ok(())
}

/// `V(x) / max |V|`; the real part when the potential is real, else `|V|`.
fn normalized_potential(model: &PermittivityModel, grid: &Grid1D) -> Vec<f64> {
    let v = &model.potential;
    let vmax = v.max_abs();
    grid.points()
        .map(|x| {
            if vmax == 0.0 || x.abs() > model.r {
                return 0.0;
            }
            let vx = v.eval(x);
            if v.is_real() {
                vx.re / vmax
            } else {
                vx.norm() / vmax
            }
        })
        .collect()
}

/// One CSV per stored level, `frame_%06d.csv` numbered by storage index.
pub fn write_frames(traj: &Trajectory, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg = &traj.config;
    let w = normalized_potential(&cfg.model, &cfg.grid);
    let mut out = Vec::with_capacity(traj.states.len());
    for (k, s) in traj.states.iter().enumerate() {
        let path = dir.join(format!("frame_{k:06}.csv"));
        let mut csv = csv::Writer::from_path(&path)?;
        csv.write_record(["x", "re_u", "im_u", "abs_u", "V_norm"])?;
        for (j, x) in cfg.grid.points().enumerate() {
            let u = s.u[j];
            csv.serialize((x, u.re, u.im, u.norm(), w[j]))?;
        }
        csv.flush().map_err(io_err(&path))?;
        out.push(path);
    }
    Ok(out)
}

#[derive(Serialize)]
struct RunSummary {
    gamma: f64,
    alpha_p: f64,
    n_x: usize,
    n_t: usize,
    stride: usize,
    frames: usize,
    max_abs_u: f64,
    boundary_amplitude: f64,
    energy: EnergyTrace,
    envelope_pass: bool,
}

fn run_summary(traj: &Trajectory, envelope_tol: f64) -> RunSummary {
    let cfg = &traj.config;
    let energy = energy_trace(traj);
    RunSummary {
        gamma: cfg.model.gamma,
        alpha_p: cfg.model.alpha_p,
        n_x: cfg.grid.len(),
        n_t: cfg.time.n_t(),
        stride: cfg.stride,
        frames: traj.states.len(),
        max_abs_u: traj.states.iter().map(|s| s.max_abs_u()).fold(0.0, f64::max),
        boundary_amplitude: traj.boundary_amplitude,
        envelope_pass: energy.envelope_residual < envelope_tol,
        energy,
    }
}

/// Runs the configured model and writes its frames. Nothing is written when
/// the run is rejected.
pub fn cmd_simulate(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let traj = simulate(&cfg.simulation()?)?;
    let mut written = write_frames(&traj, &dir.frames())?;
    let summary = run_summary(&traj, cfg.validation.envelope_tol);
    write_json(&dir.reports().join("simulate.json"), &summary, &mut written)?;
    Ok(Outcome {
        pass: true,
        failures: vec![],
        written,
    })
}

/// Frames for every `(gamma, alpha_p)` pair, each under `<name>_gamma<g>_alpha<a>`.
/// The gate is that every run completes with bounded fields; the energy
/// envelope of each run is reported alongside.
pub fn cmd_frames(cfg: &RunConfig, root: &Path) -> Result<Outcome> {
    let base = cfg.simulation()?;
    let runs: Vec<(f64, f64, SimulationConfig)> = cfg
        .frame_pairs
        .iter()
        .map(|&[g, a]| Ok((g, a, base.with_model(cfg.model_with(g, a)?))))
        .collect::<Result<_>>()?;
    let trajs: Vec<_> = {
        use rayon::prelude::*;
        runs.par_iter().map(|(_, _, c)| simulate(c)).collect()
    };
    let mut outcome = Outcome::default();
    let mut reports = Vec::new();
    for ((g, a, _), traj) in runs.iter().zip(trajs) {
        let label = format!("{}_gamma{g}_alpha{a}", cfg.name);
        match traj {
            Ok(traj) => {
                let run = RunDir::new(root, &label);
                outcome.written.extend(write_frames(&traj, &run.frames())?);
                let summary = run_summary(&traj, cfg.validation.envelope_tol);
                write_json(&run.reports().join("frames.json"), &summary, &mut outcome.written)?;
                reports.push(json!({ "run": label, "completed": true, "summary": summary }));
            }
            Err(e) => {
                outcome.failures.push(label.clone());
                reports.push(json!({ "run": label, "completed": false, "error": e.to_string() }));
            }
        }
    }
    let index = RunDir::new(root, &cfg.name).reports().join("frames.json");
    write_json(&index, &reports, &mut outcome.written)?;
    outcome.pass = outcome.failures.is_empty();
    Ok(outcome)
}

/// Splits the run into incident, reflected and transmitted profiles using a
/// free run on the same grid as the incident reference.
pub fn cmd_extract(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let mut sim = cfg.simulation()?;
    sim.stride = usize::MAX;
    let free = sim.free();
    let (traj, free) = rayon::join(|| simulate(&sim), || simulate(&free));
    let (traj, free) = (traj?, free?);
    let rec = split_fields_unchecked(&traj, IncidentReference::Simulated(&free.probes))?;
    let support = support_check(&rec, cfg.validation.support_tol);
    let complete = rec.pending_fraction <= WINDOW_PENDING_TOL;
    let mut outcome = Outcome::default();
    write_json(
        &dir.reports().join("scattering_record.json"),
        &rec,
        &mut outcome.written,
    )?;
    let report = json!({
        "pending_fraction": rec.pending_fraction,
        "pending_tol": WINDOW_PENDING_TOL,
        "window_complete": complete,
        "support": support,
    });
    write_json(&dir.reports().join("extract.json"), &report, &mut outcome.written)?;
    if !complete {
        outcome.failures.push("window".into());
    }
    if !support.pass {
        outcome.failures.push("support".into());
    }
    outcome.pass = outcome.failures.is_empty();
    Ok(outcome)
}

fn packet_spectrum(p: &WavePacket, line: &FrequencyLine) -> Spectrum {
    Spectrum::from_fn(line.sigma, &line.omegas(), |z| p.incident_transform(z))
}

/// `T f` and `R+ f` for the incident packet on every configured line.
pub fn cmd_smatrix(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let model = cfg.model()?;
    let cut = cfg.cutoff()?;
    let lattice = cfg.lattice()?;
    let packet = cfg.packet()?;
    let mut outcome = Outcome::default();
    let mut per_sigma = Vec::new();
    for line in cfg.lines()? {
        let f = packet_spectrum(&packet, &line);
        let tag = format!("sigma{}", line.sigma);
        match compute_t_rplus(&f, &model, &cut, &line, &lattice, &cfg.solver) {
            Ok(out) => {
                let s = dir.spectra();
                write_json(&s.join(format!("incident_{tag}.json")), &out.f, &mut outcome.written)?;
                write_json(&s.join(format!("t_of_f_{tag}.json")), &out.t_of_f, &mut outcome.written)?;
                write_json(
                    &s.join(format!("rplus_of_f_{tag}.json")),
                    &out.rplus_of_f,
                    &mut outcome.written,
                )?;
                per_sigma.push(json!({
                    "sigma": line.sigma,
                    "iterations": out.iterations,
                    "residual": out.residual,
                    "converged": true,
                }));
            }
            Err(e) => {
                outcome.failures.push(tag);
                per_sigma.push(json!({ "sigma": line.sigma, "converged": false, "error": e.to_string() }));
            }
        }
    }
    write_json(&dir.reports().join("smatrix.json"), &per_sigma, &mut outcome.written)?;
    outcome.pass = outcome.failures.is_empty();
    Ok(outcome)
}

/// Joint and time-only self-convergence of the configured model.
pub fn cmd_convergence(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let sim = cfg.simulation()?;
    let levels = cfg.validation.convergence_levels;
    let (joint, time_only) = rayon::join(
        || convergence_study(&sim, levels, Refinement::Joint),
        || convergence_study(&sim, levels, Refinement::TimeOnly),
    );
    let mut outcome = Outcome::default();
    for (name, r) in [("joint", joint), ("time_only", time_only)] {
        let r = r?;
        if !(r.errors.iter().all(|e| e.is_finite()) && r.fitted_order > 0.0) {
            outcome.failures.push(name.into());
        }
        write_json(
            &dir.reports().join(format!("convergence_{name}.json")),
            &r,
            &mut outcome.written,
        )?;
    }
    outcome.pass = outcome.failures.is_empty();
    Ok(outcome)
}

/// One campaign's JSON report and verdict.
pub struct CampaignResult {
    pub pass: bool,
    pub report: Value,
}

fn result<T: Serialize>(pass: bool, report: &T) -> CampaignResult {
    CampaignResult {
        pass,
        report: serde_json::to_value(report).expect("report serializes"),
    }
}

fn tight(opts: &GmresOptions) -> GmresOptions {
    GmresOptions {
        tol: opts.tol.min(1e-13),
        ..*opts
    }
}

fn memoryless(cfg: &RunConfig) -> Result<SimulationConfig> {
    Ok(cfg.simulation()?.with_model(cfg.model_with(0.0, 0.0)?))
}

pub fn run_campaign(cfg: &RunConfig, campaign: Campaign) -> Result<CampaignResult> {
    let v = &cfg.validation;
    let sim = cfg.simulation()?;
    Ok(match campaign {
        Campaign::Energy => {
            let s = run_summary(&simulate(&sim)?, v.envelope_tol);
            let pass = s.envelope_pass && s.max_abs_u.is_finite();
            result(pass, &json!({ "envelope_tol": v.envelope_tol, "run": s }))
        }
        Campaign::Causality => {
            let r = causality_check(&sim, v.support_tol)?;
            result(r.pass, &r)
        }
        Campaign::FreeTransport => {
            let base = sim.free();
            let study = convergence_study(&base, v.convergence_levels, Refinement::Joint)?;
            let mut finest = base.clone();
            for _ in 1..v.convergence_levels {
                finest = refine(&finest, Refinement::Joint);
            }
            let (at_config, at_finest) = rayon::join(|| free_transport_error(&base), || free_transport_error(&finest));
            let (at_config, at_finest) = (at_config?, at_finest?);
            let order_ok = (study.fitted_order - 2.0).abs() < v.order_tol;
            let pass = order_ok && at_finest < v.free_transport_tol;
            result(
                pass,
                &json!({
                    "error_at_config": at_config,
                    "error_at_finest": at_finest,
                    "finest": { "dx": finest.grid.dx(), "dt": finest.time.dt() },
                    "tol": v.free_transport_tol,
                    "order_tol": v.order_tol,
                    "study": study,
                }),
            )
        }
        Campaign::FixedPoint => {
            let gamma = if sim.model.gamma > 0.0 { sim.model.gamma } else { 1.0 };
            let r = memory_fixed_point_check(gamma, sim.time.dt(), v.fixed_point_levels)?;
            result(r.pass, &r)
        }
        Campaign::Memoryless => {
            let base = stable_oracle_base(&memoryless(cfg)?, 6)?;
            let r = memoryless_reduction_check(&base, v.memoryless_halvings)?;
            let exact = r.distances.iter().all(|d| *d < MEMORYLESS_ZERO_TOL);
            let pass = exact || r.min_slope >= v.memoryless_min_slope;
            result(pass, &json!({ "min_slope_gate": v.memoryless_min_slope, "report": r }))
        }
        Campaign::FrequencyIdentities => frequency_identities(cfg)?,
        Campaign::Linearity => linearity(cfg)?,
        Campaign::Classical => {
            let mut r = classical_oracle_check(
                &memoryless(cfg)?,
                (v.classical_band[0], v.classical_band[1]),
                v.classical_samples,
            )?;
            let tol = v.classical_tol;
            r.tol = tol;
            r.pass = r.rel_r < tol
                && r.rel_t < tol
                && r.truncation_estimate < 0.5 * tol
                && r.unitarity_defect < UNITARITY_TOL;
            result(r.pass, &r)
        }
        Campaign::CrossValidation => {
            let r = cross_validation_refinement(&cfg.cross_validation()?, v.refinement_levels)?;
            result(r.pass, &r)
        }
    })
}

/// Free model gives the identity; Fredholm residual; `w = rho1 w`; and
/// independence of the outer cutoff, all on the first configured line.
fn frequency_identities(cfg: &RunConfig) -> Result<CampaignResult> {
    let v = &cfg.validation;
    let line = cfg.lines()?.remove(0);
    let model = cfg.model()?;
    let cut = cfg.cutoff()?;
    let lattice = cfg.lattice()?;
    let f = packet_spectrum(&cfg.packet()?, &line);
    let fnorm = f.l2_norm();

    let free = compute_t_rplus(
        &f,
        &PermittivityModel::free(model.r),
        &cut,
        &line,
        &lattice,
        &cfg.solver,
    )?;
    let identity_t = relative_l2(&free.t_of_f, &f);
    let identity_r = free.rplus_of_f.l2_norm() / fnorm;

    let (out, sol) = compute_t_rplus_with_solution(&f, &model, &cut, &line, &lattice, &cfg.solver)?;
    let mut outside = 0.0f64;
    for (j, x) in lattice.points().enumerate() {
        for k in 0..line.n_omega {
            outside = outside.max(((1.0 - cut.rho1(x)) * sol.w.get(j, k)).norm());
        }
    }
    let support = outside / sol.w.norm().max(f64::MIN_POSITIVE);

    let r1 = cfg.r1();
    let wider = r1 + 0.5 * (r1 - model.r).max(0.5);
    let runs: Vec<_> = [
        (r1, lattice),
        (wider, Grid1D::colon(-wider, cfg.frequency.lattice_dx, wider)?),
    ]
    .iter()
    .map(|(r, grid)| {
        let cut = CutoffPair::new(model.r, *r)?;
        compute_t_rplus(&f, &model, &cut, &line, grid, &tight(&cfg.solver))
    })
    .collect::<std::result::Result<_, _>>()?;
    let cutoff_t = relative_l2(&runs[0].t_of_f, &runs[1].t_of_f);
    let cutoff_r = relative_l2(&runs[0].rplus_of_f, &runs[1].rplus_of_f);

    let pass = identity_t < v.identity_tol
        && identity_r < v.identity_tol
        && out.residual < v.residual_tol
        && support < v.support_reproduction_tol
        && cutoff_t < v.cutoff_tol
        && cutoff_r < v.cutoff_tol;
    Ok(result(
        pass,
        &json!({
            "sigma": line.sigma,
            "identity_t": identity_t,
            "identity_r": identity_r,
            "identity_tol": v.identity_tol,
            "residual": out.residual,
            "iterations": out.iterations,
            "residual_tol": v.residual_tol,
            "support_reproduction": support,
            "support_reproduction_tol": v.support_reproduction_tol,
            "cutoffs": [r1, wider],
            "cutoff_t": cutoff_t,
            "cutoff_r": cutoff_r,
            "cutoff_tol": v.cutoff_tol,
        }),
    ))
}

/// `T` and `R+` applied to a random combination of two packets, with
/// coefficients drawn from the configured seed.
fn linearity(cfg: &RunConfig) -> Result<CampaignResult> {
    let v = &cfg.validation;
    let line = cfg.lines()?.remove(0);
    let model = cfg.model()?;
    let cut = cfg.cutoff()?;
    let lattice = cfg.lattice()?;
    let p1 = cfg.packet()?;
    let p2 = WavePacket::new(p1.x0 - 0.5, 2.0 * p1.sigma_g, 0.6 * p1.lambda)?;
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut coef = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (a, b) = (coef(), coef());
    let f1 = packet_spectrum(&p1, &line);
    let f2 = packet_spectrum(&p2, &line);
    let combine = |x: &Spectrum, y: &Spectrum| Spectrum {
        values: x.values.iter().zip(&y.values).map(|(p, q)| a * p + b * q).collect(),
        ..x.clone()
    };
    let mix = combine(&f1, &f2);
    let opts = tight(&cfg.solver);
    let outs: Vec<_> = [&f1, &f2, &mix]
        .iter()
        .map(|f| compute_t_rplus(f, &model, &cut, &line, &lattice, &opts))
        .collect::<std::result::Result<_, _>>()?;
    let err_t = relative_l2(&combine(&outs[0].t_of_f, &outs[1].t_of_f), &outs[2].t_of_f);
    let err_r = relative_l2(&combine(&outs[0].rplus_of_f, &outs[1].rplus_of_f), &outs[2].rplus_of_f);
    let pass = err_t < v.linearity_tol && err_r < v.linearity_tol;
    Ok(result(
        pass,
        &json!({
            "seed": cfg.seed,
            "a": [a.re, a.im],
            "b": [b.re, b.im],
            "error_t": err_t,
            "error_r": err_r,
            "tol": v.linearity_tol,
        }),
    ))
}

/// Runs every configured campaign, writing `reports/<campaign>.json` and a
/// `reports/validate.json` summary. A campaign that errors is recorded as
/// incomplete and counts as a failure.
pub fn cmd_validate(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let mut summary = Vec::new();
    for &campaign in &cfg.validation.campaigns {
        let name = campaign.name();
        match run_campaign(cfg, campaign) {
            Ok(r) => {
                write_json(
                    &dir.reports().join(format!("{name}.json")),
                    &r.report,
                    &mut outcome.written,
                )?;
                if !r.pass {
                    outcome.failures.push(name.into());
                }
                summary.push(json!({ "campaign": name, "completed": true, "pass": r.pass }));
            }
            Err(e) => {
                outcome.failures.push(name.into());
                summary.push(json!({ "campaign": name, "completed": false, "pass": false, "error": e.to_string() }));
            }
        }
    }
    outcome.pass = outcome.failures.is_empty();
    let report = json!({ "name": cfg.name, "seed": cfg.seed, "pass": outcome.pass, "campaigns": summary });
    write_json(&dir.reports().join("validate.json"), &report, &mut outcome.written)?;
    Ok(outcome)
}
