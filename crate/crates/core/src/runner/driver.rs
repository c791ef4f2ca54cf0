//! The multistep run loop and the comparison harness.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::config::{Initial, Method, RunConfig};
use super::initial::{make_ab_flow, make_four_mode, make_random_flow};
use super::io::{
    num, read_checkpoint, read_field, write_checkpoint, write_field, Checkpoint, Table,
};
use crate::diagnostics::{
    clean_window_fit, coefficient_norm_probe, default_delta_window, energy, enstrophy,
    fit_analyticity_delta, max_discrepancy, radius_estimators, vorticity_spectrum, FitReport,
};
use crate::error::{Error, Result};
use crate::eulerian::{et_step, rk2_step, rk4_step, EulerianState};
use crate::interpolation::{cascade_revert, MonotonicityReport};
use crate::lagrangian::{build_stack_from_vorticity, evaluate_displacement, StepController};
use crate::spectral::{GridField, Spectral, SpectralField};

/// Relative tolerance for matching times.
pub const TIME_TOL: f64 = 1e-9;

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_TOL * a.abs().max(b.abs()).max(1.0)
}

/// One accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Time at the end of the step.
    pub t: f64,
    pub dt: f64,
    pub order: usize,
    /// `‖ξ⁽ˢ⁾‖ dtˢ` (CL only, else 0).
    pub truncation: f64,
    /// Minimum of `det(I + ∇ξ)` (CL only, else 1).
    pub min_jacobian: f64,
    /// `max |det(I + ∇ξ) - 1|` (CL only, else 0).
    pub incompressibility: f64,
    pub radius: Option<f64>,
    pub halvings: usize,
    /// Step shortened to land on an output time.
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusRecord {
    pub step: usize,
    pub t: f64,
    pub fit: FitReport,
    pub transition: Option<usize>,
    pub hadamard: f64,
    pub ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservationRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
}

/// Vorticity kept in memory at an output time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub omega: SpectralField,
    pub field: GridField,
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub config: RunConfig,
    pub final_state: EulerianState,
    pub steps: Vec<StepRecord>,
    pub radius: Vec<RadiusRecord>,
    pub conservation: Vec<ConservationRecord>,
    pub snapshots: Vec<Snapshot>,
    pub output_dir: Option<PathBuf>,
}

impl RunArtifacts {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| same_time(s.t, t))
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("runs always record a final snapshot")
    }
}

/// Zero-mean, dealiased spectrum of the configured initial vorticity.
pub fn initial_vorticity(cfg: &RunConfig, sp: &Spectral) -> Result<SpectralField> {
    let w = match &cfg.initial {
        Initial::FourMode => make_four_mode(cfg.n)?,
        Initial::Ab => make_ab_flow(cfg.n)?,
        Initial::Random { seed } => make_random_flow(cfg.n, *seed)?,
        Initial::File(path) => {
            let (g, _) = read_field(path)?;
            if g.n() != cfg.n {
                return Err(Error::ShapeMismatch {
                    left: cfg.n,
                    right: g.n(),
                });
            }
            if g.ncomp() != 1 {
                return Err(Error::Arity {
                    expected: 1,
                    got: g.ncomp(),
                });
            }
            sp.forward(&g)?
        }
    };
    Ok(project(sp, w))
}

/// Dealiases and removes the mean mode.
fn project(sp: &Spectral, mut w: SpectralField) -> SpectralField {
    sp.dealias_in_place(&mut w);
    w.component_mut(0)[0] = Complex64::default();
    w
}

/// Outcome of one Lagrangian (CL) step.
#[derive(Clone, Debug)]
pub struct ClStep {
    pub omega: SpectralField,
    pub record: StepRecord,
    pub radius: Option<RadiusRecord>,
}

/// Everything a CL step needs besides the vorticity.
#[derive(Clone, Copy, Debug)]
pub struct ClSettings {
    pub controller: StepController,
    pub radius_cadence: usize,
    pub radius_depth: usize,
    pub max_halvings: usize,
}

/// Advances `omega` by one CL step no longer than `limit`.
///
/// Builds the Taylor stack (deep enough for a radius fit on fit steps),
/// chooses `(S, dt)`, sums the displaced positions, reverts the carried
/// vorticity to the grid and retries with half the step on rejection.
pub fn cl_step(
    sp: &Spectral,
    omega: &SpectralField,
    settings: &ClSettings,
    fit: &mut Option<FitReport>,
    step: usize,
    t: f64,
    limit: f64,
) -> Result<ClStep> {
    let ctrl = &settings.controller;
    let fitting = step % settings.radius_cadence == 0;
    let mut order = ctrl.order(fit.as_ref());
    let depth = if fitting {
        settings.radius_depth.max(order)
    } else {
        order
    };
    let mut stack = build_stack_from_vorticity(sp, omega, depth)?;
    let mut radius = None;
    if fitting {
        if let Ok((f, transition)) = clean_window_fit(stack.norms()) {
            let clean = &stack.norms()[..f.window.1];
            let est = radius_estimators(clean)?;
            radius = Some(RadiusRecord {
                step,
                t,
                fit: f.clone(),
                transition,
                hadamard: est.hadamard,
                ratio: est.ratio,
            });
            *fit = Some(f);
        }
        order = ctrl.order(fit.as_ref());
    }
    if order > stack.order() {
        stack = build_stack_from_vorticity(sp, omega, order)?;
    }
    stack.truncate(order);

    let plan = ctrl.plan(stack.norms(), fit.as_ref(), limit)?;
    let mut dt = plan.dt;
    let clamped = dt >= limit;
    let mut last_report = MonotonicityReport::default();
    for halvings in 0..=settings.max_halvings {
        let state = match evaluate_displacement(sp, &stack, dt) {
            Ok(s) => s,
            Err(Error::StepTooLarge { .. }) => {
                dt *= 0.5;
                continue;
            }
            Err(e) => return Err(e),
        };
        let min_jac = state.min_jacobian().unwrap_or(1.0);
        if !(min_jac > 0.0) {
            last_report = MonotonicityReport {
                ok: false,
                vertical: Vec::new(),
                horizontal: Vec::new(),
            };
            dt *= 0.5;
            continue;
        }
        let grid = match cascade_revert(&state) {
            Ok(g) => g,
            Err(Error::Reversion(r)) => {
                last_report = r;
                dt *= 0.5;
                continue;
            }
            Err(e) => return Err(e),
        };
        let truncation = plan.truncation_term(stack.norms()) * (dt / plan.dt).powi(order as i32);
        if !(truncation < ctrl.epsilon) {
            return Err(Error::Internal(format!(
                "truncation term {truncation:e} violates epsilon {:e} at step {step}",
                ctrl.epsilon
            )));
        }
        let next = project(sp, sp.forward(&grid)?);
        return Ok(ClStep {
            omega: next,
            record: StepRecord {
                step: step + 1,
                t: t + dt,
                dt,
                order,
                truncation,
                min_jacobian: min_jac,
                incompressibility: state.incompressibility_residual().unwrap_or(0.0),
                radius: fit.as_ref().map(|f| f.radius),
                halvings,
                clamped: clamped && halvings == 0,
            },
            radius,
        });
    }
    Err(Error::Reversion(last_report))
}

struct Outputs<'a> {
    dir: Option<&'a Path>,
    fields: Table,
    field_index: usize,
}

impl Outputs<'_> {
    fn field(&mut self, t: f64, g: &GridField) -> Result<()> {
        if let Some(dir) = self.dir {
            let name = format!("omega_{:04}.field", self.field_index);
            write_field(&dir.join(&name), g, t)?;
            self.fields
                .push(vec![self.field_index.to_string(), t.to_string(), name]);
        }
        self.field_index += 1;
        Ok(())
    }
}

fn write_spectrum(dir: &Path, sp: &Spectral, omega: &SpectralField, step: usize) -> Result<()> {
    let spec = vorticity_spectrum(sp, omega)?;
    let window = default_delta_window(sp, &spec);
    let mut text = spec.to_csv();
    if let Ok(fitted) = fit_analyticity_delta(&spec, window) {
        text.push_str(&format!(
            "# delta={} exponent={} truncation_estimate={}\n",
            fitted.delta.unwrap_or(f64::NAN),
            fitted.exponent.unwrap_or(f64::NAN),
            fitted.truncation_estimate(sp.kmax()).unwrap_or(f64::NAN)
        ));
    }
    fs::write(dir.join(format!("spectrum_{step:06}.csv")), text)?;
    Ok(())
}

/// Runs the configured experiment; artifacts go to `output_dir` when given.
pub fn run(cfg: &RunConfig, output_dir: Option<&Path>) -> Result<RunArtifacts> {
    cfg.validate()?;
    if let Some(dir) = output_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.txt"), cfg.to_text())?;
    }
    let sp = Spectral::new(cfg.n)?;
    let (mut state, mut step, mut fit) = match &cfg.restart {
        Some(path) => {
            let cp = read_checkpoint(path)?;
            if cp.omega.n() != cfg.n {
                return Err(Error::ShapeMismatch {
                    left: cfg.n,
                    right: cp.omega.n(),
                });
            }
            let fit = cp.fit_report();
            (EulerianState::new(cp.omega, cp.t), cp.step, fit)
        }
        None => (
            EulerianState::new(initial_vorticity(cfg, &sp)?, 0.0),
            0,
            None,
        ),
    };
    let result = run_loop(cfg, &sp, output_dir, &mut state, &mut step, &mut fit);
    if let (Err(e), Some(dir)) = (&result, output_dir) {
        let _ = fs::write(
            dir.join("failure.txt"),
            format!("step = {step}\nt = {}\nerror = {e}\n", state.t),
        );
        let _ = write_checkpoint(
            &dir.join("failure_state.spec"),
            &Checkpoint {
                omega: state.omega.clone(),
                t: state.t,
                step,
                fit: fit
                    .as_ref()
                    .map(|f| (f.radius, f.alpha, f.beta, f.log_gamma)),
            },
        );
    }
    result
}

fn run_loop(
    cfg: &RunConfig,
    sp: &Spectral,
    dir: Option<&Path>,
    state: &mut EulerianState,
    step: &mut usize,
    fit: &mut Option<FitReport>,
) -> Result<RunArtifacts> {
    let mut targets: Vec<f64> = cfg
        .output_times
        .iter()
        .copied()
        .chain(std::iter::once(cfg.t_end))
        .filter(|&t| t > state.t && !same_time(t, state.t))
        .collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup_by(|a, b| same_time(*a, *b));

    let settings = ClSettings {
        controller: StepController::new(cfg.cl_order, cfg.epsilon, cfg.step_or_cap()),
        radius_cadence: cfg.radius_cadence,
        radius_depth: cfg.radius_depth,
        max_halvings: cfg.max_halvings,
    };
    let fixed_dt = cfg.step_or_cap();

    let mut out = Outputs {
        dir,
        fields: Table::new(&["index", "t", "file"]),
        field_index: 0,
    };
    let mut steps = Vec::new();
    let mut radius = Vec::new();
    let mut conservation = Vec::new();
    let mut snapshots = Vec::new();

    let conserve = |step: usize, st: &EulerianState| -> Result<ConservationRecord> {
        Ok(ConservationRecord {
            step,
            t: st.t,
            energy: energy(sp, &st.omega)?,
            enstrophy: enstrophy(&st.omega),
        })
    };
    let snapshot = |st: &EulerianState| -> Result<Snapshot> {
        Ok(Snapshot {
            t: st.t,
            omega: st.omega.clone(),
            field: sp.inverse(&st.omega)?,
        })
    };

    let first = snapshot(state)?;
    out.field(first.t, &first.field)?;
    snapshots.push(first);
    conservation.push(conserve(*step, state)?);

    for &target in &targets {
        while !same_time(state.t, target) && state.t < target {
            let limit = target - state.t;
            match cfg.method {
                Method::Cl => {
                    let res = cl_step(sp, &state.omega, &settings, fit, *step, state.t, limit)?;
                    if let Some(r) = res.radius {
                        radius.push(r);
                    }
                    *state = EulerianState::new(res.omega, res.record.t);
                    steps.push(res.record);
                }
                _ => {
                    let clamped = limit <= fixed_dt * (1.0 + 1e-6);
                    let dt = if clamped { limit } else { fixed_dt };
                    let next = match cfg.method {
                        Method::Rk2 => rk2_step(sp, state, dt)?,
                        Method::Rk4 => rk4_step(sp, state, dt)?,
                        _ => et_step(sp, state, dt, cfg.et_order)?,
                    };
                    *state = next;
                    steps.push(StepRecord {
                        step: *step + 1,
                        t: state.t,
                        dt,
                        order: if cfg.method == Method::Et {
                            cfg.et_order
                        } else {
                            0
                        },
                        truncation: 0.0,
                        min_jacobian: 1.0,
                        incompressibility: 0.0,
                        radius: None,
                        halvings: 0,
                        clamped: clamped && dt < fixed_dt * (1.0 - 1e-12),
                    });
                }
            }
            *step += 1;
            if same_time(state.t, target) {
                state.t = target;
            }
            let c = cfg.cadences;
            let due = |k: usize| k > 0 && *step % k == 0;
            if due(c.conservation) {
                conservation.push(conserve(*step, state)?);
            }
            if let Some(d) = dir {
                if due(c.fields) && !same_time(state.t, target) {
                    out.field(state.t, &sp.inverse(&state.omega)?)?;
                }
                if due(c.spectra) {
                    write_spectrum(d, sp, &state.omega, *step)?;
                }
                if due(c.norms) {
                    let probe = coefficient_norm_probe(sp, &state.omega, cfg.radius_depth)?;
                    fs::write(d.join(format!("norms_{:06}.csv", *step)), probe.to_csv())?;
                }
                if due(c.checkpoint) {
                    write_checkpoint(
                        &d.join(format!("checkpoint_{:06}.spec", *step)),
                        &checkpoint_of(state, *step, fit.as_ref()),
                    )?;
                }
            }
        }
        let snap = snapshot(state)?;
        out.field(snap.t, &snap.field)?;
        snapshots.push(snap);
    }
    if conservation.last().map(|c| c.step) != Some(*step) {
        conservation.push(conserve(*step, state)?);
    }

    let artifacts = RunArtifacts {
        config: cfg.clone(),
        final_state: state.clone(),
        steps,
        radius,
        conservation,
        snapshots,
        output_dir: dir.map(Path::to_path_buf),
    };
    if let Some(d) = dir {
        out.fields.write(&d.join("fields.csv"))?;
        steps_table(&artifacts.steps).write(&d.join("steps.csv"))?;
        radius_table(&artifacts.radius).write(&d.join("radius.csv"))?;
        conservation_table(&artifacts.conservation).write(&d.join("conservation.csv"))?;
        write_checkpoint(
            &d.join("final.spec"),
            &checkpoint_of(state, *step, fit.as_ref()),
        )?;
    }
    Ok(artifacts)
}

fn checkpoint_of(state: &EulerianState, step: usize, fit: Option<&FitReport>) -> Checkpoint {
    Checkpoint {
        omega: state.omega.clone(),
        t: state.t,
        step,
        fit: fit.map(|f| (f.radius, f.alpha, f.beta, f.log_gamma)),
    }
}

pub fn steps_table(steps: &[StepRecord]) -> Table {
    let mut t = Table::new(&[
        "step",
        "t",
        "dt",
        "order",
        "truncation",
        "min_jacobian",
        "incompressibility",
        "radius",
        "halvings",
        "clamped",
    ]);
    for s in steps {
        t.push(vec![
            s.step.to_string(),
            s.t.to_string(),
            s.dt.to_string(),
            s.order.to_string(),
            num(s.truncation),
            s.min_jacobian.to_string(),
            num(s.incompressibility),
            s.radius
                .map(|r| r.to_string())
                .unwrap_or_else(|| "none".into()),
            s.halvings.to_string(),
            s.clamped.to_string(),
        ]);
    }
    t
}

pub fn radius_table(records: &[RadiusRecord]) -> Table {
    let mut t = Table::new(&[
        "step",
        "t",
        "radius",
        "alpha",
        "beta",
        "log_gamma",
        "s_min",
        "s_max",
        "transition",
        "max_scaled_discrepancy",
        "hadamard",
        "ratio",
    ]);
    for r in records {
        t.push(vec![
            r.step.to_string(),
            r.t.to_string(),
            r.fit.radius.to_string(),
            r.fit.alpha.to_string(),
            r.fit.beta.to_string(),
            r.fit.log_gamma.to_string(),
            r.fit.window.0.to_string(),
            r.fit.window.1.to_string(),
            r.transition
                .map(|s| s.to_string())
                .unwrap_or_else(|| "none".into()),
            num(r.fit.max_scaled_discrepancy),
            r.hadamard.to_string(),
            r.ratio.to_string(),
        ]);
    }
    t
}

pub fn conservation_table(records: &[ConservationRecord]) -> Table {
    let mut t = Table::new(&[
        "step",
        "t",
        "energy",
        "enstrophy",
        "energy_rel_err",
        "enstrophy_rel_err",
    ]);
    let (e0, z0) = records
        .first()
        .map(|c| (c.energy, c.enstrophy))
        .unwrap_or((0.0, 0.0));
    let rel = |x: f64, x0: f64| if x0 != 0.0 { (x - x0) / x0 } else { x - x0 };
    for c in records {
        t.push(vec![
            c.step.to_string(),
            c.t.to_string(),
            c.energy.to_string(),
            c.enstrophy.to_string(),
            num(rel(c.energy, e0)),
            num(rel(c.enstrophy, z0)),
        ]);
    }
    t
}

/// Discrepancies between two runs at one output time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub max_discrepancy: f64,
    pub energy_rel_diff: f64,
    pub enstrophy_rel_diff: f64,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares snapshots taken at the same times.
pub fn compare_snapshots(
    sp: &Spectral,
    a: &[(f64, GridField)],
    b: &[(f64, GridField)],
) -> Result<Vec<CompareRow>> {
    if a.len() != b.len()
        || a.iter()
            .zip(b)
            .any(|((ta, _), (tb, _))| !same_time(*ta, *tb))
    {
        let times = |s: &[(f64, GridField)]| {
            s.iter()
                .map(|(t, _)| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        return Err(Error::TimeMismatch(format!(
            "[{}] vs [{}]",
            times(a),
            times(b)
        )));
    }
    a.iter()
        .zip(b)
        .map(|((t, fa), (_, fb))| {
            let d = max_discrepancy(fa, fb)?;
            if fa.n() != sp.n() {
                return Err(Error::ShapeMismatch {
                    left: sp.n(),
                    right: fa.n(),
                });
            }
            let wa = project(sp, sp.forward(fa)?);
            let wb = project(sp, sp.forward(fb)?);
            Ok(CompareRow {
                t: *t,
                max_discrepancy: d,
                energy_rel_diff: rel_diff(energy(sp, &wa)?, energy(sp, &wb)?),
                enstrophy_rel_diff: rel_diff(enstrophy(&wa), enstrophy(&wb)),
            })
        })
        .collect()
}

/// Compares two in-memory runs at their common snapshot times.
pub fn compare(a: &RunArtifacts, b: &RunArtifacts) -> Result<Vec<CompareRow>> {
    if a.config.n != b.config.n {
        return Err(Error::ShapeMismatch {
            left: a.config.n,
            right: b.config.n,
        });
    }
    let sp = Spectral::new(a.config.n)?;
    let pick = |r: &RunArtifacts| {
        r.snapshots
            .iter()
            .map(|s| (s.t, s.field.clone()))
            .collect::<Vec<_>>()
    };
    compare_snapshots(&sp, &pick(a), &pick(b))
}

fn load_fields(dir: &Path) -> Result<Vec<(f64, GridField)>> {
    let index = Table::read(&dir.join("fields.csv"))?;
    let file_col = index.column("file")?;
    index
        .rows
        .iter()
        .map(|r| {
            let (g, t) = read_field(&dir.join(&r[file_col]))?;
            Ok((t, g))
        })
        .collect()
}

/// Compares two output directories and returns the CSV table.
pub fn compare_dirs(a: &Path, b: &Path) -> Result<Table> {
    let fa = load_fields(a)?;
    let fb = load_fields(b)?;
    let n = fa.first().map(|(_, g)| g.n()).unwrap_or(0);
    let nb = fb.first().map(|(_, g)| g.n()).unwrap_or(0);
    if n != nb {
        return Err(Error::ShapeMismatch { left: n, right: nb });
    }
    let sp = Spectral::new(n)?;
    Ok(compare_table(&compare_snapshots(&sp, &fa, &fb)?))
}

pub fn compare_table(rows: &[CompareRow]) -> Table {
    let mut t = Table::new(&[
        "t",
        "max_discrepancy",
        "energy_rel_diff",
        "enstrophy_rel_diff",
    ]);
    for r in rows {
        t.push(vec![
            r.t.to_string(),
            num(r.max_discrepancy),
            num(r.energy_rel_diff),
            num(r.enstrophy_rel_diff),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_match_within_tolerance() {
        assert!(same_time(1.0, 1.0 + 1e-12));
        assert!(!same_time(1.0, 1.0 + 1e-6));
        assert!(same_time(0.0, 5e-10));
    }

    #[test]
    fn conservation_table_is_relative_to_the_first_row() {
        let rec = |step, e, z| ConservationRecord {
            step,
            t: step as f64,
            energy: e,
            enstrophy: z,
        };
        let t = conservation_table(&[rec(0, 2.0, 4.0), rec(1, 2.0, 3.0)]);
        let dz = t.f64_column("enstrophy_rel_err").unwrap();
        assert_eq!(dz, vec![0.0, -0.25]);
    }

    #[test]
    fn self_comparison_is_zero() {
        let sp = Spectral::new(16).unwrap();
        let g = sp.inverse(&make_four_mode(16).unwrap()).unwrap();
        let snaps = vec![(0.0, g.clone()), (0.5, g)];
        let rows = compare_snapshots(&sp, &snaps, &snaps).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.max_discrepancy == 0.0 && r.enstrophy_rel_diff == 0.0));
        assert!(matches!(
            compare_snapshots(&sp, &snaps, &snaps[..1]),
            Err(Error::TimeMismatch(_))
        ));
    }

    #[test]
    fn zero_flow_takes_the_cap() {
        let sp = Spectral::new(16).unwrap();
        let settings = ClSettings {
            controller: StepController::new(crate::lagrangian::OrderPolicy::Fixed(4), 1e-12, 0.3),
            radius_cadence: 10,
            radius_depth: 12,
            max_halvings: 5,
        };
        let mut fit = None;
        let zero = SpectralField::zeros(16, 1);
        let step = cl_step(&sp, &zero, &settings, &mut fit, 0, 0.0, 1.0).unwrap();
        assert_eq!(step.record.dt, 0.3);
        assert_eq!(step.omega, zero);
        assert!(fit.is_none());
    }
}
