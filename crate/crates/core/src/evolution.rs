//! The time-incremental scheme over a partition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    adhesive_energy_from_density, brittle_energy_from_set, dissipation, power_from_densities,
    EnergyBreakdown, Forcing, Mode,
};
use crate::error::{Error, Result};
use crate::geometry::{volume, BinaryField, GridSpec, PerimeterScheme};
use crate::grid_solver::{single_step, Certificate, SolveParams, StepProblem};
use crate::verify::DensityParams;

#[derive(Clone, Debug)]
pub struct Scenario {
    pub grid: GridSpec,
    /// `0 = t_0 < t_1 < ... < t_N = T`.
    pub times: Vec<f64>,
    pub mode: Mode,
    pub a: f64,
    pub initial: BinaryField,
    pub forcing: Forcing,
    pub scheme: PerimeterScheme,
    pub solver: SolveParams,
    /// Replace `Z_0` by the minimizer of the step problem at `t_0` before
    /// starting, so that the start is stable.
    pub stabilize_initial: bool,
}

/// `T * i / steps` for `i = 0..=steps`.
pub fn uniform_partition(t_end: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || steps == 0 {
        return Err(Error::param("time", "need T > 0 and at least one step"));
    }
    Ok((0..=steps).map(|i| t_end * i as f64 / steps as f64).collect())
}

impl Scenario {
    /// Checks the partition, parameters, brittle feasibility of the start and
    /// monotonicity of the forcing on the partition.
    pub fn validate(&self, allow_empty_initial: bool) -> Result<()> {
        self.grid.validate()?;
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::param("a", "must be positive"));
        }
        self.mode.validate()?;
        if self.times.len() < 2 || self.times[0] != 0.0 {
            return Err(Error::param("time", "partition must start at 0 and have a step"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("time", "partition must be strictly increasing"));
        }
        if self.initial.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if self.initial.is_empty_set() && !allow_empty_initial {
            return Err(Error::param("initial", "empty initial set must be flagged explicitly"));
        }
        self.forcing.validate_monotone(&self.times, &self.grid)?;
        if self.mode.is_brittle() {
            let overlap = self
                .initial
                .intersection(&self.forcing.open_set(self.times[0], &self.grid))?
                .count_ones();
            if overlap > 0 {
                return Err(Error::InfeasibleStart { cells: overlap });
            }
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: Mode) -> Scenario {
        Scenario {
            mode,
            ..self.clone()
        }
    }

    fn problem(&self, t: f64, prev: &BinaryField) -> Result<(StepProblem, Vec<f64>)> {
        let density = self.forcing.sample(t, &self.grid);
        let p = match self.mode {
            Mode::Adhesive { k } => StepProblem::adhesive(prev, &density, k, self.a, self.scheme)?,
            Mode::Brittle => {
                let forced = self.forcing.open_set(t, &self.grid);
                StepProblem::brittle(prev, &forced, self.a, self.scheme)?
            }
        };
        Ok((p, density))
    }

    fn energy_at(&self, t: f64, z: &BinaryField, density: &[f64]) -> EnergyBreakdown {
        match self.mode {
            Mode::Adhesive { k } => adhesive_energy_from_density(t, z, k, density, self.scheme),
            Mode::Brittle => {
                let forced = BinaryField::from_values(
                    &self.grid,
                    density.iter().map(|&f| (f > 0.0) as u8).collect(),
                )
                .expect("density has grid length");
                brittle_energy_from_set(t, z, &forced, self.scheme)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryStep {
    pub t: f64,
    pub mask: BinaryField,
    pub energy: EnergyBreakdown,
    /// Absent for the initial state unless it was stabilized.
    pub certificate: Option<Certificate>,
    /// Excess of the step value over the dual bound, `>= 0` up to rounding.
    pub slack: f64,
    /// Power over `[t_{i-1}, t_i]` evaluated on `Z_{i-1}` and on `Z_i`.
    pub power_prev: f64,
    pub power_next: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub a: f64,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.t).collect()
    }

    pub fn masks(&self) -> Vec<BinaryField> {
        self.steps.iter().map(|s| s.mask.clone()).collect()
    }

    pub fn energies(&self) -> Vec<EnergyBreakdown> {
        self.steps.iter().map(|s| s.energy).collect()
    }

    pub fn last(&self) -> &TrajectoryStep {
        self.steps.last().expect("trajectory is never empty")
    }

    fn locate(&self, t: f64) -> usize {
        self.steps.partition_point(|s| s.t < t)
    }

    /// Left-continuous piecewise-constant interpolant: `Z_i` on
    /// `(t_{i-1}, t_i]`.
    pub fn left(&self, t: f64) -> &BinaryField {
        let i = self.locate(t).min(self.steps.len() - 1);
        &self.steps[i].mask
    }

    /// Right-continuous piecewise-constant interpolant: `Z_{i-1}` on
    /// `[t_{i-1}, t_i)`.
    pub fn right(&self, t: f64) -> &BinaryField {
        let i = self.steps.partition_point(|s| s.t <= t);
        &self.steps[i.saturating_sub(1)].mask
    }

    /// Checks `Z_i ⊂ Z_{i-1}` for every step.
    pub fn check_monotone(&self) -> Result<()> {
        for (i, w) in self.steps.windows(2).enumerate() {
            if !w[1].mask.is_subset_of(&w[0].mask)? {
                return Err(Error::NonMonotoneTrajectory { step: i + 1 });
            }
        }
        Ok(())
    }
}

/// Runs the incremental scheme.
pub fn run(s: &Scenario) -> Result<Trajectory> {
    s.validate(true)?;
    let t0 = s.times[0];
    let (mut z0, mut cert0, mut slack0) = (s.initial.clone(), None, 0.0);
    if s.stabilize_initial {
        let (p, _) = s.problem(t0, &s.initial)?;
        let out = single_step(&p, &s.solver).map_err(|e| Error::Step {
            step: 0,
            time: t0,
            source: Box::new(e),
        })?;
        slack0 = (out.value - out.certificate.dual).max(0.0);
        z0 = out.mask;
        cert0 = Some(out.certificate);
    }
    let bound = s.a * volume(&z0);
    let mut density_prev = s.forcing.sample(t0, &s.grid);
    let mut steps = vec![TrajectoryStep {
        t: t0,
        energy: s.energy_at(t0, &z0, &density_prev),
        mask: z0,
        certificate: cert0,
        slack: slack0,
        power_prev: 0.0,
        power_next: 0.0,
    }];
    let mut cum = 0.0;
    let mut slack_total = slack0;
    for (i, &t) in s.times.iter().enumerate().skip(1) {
        let wrap = |e: Error| Error::Step {
            step: i,
            time: t,
            source: Box::new(e),
        };
        let prev = &steps[i - 1].mask;
        let (p, density) = s.problem(t, prev).map_err(wrap)?;
        let out = single_step(&p, &s.solver).map_err(wrap)?;
        let d = dissipation(prev, &out.mask, s.a)?;
        if !d.is_finite() {
            return Err(wrap(Error::NonMonotoneTrajectory { step: i }));
        }
        cum += d;
        let energy = s.energy_at(t, &out.mask, &density).with_dissipation(cum);
        let slack = (out.value - out.certificate.dual).max(0.0);
        slack_total += slack;
        if energy.total > bound + slack_total + 1e-8 {
            return Err(wrap(Error::UniformBound {
                time: t,
                energy: energy.total,
                bound,
            }));
        }
        let (power_prev, power_next) = match s.mode {
            Mode::Adhesive { k } => (
                power_from_densities(prev, k, &density_prev, &density),
                power_from_densities(&out.mask, k, &density_prev, &density),
            ),
            Mode::Brittle => (0.0, 0.0),
        };
        steps.push(TrajectoryStep {
            t,
            mask: out.mask,
            energy,
            certificate: Some(out.certificate),
            slack,
            power_prev,
            power_next,
        });
        density_prev = density;
    }
    Ok(Trajectory { a: s.a, steps })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtinctionReport {
    /// First partition time with empty set.
    pub extinction_time: Option<f64>,
    /// First partition time with `|F^c(t)| < frak_a R^2`.
    pub density_bound_time: Option<f64>,
    pub frak_a: f64,
    pub radius: f64,
    /// Extinction happened no later than the density bound predicts.
    pub consistent: bool,
}

pub fn detect_extinction(traj: &Trajectory, s: &Scenario, params: &DensityParams) -> ExtinctionReport {
    let extinction_time = traj
        .steps
        .iter()
        .find(|st| st.mask.is_empty_set())
        .map(|st| st.t);
    let threshold = params.frak_a * params.radius * params.radius;
    let density_bound_time = s.times.iter().copied().find(|&t| {
        let admissible = s.forcing.open_set(t, &s.grid).complement();
        volume(&admissible) < threshold
    });
    let consistent = match (density_bound_time, extinction_time) {
        (Some(tb), Some(te)) => te <= tb,
        (Some(_), None) => false,
        (None, _) => true,
    };
    ExtinctionReport {
        extinction_time,
        density_bound_time,
        frak_a: params.frak_a,
        radius: params.radius,
        consistent,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: f64,
    /// `k int f(t) z_k(t)` per partition time.
    pub penalty: Vec<f64>,
    /// Symmetric-difference volume to the brittle run per partition time.
    pub symdiff: Vec<f64>,
    /// Sum of the step powers on the left interpolant.
    pub integrated_power: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KSweepReport {
    pub times: Vec<f64>,
    pub rows: Vec<KSweepRow>,
    pub penalty_nonincreasing: bool,
    pub symdiff_nonincreasing: bool,
}

/// Runs the template once per `k` and once in brittle mode, and compares.
pub fn k_sweep(template: &Scenario, ks: &[f64]) -> Result<KSweepReport> {
    if ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("ks", "must be strictly ascending"));
    }
    let brittle = run(&template.with_mode(Mode::Brittle))?;
    let runs: Vec<Result<Trajectory>> = ks
        .par_iter()
        .map(|&k| run(&template.with_mode(Mode::Adhesive { k })))
        .collect();
    let mut rows = Vec::with_capacity(ks.len());
    for (&k, traj) in ks.iter().zip(runs) {
        let traj = traj?;
        let symdiff = traj
            .steps
            .iter()
            .zip(&brittle.steps)
            .map(|(a, b)| a.mask.symmetric_difference_volume(&b.mask))
            .collect::<Result<Vec<_>>>()?;
        rows.push(KSweepRow {
            k,
            penalty: traj.steps.iter().map(|s| s.energy.penalty).collect(),
            symdiff,
            integrated_power: traj.steps.iter().map(|s| s.power_next).sum(),
        });
    }
    let last = |v: &Vec<f64>| *v.last().expect("nonempty partition");
    let penalty_nonincreasing = rows
        .windows(2)
        .all(|w| last(&w[1].penalty) <= last(&w[0].penalty) + 1e-12);
    let symdiff_nonincreasing = rows
        .windows(2)
        .all(|w| last(&w[1].symdiff) <= last(&w[0].symdiff) + 1e-12);
    Ok(KSweepReport {
        times: template.times.clone(),
        rows,
        penalty_nonincreasing,
        symdiff_nonincreasing,
    })
}
