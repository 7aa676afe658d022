//! Dynamical and near-critical percolation under Poisson clocks.
//!
//! Every carrier rings at rate r. In `Resample` mode a ring redraws the
//! carrier's label uniformly on [0,1], so critical percolation is
//! stationary. In `OpenOnly` mode a ring redraws the label uniformly on
//! [0,1/2), forcing the carrier open at the critical level: started from a
//! critical configuration the open set grows monotonically and the open
//! density at time t is 1/2 + (1/2)(1 − e^{−rt}), i.e. drifts like t·r/2
//! for small rt (only the white half of the carriers has anything to gain
//! from a ring).
//!
//! Time is reported in units of 1/r throughout so runs at different meshes
//! are comparable.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{rng_from, sample_uniform, trial_seed, GenerationSpec, LabelField};
use crate::lattice::LatticeGraph;
use crate::percolation::{crossing_with, important_sites, Quad};

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SwitchMode {
    /// Ring resamples the label on [0,1]: dynamical percolation.
    Resample,
    /// Ring forces the carrier open at level 1/2: near-critical percolation.
    OpenOnly,
}

/// One Poisson switch.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub carrier: u32,
    pub time: f64,
    pub new_label: f64,
}

/// A sampled trajectory: initial field plus the time-ordered event log.
/// Any snapshot is reproducible from the pair.
#[derive(Clone, Debug)]
pub struct DynamicalRun {
    initial: LabelField,
    events: Vec<TrajectoryEvent>,
    mode: SwitchMode,
    rate: f64,
    horizon: f64,
    seed: u64,
}

impl DynamicalRun {
    pub fn initial(&self) -> &LabelField {
        &self.initial
    }

    pub fn events(&self) -> &[TrajectoryEvent] {
        &self.events
    }

    pub fn mode(&self) -> SwitchMode {
        self.mode
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The label field after applying all events up to and including t.
    pub fn snapshot(&self, t: f64) -> Result<LabelField> {
        self.snapshot_filtered(t, |_| true)
    }

    /// Snapshot applying only the switches of carriers accepted by the
    /// filter (the ε-important predictor of the stability experiment).
    pub fn snapshot_filtered(&self, t: f64, allow: impl Fn(u32) -> bool) -> Result<LabelField> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfBounds("snapshot time"));
        }
        let mut values = self.initial.values().to_vec();
        for ev in &self.events {
            if ev.time > t {
                break;
            }
            if allow(ev.carrier) {
                values[ev.carrier as usize] = ev.new_label;
            }
        }
        Ok(LabelField::from_values(
            self.initial.carrier_kind(),
            values,
            self.initial.seed(),
            GenerationSpec::Transformed,
        ))
    }

    /// Carriers switched at least once up to time t.
    pub fn switched_until(&self, t: f64) -> Vec<u32> {
        let mut hit = vec![false; self.initial.carrier_count()];
        for ev in &self.events {
            if ev.time > t {
                break;
            }
            hit[ev.carrier as usize] = true;
        }
        (0..hit.len() as u32).filter(|&c| hit[c as usize]).collect()
    }
}

/// Samples the event log: every carrier carries an independent Poisson clock
/// of the given rate on [0, horizon].
pub fn run_dynamics(
    initial: &LabelField,
    mode: SwitchMode,
    rate: f64,
    horizon: f64,
    seed: u64,
) -> Result<DynamicalRun> {
    if !(rate > 0.0) || !(horizon > 0.0) {
        return Err(Error::OutOfBounds("rate or horizon"));
    }
    let mut rng = rng_from(seed);
    let mut events = Vec::new();
    for carrier in 0..initial.carrier_count() as u32 {
        let mut t = 0.0;
        loop {
            let u: f64 = rng.gen();
            t += -(1.0 - u).ln() / rate;
            if t > horizon {
                break;
            }
            let draw: f64 = rng.gen();
            let new_label = match mode {
                SwitchMode::Resample => draw,
                SwitchMode::OpenOnly => draw * 0.5,
            };
            events.push(TrajectoryEvent { carrier, time: t, new_label });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.carrier.cmp(&b.carrier)));
    Ok(DynamicalRun {
        initial: initial.clone(),
        events,
        mode,
        rate,
        horizon,
        seed,
    })
}

/// One trial of the stability experiment, kept for records and replay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityTrial {
    pub trial: u64,
    pub field_seed: u64,
    pub clock_seed: u64,
    pub actual: bool,
    pub predicted: bool,
    pub switches: usize,
    pub important: usize,
}

/// Aggregate output of the stability experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eps: f64,
    pub t_units: f64,
    pub rate: f64,
    pub trials: u64,
    pub seed: u64,
    pub disagreement: f64,
    pub stderr: f64,
    pub records: Vec<StabilityTrial>,
}

/// Runs near-critical dynamics to time t (in units of 1/r) and compares the
/// true crossing state of the quad against the prediction that only applies
/// switches of carriers that were ε-important in the initial configuration.
pub fn stability_trial(
    g: &LatticeGraph,
    q: &Quad,
    eps: f64,
    t_units: f64,
    rate: f64,
    trial: u64,
    root_seed: u64,
) -> Result<StabilityTrial> {
    let field_seed = trial_seed(root_seed, 2 * trial);
    let clock_seed = trial_seed(root_seed, 2 * trial + 1);
    let f0 = sample_uniform(g, field_seed);
    let horizon = t_units / rate;
    let (actual, predicted, switches, important) = if t_units == 0.0 {
        let base = crossing_with(g, q, &|c| f0.open_at(c, 0.5));
        (base, base, 0, 0)
    } else {
        let run = run_dynamics(&f0, SwitchMode::OpenOnly, rate, horizon, clock_seed)?;
        let important = important_sites(g, &f0, 0.5, eps);
        let mut is_important = vec![false; f0.carrier_count()];
        for &c in &important {
            is_important[c] = true;
        }
        let full = run.snapshot(horizon)?;
        let pred_field = run.snapshot_filtered(horizon, |c| is_important[c as usize])?;
        (
            crossing_with(g, q, &|c| full.open_at(c, 0.5)),
            crossing_with(g, q, &|c| pred_field.open_at(c, 0.5)),
            run.switched_until(horizon).len(),
            important.len(),
        )
    };
    Ok(StabilityTrial {
        trial,
        field_seed,
        clock_seed,
        actual,
        predicted,
        switches,
        important,
    })
}

pub fn stability_experiment(
    g: &LatticeGraph,
    q: &Quad,
    eps: f64,
    t_units: f64,
    rate: f64,
    trials: u64,
    seed: u64,
) -> Result<StabilityReport> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::OutOfBounds("importance radius"));
    }
    let records: Result<Vec<StabilityTrial>> = (0..trials)
        .into_par_iter()
        .map(|i| stability_trial(g, q, eps, t_units, rate, i, seed))
        .collect();
    let records = records?;
    let disagree = records.iter().filter(|r| r.actual != r.predicted).count() as f64;
    let p_hat = disagree / trials as f64;
    Ok(StabilityReport {
        eps,
        t_units,
        rate,
        trials,
        seed,
        disagreement: p_hat,
        stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeKind, LatticeSpec};
    use crate::percolation::asymptotic_rate;

    fn square(n: u32) -> LatticeGraph {
        build_lattice(LatticeSpec::new(LatticeKind::SquareBond, n).unwrap())
    }

    fn density(f: &LabelField) -> f64 {
        f.values().iter().filter(|&&v| v <= 0.5).count() as f64 / f.carrier_count() as f64
    }

    #[test]
    fn zero_horizon_is_rejected_and_t0_is_initial() {
        let g = square(8);
        let f = sample_uniform(&g, 1);
        assert!(run_dynamics(&f, SwitchMode::Resample, 1.0, 0.0, 2).is_err());
        let run = run_dynamics(&f, SwitchMode::Resample, 1.0, 0.5, 2).unwrap();
        assert_eq!(run.snapshot(0.0).unwrap().values(), f.values());
        assert!(run.snapshot(0.6).is_err());
    }

    #[test]
    fn tiny_horizon_has_empty_log_with_high_probability() {
        let g = square(8);
        let f = sample_uniform(&g, 1);
        let run = run_dynamics(&f, SwitchMode::Resample, 1.0, 1e-9, 7).unwrap();
        assert!(run.events().is_empty());
        assert_eq!(run.snapshot(1e-9).unwrap().values(), f.values());
    }

    #[test]
    fn resample_mode_is_stationary() {
        let g = square(64);
        let f = sample_uniform(&g, 3);
        let run = run_dynamics(&f, SwitchMode::Resample, 1.0, 5.0, 11).unwrap();
        let d = density(&run.snapshot(5.0).unwrap());
        assert!((d - 0.5).abs() < 0.03, "density {d}");
    }

    #[test]
    fn open_only_density_drift() {
        // Small rt: the drift is t*r/2 up to O((rt)^2).
        let g = square(64);
        let f = sample_uniform(&g, 5);
        let rate = 0.05;
        let t = 2.0; // rt = 0.1
        let run = run_dynamics(&f, SwitchMode::OpenOnly, rate, t, 13).unwrap();
        let drift = density(&run.snapshot(t).unwrap()) - density(&f);
        let expected = t * rate / 2.0;
        let sigma = (0.05f64 * 0.95 / g.carrier_count() as f64).sqrt();
        assert!((drift - expected).abs() < 3.0 * sigma, "drift {drift} vs {expected}");
    }

    #[test]
    fn open_only_is_monotone() {
        let g = square(16);
        let f = sample_uniform(&g, 9);
        let run = run_dynamics(&f, SwitchMode::OpenOnly, 0.5, 4.0, 21).unwrap();
        let times = [0.0, 0.5, 1.3, 2.0, 3.1, 4.0];
        for w in times.windows(2) {
            let a = run.snapshot(w[0]).unwrap();
            let b = run.snapshot(w[1]).unwrap();
            for c in 0..a.carrier_count() {
                assert!(!(a.open_at(c, 0.5) && !b.open_at(c, 0.5)), "carrier closed again");
            }
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let g = square(12);
        let f = sample_uniform(&g, 2);
        let a = run_dynamics(&f, SwitchMode::Resample, 1.0, 2.0, 5).unwrap();
        let b = run_dynamics(&f, SwitchMode::Resample, 1.0, 2.0, 5).unwrap();
        assert_eq!(a.events(), b.events());
        let mut rng = rng_from(99);
        for _ in 0..100 {
            let t: f64 = rng.gen::<f64>() * 2.0;
            assert_eq!(a.snapshot(t).unwrap().values(), b.snapshot(t).unwrap().values());
        }
    }

    #[test]
    fn event_counts_follow_the_poisson_law() {
        let g = square(128); // 32512 carriers
        let f = sample_uniform(&g, 4);
        let rate = 1.0;
        let t = 2.0;
        let run = run_dynamics(&f, SwitchMode::Resample, rate, t, 31).unwrap();
        let mut counts = vec![0f64; f.carrier_count()];
        for ev in run.events() {
            counts[ev.carrier as usize] += 1.0;
        }
        let m = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / m;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (m - 1.0);
        let lambda = rate * t;
        // 3 sigma bands for the sample mean and sample variance of Poisson(2)
        let mean_tol = 3.0 * (lambda / m).sqrt();
        let var_tol = 3.0 * ((lambda * (1.0 + 3.0 * lambda) - lambda * lambda) / m).sqrt();
        assert!((mean - lambda).abs() < mean_tol, "mean {mean}");
        assert!((var - lambda).abs() < var_tol, "var {var}");
    }

    #[test]
    fn stability_at_t0_has_no_disagreement() {
        let g = square(16);
        let q = Quad::new(0.25, 0.25, 0.75, 0.75).unwrap();
        let rate = asymptotic_rate(g.spec().mesh());
        let rep = stability_experiment(&g, &q, 0.25, 0.0, rate, 50, 77).unwrap();
        assert_eq!(rep.disagreement, 0.0);
    }

    #[test]
    fn prediction_is_exact_when_all_switches_are_important() {
        // Conditional check: whenever the switch set happens to land inside
        // the important set, the predictor must agree exactly.
        let g = build_lattice(LatticeSpec::new(LatticeKind::TriangularSite, 16).unwrap());
        let q = Quad::new(0.25, 0.25, 0.75, 0.75).unwrap();
        let rate = asymptotic_rate(g.spec().mesh());
        let mut conditioned_with_switches = 0;
        for trial in 0..100 {
            let field_seed = trial_seed(123, 2 * trial);
            let clock_seed = trial_seed(123, 2 * trial + 1);
            let f0 = sample_uniform(&g, field_seed);
            let t_units = 0.004; // about one switch per trial on 256 carriers
            let run =
                run_dynamics(&f0, SwitchMode::OpenOnly, rate, t_units / rate, clock_seed).unwrap();
            let eps = 1.0 / 15.0;
            let important = important_sites(&g, &f0, 0.5, eps);
            let switched = run.switched_until(run.horizon());
            if switched.iter().all(|c| important.contains(&(*c as usize))) {
                if !switched.is_empty() {
                    conditioned_with_switches += 1;
                }
                let t = stability_trial(&g, &q, eps, t_units, rate, trial, 123).unwrap();
                assert_eq!(t.actual, t.predicted, "trial {trial}");
            }
        }
        assert!(conditioned_with_switches > 0, "no conditioned trials; weaken the setup");
    }
}
