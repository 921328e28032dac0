use chrono::{Duration, NaiveDateTime};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{thermal_dispatch, CosimError, Injections, ProfileBindings};
use crate::grid::{build_ybus, NetworkModel};
use crate::powerflow::{
    feeder_as_load, solve_feeder_dispatch, solve_problem, FeederSolution, PfOptions, PfProblem, PfSolution,
};
use crate::profiles::{format_time, ProfileSet};
use crate::records::{pf_channel_names, ChannelFrame, TimeAxis};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdOptions {
    pub eps: f64,
    pub max_outer: usize,
    pub pf: PfOptions,
    pub feeder: PfOptions,
}

impl Default for TdOptions {
    fn default() -> Self {
        TdOptions {
            eps: 1e-6,
            max_outer: 30,
            pf: PfOptions::default(),
            feeder: PfOptions::feeder(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdSolution {
    pub pf: PfSolution,
    /// Feeder solutions at the final boundary voltages.
    pub feeders: Vec<FeederSolution>,
    /// Equivalent load (P, Q) injected at each coupling bus in the final
    /// transmission solve.
    pub injected: Vec<(f64, f64)>,
    pub iterations: usize,
    /// ‖V^n − V^{n−1}‖₂ over all buses, one entry per transmission solve.
    pub history: Vec<f64>,
    pub gen_p: Vec<f64>,
    pub problem: PfProblem,
}

impl TdSolution {
    /// Largest |injected − feeder total| over feeders and P/Q.
    pub fn boundary_mismatch(&self) -> f64 {
        self.feeders
            .iter()
            .zip(&self.injected)
            .map(|(f, &(p, q))| (f.total_p - p).abs().max((f.total_q - q).abs()))
            .fold(0.0, f64::max)
    }
}

/// Alternates feeder sweeps at the boundary voltages with transmission
/// Newton solves carrying the feeder totals as loads, until the bus voltages
/// and the boundary powers both move by at most `eps`.
pub fn iterate_td_powerflow(
    net: &NetworkModel,
    inj: &Injections,
    opts: &TdOptions,
) -> Result<TdSolution, CosimError> {
    let ybus = build_ybus(net);
    let gen_p = thermal_dispatch(net, inj);
    let base = PfProblem::build(net, &gen_p, &inj.load_scale);
    let coupling: Vec<usize> = net
        .feeders
        .iter()
        .map(|f| net.bus_index(f.coupling_bus).unwrap())
        .collect();

    let mut v_prev = base.flat_start();
    let mut history = Vec::new();
    let mut last: Option<(PfSolution, Vec<(f64, f64)>, PfProblem)> = None;
    let mut warm: Vec<Option<FeederSolution>> = vec![None; net.feeders.len()];
    loop {
        let mut sols = Vec::with_capacity(net.feeders.len());
        for (k, f) in net.feeders.iter().enumerate() {
            let sol = solve_feeder_dispatch(
                f,
                &inj.feeders[k],
                v_prev[coupling[k]],
                &opts.feeder,
                warm[k].as_ref(),
            )
            .map_err(|source| CosimError::Feeder {
                bus: f.coupling_bus,
                source,
            })?;
            sols.push(sol);
        }
        let pq: Vec<(f64, f64)> = sols.iter().map(feeder_as_load).collect();

        if let Some((pf, injected, problem)) = &last {
            let dv = *history.last().unwrap();
            let dpq = pq
                .iter()
                .zip(injected)
                .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
                .fold(0.0, f64::max);
            if dv <= opts.eps && dpq <= opts.eps {
                return Ok(TdSolution {
                    pf: pf.clone(),
                    feeders: sols,
                    injected: injected.clone(),
                    iterations: history.len(),
                    history,
                    gen_p,
                    problem: problem.clone(),
                });
            }
        }
        if history.len() >= opts.max_outer {
            return Err(CosimError::OuterNoConvergence { history });
        }

        let mut prob = base.clone();
        for (k, &(p, q)) in pq.iter().enumerate() {
            prob.add_load(coupling[k], Complex64::new(p, q));
        }
        let start = last.as_ref().map(|(pf, _, _)| pf.voltages());
        let pf =
            solve_problem(net, &ybus, &prob, start.as_deref(), &opts.pf).map_err(CosimError::Transmission)?;
        let v = pf.voltages();
        history.push(
            v.iter()
                .zip(&v_prev)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt(),
        );
        v_prev = v;
        warm = sols.into_iter().map(Some).collect();
        last = Some((pf, pq, prob));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyRunConfig {
    pub start: NaiveDateTime,
    /// Exclusive end of the run.
    pub end: NaiveDateTime,
    pub bindings: ProfileBindings,
    pub td: TdOptions,
    /// Extra multiplier on every load, 1.0 for normal runs.
    pub load_multiplier: f64,
}

impl SteadyRunConfig {
    pub fn new(start: NaiveDateTime, end: NaiveDateTime) -> Self {
        SteadyRunConfig {
            start,
            end,
            bindings: ProfileBindings::uniform(0),
            td: TdOptions::default(),
            load_multiplier: 1.0,
        }
    }

    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        let n = (self.end - self.start).num_minutes().max(0);
        (0..n).map(|m| self.start + Duration::minutes(m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadySeries {
    pub frame: ChannelFrame,
    /// One line per minute describing the profile inputs.
    pub inputs: Vec<String>,
    pub outer_iterations: Vec<usize>,
    pub boundary_mismatch: Vec<f64>,
}

/// Solves every minute in `[start, end)` independently and assembles the
/// `time, Vm_*, Va_*, P_*, Q_*` frame in time order.
pub fn run_steady_series(
    net: &NetworkModel,
    profiles: &ProfileSet,
    cfg: &SteadyRunConfig,
) -> Result<SteadySeries, CosimError> {
    if cfg.start >= cfg.end {
        return Err(CosimError::InvalidScenario("steady run needs start < end".into()));
    }
    let times = cfg.timestamps();
    let solved: Vec<Result<(TdSolution, String), CosimError>> = times
        .par_iter()
        .map(|&t| {
            let wrap = |e: CosimError| CosimError::AtTime {
                time: t,
                source: Box::new(e),
            };
            let inj = Injections::from_profiles(net, profiles, &cfg.bindings, t)
                .map_err(|e| wrap(e.into()))?
                .scale_loads(cfg.load_multiplier);
            let sol = iterate_td_powerflow(net, &inj, &cfg.td).map_err(wrap)?;
            Ok((sol, format!("{} {}", format_time(&t), inj.describe())))
        })
        .collect();

    let n_ch = pf_channel_names(net).len();
    let mut cols = vec![Vec::with_capacity(times.len()); n_ch];
    let mut series = SteadySeries {
        frame: ChannelFrame::new(TimeAxis::Minutes(Vec::new()))?,
        inputs: Vec::with_capacity(times.len()),
        outer_iterations: Vec::with_capacity(times.len()),
        boundary_mismatch: Vec::with_capacity(times.len()),
    };
    for r in solved {
        let (sol, line) = r?;
        let mut k = 0;
        for i in 0..net.n_buses() {
            cols[k].push(sol.pf.vm[i]);
            cols[k + 1].push(sol.pf.va[i]);
            k += 2;
        }
        for b in 0..net.branches.len() {
            cols[k].push(sol.pf.branch_p[b]);
            cols[k + 1].push(sol.pf.branch_q[b]);
            k += 2;
        }
        series.outer_iterations.push(sol.iterations);
        series.boundary_mismatch.push(sol.boundary_mismatch());
        series.inputs.push(line);
    }
    series.frame = ChannelFrame::from_columns(TimeAxis::Minutes(times), pf_channel_names(net), cols)?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::t23like;
    use crate::powerflow::solve_feeder_dispatch;
    use crate::profiles::{synth_zone, SyntheticZone, Tone};

    fn zero_feeders() -> NetworkModel {
        let mut net = t23like();
        for f in &mut net.feeders {
            f.loads.clear();
        }
        net
    }

    #[test]
    fn decoupled_feeders_converge_in_two() {
        let net = zero_feeders();
        let sol = iterate_td_powerflow(&net, &Injections::base(&net), &TdOptions::default()).unwrap();
        assert!(sol.iterations <= 2, "{:?}", sol.history);
        for f in &sol.feeders {
            assert_eq!((f.total_p, f.total_q), (0.0, 0.0));
        }
    }

    #[test]
    fn injected_load_matches_feeder_resolve() {
        let net = t23like();
        let inj = Injections::base(&net);
        let opts = TdOptions::default();
        let sol = iterate_td_powerflow(&net, &inj, &opts).unwrap();
        for (k, f) in net.feeders.iter().enumerate() {
            let bus = net.bus_index(f.coupling_bus).unwrap();
            let again = solve_feeder_dispatch(
                f,
                &inj.feeders[k],
                sol.pf.voltage(bus),
                &PfOptions::feeder(),
                None,
            )
            .unwrap();
            let (p, q) = sol.injected[k];
            assert!((again.total_p - p).abs() <= opts.eps && (again.total_q - q).abs() <= opts.eps);
        }
        assert!(sol.boundary_mismatch() <= opts.eps);
        // History is non-increasing after the second iteration.
        assert!(
            sol.history.windows(2).skip(1).all(|w| w[1] <= w[0]),
            "{:?}",
            sol.history
        );
    }

    #[test]
    fn tiny_eps_exhausts_budget() {
        let net = t23like();
        let opts = TdOptions {
            eps: 1e-16,
            max_outer: 3,
            ..TdOptions::default()
        };
        match iterate_td_powerflow(&net, &Injections::base(&net), &opts) {
            Err(CosimError::OuterNoConvergence { history }) => assert_eq!(history.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    fn run(zone: SyntheticZone, minutes: i64) -> SteadySeries {
        let net = t23like();
        let start = zone.start;
        let set = ProfileSet::new(vec![synth_zone(&zone)]).unwrap();
        let cfg = SteadyRunConfig::new(start, start + Duration::minutes(minutes));
        run_steady_series(&net, &set, &cfg).unwrap()
    }

    #[test]
    fn constant_profile_gives_identical_rows() {
        let zone = SyntheticZone {
            minutes: 10,
            tones: vec![],
            noise_std: 0.0,
            renewables: false,
            ..Default::default()
        };
        let s = run(zone, 10);
        assert_eq!(s.frame.n_rows(), 10);
        for col in s.frame.columns() {
            assert!(col.iter().all(|&x| x == col[0]));
        }
        assert_eq!(s.frame.names()[0], "Vm_101");
    }

    #[test]
    fn load_bus_voltage_tracks_load_inversely() {
        let zone = SyntheticZone {
            minutes: 1440,
            tones: vec![Tone {
                period_hours: 24.0,
                amplitude: 0.2,
                phase: 0.0,
            }],
            noise_std: 0.0,
            renewables: false,
            ..Default::default()
        };
        let load = synth_zone(&zone).load_power;
        let s = run(zone, 1440);
        let vm = s.frame.channel("Vm_154").unwrap();
        let r = pearson(&load, vm);
        assert!(r < -0.9, "{r}");
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn missing_minute_is_profile_gap() {
        let net = t23like();
        let zone = SyntheticZone {
            minutes: 5,
            ..Default::default()
        };
        let set = ProfileSet::new(vec![synth_zone(&zone)]).unwrap();
        let cfg = SteadyRunConfig::new(zone.start, zone.start + Duration::minutes(6));
        match run_steady_series(&net, &set, &cfg) {
            Err(CosimError::AtTime { source, .. }) => {
                assert!(matches!(
                    *source,
                    CosimError::Profile(crate::profiles::ProfileError::ProfileGap(_))
                ))
            }
            other => panic!("{other:?}"),
        }
    }
}
