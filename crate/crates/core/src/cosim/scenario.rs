use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CosimError;
use crate::grid::{BusId, BusKind, GeneratorKind, NetworkModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BranchFault,
    BranchTrip,
    BusFault,
    BusTrip,
    GenTrip,
    ForcedOscillation,
    /// No disturbance; used to check equilibrium persistence.
    Null,
}

impl EventKind {
    pub const DISTURBANCES: [EventKind; 6] = [
        EventKind::BranchFault,
        EventKind::BranchTrip,
        EventKind::BusFault,
        EventKind::BusTrip,
        EventKind::GenTrip,
        EventKind::ForcedOscillation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::BranchFault => "branch_fault",
            EventKind::BranchTrip => "branch_trip",
            EventKind::BusFault => "bus_fault",
            EventKind::BusTrip => "bus_trip",
            EventKind::GenTrip => "gen_trip",
            EventKind::ForcedOscillation => "forced_oscillation",
            EventKind::Null => "null",
        }
    }

    pub fn is_fault(self) -> bool {
        matches!(self, EventKind::BranchFault | EventKind::BusFault)
    }

    /// Output folder of the published dataset layout.
    pub fn folder(self) -> &'static str {
        if self == EventKind::ForcedOscillation {
            "forced_oscillation"
        } else {
            "natural_oscillation"
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::DISTURBANCES
            .into_iter()
            .chain([EventKind::Null])
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

/// Element a disturbance acts on; branches and generators by index into
/// the network model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    None,
    Bus(BusId),
    Branch(usize),
    Generator(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventParams {
    /// Shunt admittance applied by faults, per-unit.
    pub fault_admittance: Complex64,
    /// Forced-oscillation amplitude on the governor reference, per-unit.
    pub amplitude: f64,
    /// Forced-oscillation frequency, Hz.
    pub frequency: f64,
}

impl Default for EventParams {
    fn default() -> Self {
        EventParams {
            fault_admittance: Complex64::new(0.0, -1e4),
            amplitude: 0.0,
            frequency: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: EventKind,
    pub target: Target,
    pub t_on: f64,
    pub t_clear: Option<f64>,
    pub params: EventParams,
    pub duration: f64,
    pub sample_rate: f64,
    pub seed: u64,
    pub operating_point: Option<NaiveDateTime>,
}

impl ScenarioSpec {
    fn base(kind: EventKind, target: Target, t_on: f64) -> Self {
        ScenarioSpec {
            kind,
            target,
            t_on,
            t_clear: None,
            params: EventParams::default(),
            duration: 4.0,
            sample_rate: 240.0,
            seed: 0,
            operating_point: None,
        }
    }

    pub fn null(duration: f64) -> Self {
        ScenarioSpec {
            duration,
            ..Self::base(EventKind::Null, Target::None, 0.0)
        }
    }

    pub fn bus_fault(bus: BusId, t_on: f64, t_clear: f64) -> Self {
        ScenarioSpec {
            t_clear: Some(t_clear),
            ..Self::base(EventKind::BusFault, Target::Bus(bus), t_on)
        }
    }

    pub fn branch_fault(branch: usize, t_on: f64, t_clear: f64) -> Self {
        ScenarioSpec {
            t_clear: Some(t_clear),
            ..Self::base(EventKind::BranchFault, Target::Branch(branch), t_on)
        }
    }

    pub fn branch_trip(branch: usize, t_on: f64) -> Self {
        Self::base(EventKind::BranchTrip, Target::Branch(branch), t_on)
    }

    pub fn bus_trip(bus: BusId, t_on: f64) -> Self {
        Self::base(EventKind::BusTrip, Target::Bus(bus), t_on)
    }

    pub fn gen_trip(gen: usize, t_on: f64) -> Self {
        Self::base(EventKind::GenTrip, Target::Generator(gen), t_on)
    }

    pub fn forced_oscillation(gen: usize, t_on: f64, amplitude: f64, frequency: f64) -> Self {
        ScenarioSpec {
            params: EventParams {
                amplitude,
                frequency,
                ..EventParams::default()
            },
            ..Self::base(EventKind::ForcedOscillation, Target::Generator(gen), t_on)
        }
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn n_rows(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Event kind and the bus nearest the disturbance: the bus itself, the
    /// from-bus of a branch, or the generator's bus.
    pub fn label(&self, net: &NetworkModel) -> (EventKind, BusId) {
        let bus = match self.target {
            Target::None => net.buses[net.slack_index()].id,
            Target::Bus(b) => b,
            Target::Branch(k) => net.branches[k].from,
            Target::Generator(g) => net.generators[g].bus,
        };
        (self.kind, bus)
    }

    pub fn validate(&self, net: &NetworkModel) -> Result<(), CosimError> {
        let bad = |m: String| Err(CosimError::InvalidScenario(m));
        if !(self.sample_rate > 0.0 && self.duration > 0.0) {
            return bad("duration and sample rate must be positive".into());
        }
        if (self.duration * self.sample_rate - self.n_rows() as f64).abs() > 1e-9 {
            return bad("duration × sample_rate must be a whole number of rows".into());
        }
        if self.kind != EventKind::Null && !(self.t_on > 0.0 && self.t_on < self.duration) {
            return bad(format!("t_on {} outside (0, {})", self.t_on, self.duration));
        }
        match (self.kind.is_fault(), self.t_clear) {
            (true, Some(tc)) if tc > self.t_on && tc <= self.duration => {}
            (true, _) => return bad("faults need t_on < t_clear <= duration".into()),
            (false, Some(_)) => return bad(format!("{} takes no clear time", self.kind)),
            (false, None) => {}
        }
        let ok = match (self.kind, self.target) {
            (EventKind::Null, Target::None) => true,
            (EventKind::BusFault, Target::Bus(b)) => net.bus_index(b).is_some(),
            (EventKind::BusTrip, Target::Bus(b)) => eligible_bus_trips(net).contains(&b),
            (EventKind::BranchFault, Target::Branch(k)) => {
                net.branches.get(k).is_some_and(|b| b.in_service())
            }
            (EventKind::BranchTrip, Target::Branch(k)) => eligible_branch_trips(net).contains(&k),
            (EventKind::GenTrip, Target::Generator(g)) => eligible_gen_trips(net).contains(&g),
            (EventKind::ForcedOscillation, Target::Generator(g)) => net
                .generators
                .get(g)
                .is_some_and(|x| x.kind == GeneratorKind::Thermal),
            _ => false,
        };
        if !ok {
            return bad(format!("target {:?} not eligible for {}", self.target, self.kind));
        }
        Ok(())
    }
}

/// Load buses without generation or feeders whose loss keeps the rest of
/// the grid connected.
pub fn eligible_bus_trips(net: &NetworkModel) -> Vec<BusId> {
    net.buses
        .iter()
        .filter(|b| b.kind == BusKind::Load)
        .filter(|b| !net.generators.iter().any(|g| g.bus == b.id))
        .filter(|b| !net.feeders.iter().any(|f| f.coupling_bus == b.id))
        .filter(|b| net.is_connected(&[], &[net.bus_index(b.id).unwrap()]))
        .map(|b| b.id)
        .collect()
}

/// In-service branches that are not bridges.
pub fn eligible_branch_trips(net: &NetworkModel) -> Vec<usize> {
    (0..net.branches.len())
        .filter(|&k| net.branches[k].in_service() && net.is_connected(&[k], &[]))
        .collect()
}

/// Thermal units, provided at least one other thermal unit remains.
pub fn eligible_gen_trips(net: &NetworkModel) -> Vec<usize> {
    let thermal: Vec<usize> = (0..net.generators.len())
        .filter(|&g| net.generators[g].kind == GeneratorKind::Thermal)
        .collect();
    if thermal.len() < 2 {
        Vec::new()
    } else {
        thermal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindWeights(pub Vec<(EventKind, f64)>);

impl KindWeights {
    pub fn uniform() -> Self {
        KindWeights(EventKind::DISTURBANCES.iter().map(|&k| (k, 1.0 / 6.0)).collect())
    }

    pub fn only(kind: EventKind) -> Self {
        KindWeights(vec![(kind, 1.0)])
    }

    fn check(&self) -> Result<(), CosimError> {
        let total: f64 = self.0.iter().map(|(_, w)| w).sum();
        if self.0.is_empty() || self.0.iter().any(|(_, w)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-6 {
            return Err(CosimError::InvalidScenario(format!(
                "kind weights must be non-negative and sum to 1, got {total}"
            )));
        }
        if self.0.iter().any(|(k, _)| *k == EventKind::Null) {
            return Err(CosimError::InvalidScenario("null is not a sampled kind".into()));
        }
        Ok(())
    }
}

impl FromStr for KindWeights {
    type Err = String;

    /// `kind=weight` pairs separated by commas, e.g. `bus_fault=0.5,gen_trip=0.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|pair| {
                let (k, w) = pair
                    .split_once('=')
                    .ok_or_else(|| format!("expected kind=weight, got {pair:?}"))?;
                let w: f64 = w.trim().parse().map_err(|_| format!("bad weight in {pair:?}"))?;
                Ok((k.parse()?, w))
            })
            .collect::<Result<Vec<_>, String>>()
            .map(KindWeights)
    }
}

/// Draws one disturbance: kind by weight, target uniform over eligible
/// elements, t_on in [0.5, 1.5] s, fault duration in [0.05, 0.2] s,
/// oscillation 0.1–2 Hz at 0.02–0.1 pu.
pub fn sample_scenario(
    net: &NetworkModel,
    seed: u64,
    weights: &KindWeights,
) -> Result<ScenarioSpec, CosimError> {
    weights.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = WeightedIndex::new(weights.0.iter().map(|(_, w)| *w))
        .map_err(|e| CosimError::InvalidScenario(e.to_string()))?;
    let kind = weights.0[dist.sample(&mut rng)].0;
    let t_on = rng.random_range(0.5..=1.5);

    let pick = |rng: &mut ChaCha8Rng, n: usize| -> Result<usize, CosimError> {
        if n == 0 {
            Err(CosimError::NoEligibleTarget(kind.to_string()))
        } else {
            Ok(rng.random_range(0..n))
        }
    };
    let mut spec = match kind {
        EventKind::BusFault => {
            let b = pick(&mut rng, net.buses.len())?;
            let tc = t_on + rng.random_range(0.05..=0.2);
            ScenarioSpec::bus_fault(net.buses[b].id, t_on, tc)
        }
        EventKind::BranchFault => {
            let live: Vec<usize> = (0..net.branches.len())
                .filter(|&k| net.branches[k].in_service())
                .collect();
            let k = live[pick(&mut rng, live.len())?];
            let tc = t_on + rng.random_range(0.05..=0.2);
            ScenarioSpec::branch_fault(k, t_on, tc)
        }
        EventKind::BranchTrip => {
            let c = eligible_branch_trips(net);
            ScenarioSpec::branch_trip(c[pick(&mut rng, c.len())?], t_on)
        }
        EventKind::BusTrip => {
            let c = eligible_bus_trips(net);
            ScenarioSpec::bus_trip(c[pick(&mut rng, c.len())?], t_on)
        }
        EventKind::GenTrip => {
            let c = eligible_gen_trips(net);
            ScenarioSpec::gen_trip(c[pick(&mut rng, c.len())?], t_on)
        }
        EventKind::ForcedOscillation => {
            let c: Vec<usize> = net
                .generators
                .iter()
                .enumerate()
                .filter(|(_, g)| g.kind == GeneratorKind::Thermal)
                .map(|(i, _)| i)
                .collect();
            let g = c[pick(&mut rng, c.len())?];
            let f = rng.random_range(0.1..=2.0);
            let a = rng.random_range(0.02..=0.1);
            ScenarioSpec::forced_oscillation(g, t_on, a, f)
        }
        EventKind::Null => unreachable!("rejected by check"),
    };
    spec.seed = seed;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::t23like;
    use std::collections::HashMap;

    #[test]
    fn same_seed_same_spec() {
        let net = t23like();
        let w = KindWeights::uniform();
        assert_eq!(
            sample_scenario(&net, 11, &w).unwrap(),
            sample_scenario(&net, 11, &w).unwrap()
        );
    }

    #[test]
    fn uniform_weights_within_three_sigma() {
        let net = t23like();
        let w = KindWeights::uniform();
        let mut counts: HashMap<EventKind, usize> = HashMap::new();
        for seed in 0..6000 {
            let s = sample_scenario(&net, seed, &w).unwrap();
            s.validate(&net).unwrap();
            *counts.entry(s.kind).or_default() += 1;
        }
        let sigma = (6000.0f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for k in EventKind::DISTURBANCES {
            let c = counts[&k] as f64;
            assert!((c - 1000.0).abs() <= 3.0 * sigma, "{k}: {c}");
        }
    }

    #[test]
    fn single_kind_weights() {
        let net = t23like();
        let w = KindWeights::only(EventKind::BusFault);
        for seed in 0..50 {
            let s = sample_scenario(&net, seed, &w).unwrap();
            assert_eq!(s.kind, EventKind::BusFault);
            let tc = s.t_clear.unwrap();
            assert!((0.5..=1.5).contains(&s.t_on) && (0.05..=0.2 + 1e-12).contains(&(tc - s.t_on)));
        }
    }

    #[test]
    fn one_thermal_unit_cannot_trip() {
        let mut net = t23like();
        let keep = net.slack_index();
        let slack_bus = net.buses[keep].id;
        net.generators
            .retain(|g| g.bus == slack_bus || g.kind == GeneratorKind::Wind);
        for b in &mut net.buses {
            if b.kind == BusKind::Generator && !net.generators.iter().any(|g| g.bus == b.id) {
                b.kind = BusKind::Load;
                b.v_setpoint = None;
            }
        }
        let err = sample_scenario(&net, 1, &KindWeights::only(EventKind::GenTrip)).unwrap_err();
        assert!(matches!(err, CosimError::NoEligibleTarget(_)));
    }

    #[test]
    fn trips_avoid_islanding() {
        let net = t23like();
        for k in eligible_branch_trips(&net) {
            assert!(net.is_connected(&[k], &[]));
        }
        // Generator step-up transformers are bridges.
        let gsu = net
            .branches
            .iter()
            .position(|b| b.from == 101 && b.to == 151)
            .unwrap();
        assert!(!eligible_branch_trips(&net).contains(&gsu));
        assert!(!eligible_bus_trips(&net).is_empty());
    }

    #[test]
    fn weights_parse_and_check() {
        let w: KindWeights = "bus_fault=0.5, gen_trip=0.5".parse().unwrap();
        assert_eq!(w.0.len(), 2);
        assert!(w.check().is_ok());
        let bad: KindWeights = "bus_fault=0.5".parse().unwrap();
        assert!(bad.check().is_err());
        assert!("warp=1".parse::<KindWeights>().is_err());
    }
}
