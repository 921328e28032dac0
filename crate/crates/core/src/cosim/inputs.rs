use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::grid::{BusId, GeneratorKind, NetworkModel};
use crate::powerflow::FeederDispatch;
use crate::profiles::{ProfileError, ProfileSample, ProfileSet};

/// Which profile zone drives each element. Elements not listed use
/// `default_zone`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProfileBindings {
    pub default_zone: usize,
    #[serde(default)]
    pub load_zones: Vec<(BusId, usize)>,
    pub wind_zone: Option<usize>,
    pub pv_zone: Option<usize>,
}

impl ProfileBindings {
    pub fn uniform(zone: usize) -> Self {
        ProfileBindings {
            default_zone: zone,
            ..Default::default()
        }
    }

    fn load_zone(&self, bus: BusId) -> usize {
        self.load_zones
            .iter()
            .find(|(b, _)| *b == bus)
            .map_or(self.default_zone, |(_, z)| *z)
    }
}

/// Everything time-varying at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Injections {
    /// Multiplier per lumped load, in `net.loads` order.
    pub load_scale: Vec<f64>,
    pub feeders: Vec<FeederDispatch>,
    /// Wind output per generator (system per-unit); ignored for thermal units.
    pub wind_p: Vec<f64>,
}

impl Injections {
    /// Case-file values: load scales, base feeder loads with dark PV, wind at
    /// its set point.
    pub fn base(net: &NetworkModel) -> Self {
        Injections {
            load_scale: net.loads.iter().map(|l| l.scale).collect(),
            feeders: net.feeders.iter().map(FeederDispatch::base).collect(),
            wind_p: net.generators.iter().map(|g| g.p_set).collect(),
        }
    }

    pub fn from_profiles(
        net: &NetworkModel,
        profiles: &ProfileSet,
        bindings: &ProfileBindings,
        t: NaiveDateTime,
    ) -> Result<Self, ProfileError> {
        let sample = |zone: usize| -> Result<ProfileSample, ProfileError> { profiles.sample(zone, t) };
        let load_scale = net
            .loads
            .iter()
            .map(|l| Ok(l.scale * sample(bindings.load_zone(l.bus))?.load))
            .collect::<Result<_, ProfileError>>()?;
        let solar = sample(bindings.pv_zone.unwrap_or(bindings.default_zone))?.solar;
        let feeders = net
            .feeders
            .iter()
            .map(|f| {
                Ok(FeederDispatch {
                    load_scale: sample(bindings.load_zone(f.coupling_bus))?.load,
                    pv_p: f
                        .pv_plants
                        .iter()
                        .map(|pv| solar * pv.rating_pu(net.base_mva))
                        .collect(),
                })
            })
            .collect::<Result<_, ProfileError>>()?;
        let wind = sample(bindings.wind_zone.unwrap_or(bindings.default_zone))?.wind;
        let wind_p = net
            .generators
            .iter()
            .map(|g| {
                if g.kind == GeneratorKind::Wind {
                    wind * g.p_max
                } else {
                    g.p_set
                }
            })
            .collect();
        Ok(Injections {
            load_scale,
            feeders,
            wind_p,
        })
    }

    /// Multiplies every lumped and feeder load by `k`.
    pub fn scale_loads(mut self, k: f64) -> Self {
        self.load_scale.iter_mut().for_each(|s| *s *= k);
        self.feeders.iter_mut().for_each(|f| f.load_scale *= k);
        self
    }

    /// One-line summary used in the per-case input records.
    pub fn describe(&self) -> String {
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let pv: f64 = self.feeders.iter().flat_map(|f| f.pv_p.iter()).sum();
        let fl: Vec<f64> = self.feeders.iter().map(|f| f.load_scale).collect();
        format!(
            "load_scale_mean={:.6} feeder_scale_mean={:.6} pv_total_pu={:.6}",
            mean(&self.load_scale),
            mean(&fl),
            pv
        )
    }
}

/// Active power per generator: wind at its profile output, thermal units
/// sharing the residual demand in proportion to capacity. The slack entry is
/// nominal; the power flow decides its output.
pub fn thermal_dispatch(net: &NetworkModel, inj: &Injections) -> Vec<f64> {
    let lumped: f64 = net.loads.iter().zip(&inj.load_scale).map(|(l, k)| l.p * k).sum();
    let feeders: f64 = net
        .feeders
        .iter()
        .zip(&inj.feeders)
        .map(|(f, d)| f.total_load().re * d.load_scale - d.pv_p.iter().sum::<f64>())
        .sum();
    let wind: f64 = net
        .generators
        .iter()
        .zip(&inj.wind_p)
        .filter(|(g, _)| g.kind == GeneratorKind::Wind)
        .map(|(_, p)| p)
        .sum();
    let residual = lumped + feeders - wind;
    let capacity: f64 = net.thermal_generators().map(|(_, g)| g.p_max).sum();
    net.generators
        .iter()
        .zip(&inj.wind_p)
        .map(|(g, &w)| match g.kind {
            GeneratorKind::Wind => w,
            GeneratorKind::Thermal => (residual * g.p_max / capacity).clamp(g.p_min, g.p_max),
        })
        .collect()
}
