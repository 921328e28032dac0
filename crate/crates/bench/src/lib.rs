//! Benchmark fixtures. The benchmarks themselves live under `benches/`.

use gridtd_core::cases::t23like;
use gridtd_core::cosim::{Injections, ScenarioSpec};
use gridtd_core::grid::NetworkModel;

pub fn fixture() -> (NetworkModel, Injections) {
    let net = t23like();
    let inj = Injections::base(&net);
    (net, inj)
}

/// A half-second scenario with a cleared fault on the first load bus.
pub fn short_fault(net: &NetworkModel) -> ScenarioSpec {
    let bus = net.loads[0].bus;
    ScenarioSpec::bus_fault(bus, 0.1, 0.2).with_duration(0.5)
}
