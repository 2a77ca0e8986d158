//! Fixed workloads shared by the benchmarks and their smoke test.

use radopf_core::conditions::Condition;
use radopf_core::experiment::{generate_instances, modify_network};
use radopf_core::{build_opf_cr, cases, ConicProgram, InstanceSpec, Network, ObjectiveSpec};

pub struct Workload {
    pub name: &'static str,
    pub network: Network,
}

impl Workload {
    pub fn relaxation(&self) -> ConicProgram {
        build_opf_cr(&self.network, &ObjectiveSpec::TotalLoss).program
    }
}

/// The two test networks, unmodified and modified by C2.
pub fn workloads() -> Vec<Workload> {
    let ieee = cases::ieee33();
    let syn = cases::synthetic56(1);
    vec![
        Workload { name: "ieee33", network: ieee.clone() },
        Workload { name: "ieee33-c2", network: modify_network(&ieee, Condition::C2).network },
        Workload { name: "syn56", network: syn.clone() },
        Workload { name: "syn56-c2", network: modify_network(&syn, Condition::C2).network },
    ]
}

/// A small DG batch on the C1-modified 33-bus network.
pub fn study_batch(count: usize) -> Vec<Network> {
    let base = modify_network(&cases::ieee33(), Condition::C1).network;
    generate_instances(&base, &InstanceSpec { count, seed: 1, ..Default::default() }).expect("valid spec")
}
