//! Per-unit DC network model.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// Bus number as it appears in the source case file.
    pub id: usize,
    /// Active-power demand, p.u.
    pub demand: f64,
    /// Only load buses carry uncertainty.
    pub is_load: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    /// Index into `Network::buses`.
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Linear cost coefficient, $ per p.u.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// `1 / x`, p.u.
    pub susceptance: f64,
    /// Thermal limit, p.u. `f64::INFINITY` marks an unrated branch.
    pub f_max: f64,
}

impl Branch {
    pub fn is_rated(&self) -> bool {
        self.f_max.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    pub slack_bus: usize,
}

impl Network {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_gen(&self) -> usize {
        self.generators.len()
    }

    pub fn n_branch(&self) -> usize {
        self.branches.len()
    }

    pub fn demand(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.demand).collect()
    }

    pub fn total_demand(&self) -> f64 {
        self.buses.iter().map(|b| b.demand).sum()
    }

    /// Indices of buses with positive demand, ascending.
    pub fn load_buses(&self) -> Vec<usize> {
        self.buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_load)
            .map(|(i, _)| i)
            .collect()
    }
}

/// One violated network invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    BoundsInverted { generator: usize },
    GeneratorBusOutOfRange { generator: usize },
    BranchBusOutOfRange { branch: usize },
    NonpositiveRating { branch: usize },
    NonpositiveSusceptance { branch: usize },
    SlackOutOfRange,
    Disconnected { unreachable_bus: usize },
    InsufficientCapacity { capacity: f64, demand: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::BoundsInverted { generator } => {
                write!(f, "generator {generator}: p_min > p_max")
            }
            Diagnostic::GeneratorBusOutOfRange { generator } => {
                write!(f, "generator {generator}: bus index out of range")
            }
            Diagnostic::BranchBusOutOfRange { branch } => {
                write!(f, "branch {branch}: terminal bus out of range")
            }
            Diagnostic::NonpositiveRating { branch } => write!(f, "branch {branch}: f_max <= 0"),
            Diagnostic::NonpositiveSusceptance { branch } => {
                write!(f, "branch {branch}: susceptance <= 0")
            }
            Diagnostic::SlackOutOfRange => write!(f, "slack bus index out of range"),
            Diagnostic::Disconnected { unreachable_bus } => {
                write!(f, "bus {unreachable_bus} is not reachable from the slack bus")
            }
            Diagnostic::InsufficientCapacity { capacity, demand } => {
                write!(f, "total p_max {capacity} below total demand {demand}")
            }
        }
    }
}

/// Checks every network invariant. An empty result means the network is valid.
pub fn validate(net: &Network) -> Vec<Diagnostic> {
    let n = net.n_bus();
    let mut out = Vec::new();
    for (g, gen) in net.generators.iter().enumerate() {
        if gen.bus >= n {
            out.push(Diagnostic::GeneratorBusOutOfRange { generator: g });
        }
        if gen.p_min > gen.p_max {
            out.push(Diagnostic::BoundsInverted { generator: g });
        }
    }
    let mut branches_ok = true;
    for (l, br) in net.branches.iter().enumerate() {
        if br.from >= n || br.to >= n {
            out.push(Diagnostic::BranchBusOutOfRange { branch: l });
            branches_ok = false;
        }
        if !(br.f_max > 0.0) {
            out.push(Diagnostic::NonpositiveRating { branch: l });
        }
        if !(br.susceptance > 0.0) {
            out.push(Diagnostic::NonpositiveSusceptance { branch: l });
        }
    }
    if net.slack_bus >= n {
        out.push(Diagnostic::SlackOutOfRange);
    } else if branches_ok {
        if let Some(bus) = first_unreachable(n, net.slack_bus, &net.branches) {
            out.push(Diagnostic::Disconnected {
                unreachable_bus: bus,
            });
        }
    }
    let capacity: f64 = net.generators.iter().map(|g| g.p_max).sum();
    let demand = net.total_demand();
    if capacity < demand {
        out.push(Diagnostic::InsufficientCapacity { capacity, demand });
    }
    out
}

/// Breadth-first search from `root`; returns the lowest-index bus not reached.
pub fn first_unreachable(n_bus: usize, root: usize, branches: &[Branch]) -> Option<usize> {
    if n_bus == 0 {
        return None;
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_bus];
    for br in branches {
        adj[br.from].push(br.to);
        adj[br.to].push(br.from);
    }
    let mut seen = vec![false; n_bus];
    let mut queue = alloc::collections::VecDeque::new();
    seen[root] = true;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.iter().position(|s| !s)
}


#[cfg(test)]
mod tests {
    use super::fixtures::three_bus;
    use super::*;

    #[test]
    fn valid_fixture_has_no_diagnostics() {
        assert!(validate(&three_bus()).is_empty());
    }

    #[test]
    fn inverted_bounds_reported() {
        let mut net = three_bus();
        net.generators[1].p_min = 3.0;
        assert_eq!(
            validate(&net),
            vec![Diagnostic::BoundsInverted { generator: 1 }]
        );
    }

    #[test]
    fn insufficient_capacity_reported() {
        let mut net = three_bus();
        net.buses[2].demand = 5.0;
        assert!(matches!(
            validate(&net).as_slice(),
            [Diagnostic::InsufficientCapacity { .. }]
        ));
    }

    #[test]
    fn disconnected_bus_reported() {
        let mut net = three_bus();
        net.branches.retain(|b| b.to != 2);
        assert_eq!(
            validate(&net),
            vec![Diagnostic::Disconnected { unreachable_bus: 2 }]
        );
    }

    #[test]
    fn load_buses_are_positive_demand() {
        assert_eq!(three_bus().load_buses(), vec![2]);
    }
}
