use crate::model::{Agent, Instance, Location, LocationId, NodeDemand, PrecedenceDag, TravelModel, WorkEntry};
use crate::values::ValueSpec;

/// Grid instance with superadditive values and no precedences.
pub fn grid_instance(coords: &[[f64; 2]], agents: &[(LocationId, f64)], nodes: Vec<NodeDemand>) -> Instance {
    grid_instance_with(coords, agents, nodes, vec![])
}

pub fn grid_instance_with(
    coords: &[[f64; 2]],
    agents: &[(LocationId, f64)],
    nodes: Vec<NodeDemand>,
    edges: Vec<(usize, usize)>,
) -> Instance {
    let locations = coords
        .iter()
        .enumerate()
        .map(|(id, &c)| Location { id, coords: c })
        .collect();
    let agents = agents
        .iter()
        .enumerate()
        .map(|(id, &(l, s))| Agent {
            id,
            initial_location: l,
            speed: s,
        })
        .collect();
    let m = nodes.len();
    Instance::new(
        locations,
        agents,
        nodes,
        PrecedenceDag::new(m, edges).unwrap(),
        TravelModel::Grid,
        ValueSpec::default(),
    )
    .unwrap()
}

pub fn demand(loc: LocationId, w: f64, phi: f64, window: (u64, u64, u64)) -> NodeDemand {
    NodeDemand::new(vec![loc], w, phi, window.0, window.1, window.2).unwrap()
}

pub fn entry(t: u64, members: &[usize]) -> WorkEntry {
    WorkEntry {
        time: t,
        coalition: members.iter().copied().collect(),
    }
}
