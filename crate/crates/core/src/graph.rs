//! Communication topology: source components, hop-distance predecessor sets,
//! eccentricities and COIT windows.
//!
//! An edge `j -> i` means sensor `j` sends its local posterior to sensor `i`.
//! Hop sets use shortest directed distance, so `N_{i,ρ}` is empty beyond the
//! eccentricity of `i`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, ScenarioIssue};

/// 1-based sensor identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorId(pub usize);

impl SensorId {
    /// Zero-based position, for indexing per-sensor vectors.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn from_index(i: usize) -> Self {
        SensorId(i + 1)
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorGraph {
    num_sensors: usize,
    edges: BTreeSet<(SensorId, SensorId)>,
    /// `preds[i]` lists in-neighbours of sensor `i` (0-based), self-loops removed.
    preds: Vec<Vec<SensorId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceComponent {
    pub index: usize,
    pub vertices: Vec<SensorId>,
    pub rho_tilde: usize,
    /// Eccentricity of each member inside the component's induced subgraph.
    pub member_eccentricities: BTreeMap<SensorId, usize>,
}

impl SourceComponent {
    pub fn coit_window(&self) -> usize {
        self.rho_tilde
    }

    pub fn contains(&self, i: SensorId) -> bool {
        self.vertices.binary_search(&i).is_ok()
    }
}

impl SensorGraph {
    pub fn new(num_sensors: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(from, to) in edges {
            for v in [from, to] {
                if v == 0 || v > num_sensors {
                    return Err(invalid(
                        ScenarioIssue::BadGraph,
                        format!("edge [{from}, {to}] names sensor {v}, expected 1..={num_sensors}"),
                    ));
                }
            }
            set.insert((SensorId(from), SensorId(to)));
        }
        let mut preds = vec![Vec::new(); num_sensors];
        for &(from, to) in &set {
            if from != to {
                preds[to.index()].push(from);
            }
        }
        Ok(Self {
            num_sensors,
            edges: set,
            preds,
        })
    }

    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    pub fn sensors(&self) -> impl Iterator<Item = SensorId> {
        (1..=self.num_sensors).map(SensorId)
    }

    pub fn edges(&self) -> impl Iterator<Item = (SensorId, SensorId)> + '_ {
        self.edges.iter().copied()
    }

    /// In-neighbours of `i` in ascending order, without `i` itself.
    pub fn in_neighbors(&self, i: SensorId) -> &[SensorId] {
        &self.preds[i.index()]
    }

    /// Strongly connected components with no in-edge from outside, ordered by
    /// their smallest member.
    pub fn source_components(&self) -> Vec<SourceComponent> {
        let mut g = DiGraph::<(), ()>::with_capacity(self.num_sensors, self.edges.len());
        let nodes: Vec<_> = (0..self.num_sensors).map(|_| g.add_node(())).collect();
        for &(from, to) in &self.edges {
            g.add_edge(nodes[from.index()], nodes[to.index()], ());
        }
        let mut comp_of = vec![0; self.num_sensors];
        let sccs = tarjan_scc(&g);
        for (c, scc) in sccs.iter().enumerate() {
            for v in scc {
                comp_of[v.index()] = c;
            }
        }
        let mut sources: Vec<Vec<SensorId>> = sccs
            .iter()
            .enumerate()
            .filter(|(c, scc)| {
                scc.iter()
                    .all(|v| self.preds[v.index()].iter().all(|p| comp_of[p.index()] == *c))
            })
            .map(|(_, scc)| {
                let mut vs: Vec<SensorId> = scc.iter().map(|v| SensorId::from_index(v.index())).collect();
                vs.sort_unstable();
                vs
            })
            .collect();
        sources.sort_by_key(|vs| vs[0]);
        sources
            .into_iter()
            .enumerate()
            .map(|(t, vertices)| {
                let allowed: BTreeSet<SensorId> = vertices.iter().copied().collect();
                let member_eccentricities: BTreeMap<SensorId, usize> = vertices
                    .iter()
                    .map(|&i| (i, max_distance(&self.hops_within(i, Some(&allowed)))))
                    .collect();
                let rho_tilde = member_eccentricities.values().map(|&e| e.max(1)).max().unwrap_or(1);
                SourceComponent {
                    index: t + 1,
                    vertices,
                    rho_tilde,
                    member_eccentricities,
                }
            })
            .collect()
    }

    /// `ρ ↦ N_{i,ρ}` for every ρ with a non-empty set, starting at `0 ↦ {i}`.
    pub fn predecessor_hops(&self, i: SensorId) -> BTreeMap<usize, BTreeSet<SensorId>> {
        self.hops_within(i, None)
    }

    fn hops_within(&self, i: SensorId, allowed: Option<&BTreeSet<SensorId>>) -> BTreeMap<usize, BTreeSet<SensorId>> {
        let mut dist = vec![usize::MAX; self.num_sensors];
        let mut out: BTreeMap<usize, BTreeSet<SensorId>> = BTreeMap::new();
        let mut queue = VecDeque::from([i]);
        dist[i.index()] = 0;
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()];
            out.entry(d).or_default().insert(u);
            for &p in &self.preds[u.index()] {
                if dist[p.index()] == usize::MAX && allowed.is_none_or(|a| a.contains(&p)) {
                    dist[p.index()] = d + 1;
                    queue.push_back(p);
                }
            }
        }
        out
    }

    /// `M_j^i`: all predecessors within `j + 1` hops, plus `i`.
    pub fn m_set(&self, i: SensorId, j: usize) -> BTreeSet<SensorId> {
        self.predecessor_hops(i)
            .into_iter()
            .filter(|(rho, _)| *rho <= j + 1)
            .flat_map(|(_, s)| s)
            .collect()
    }

    /// Largest shortest-path distance from any sensor that can reach `i`.
    pub fn eccentricity(&self, i: SensorId) -> usize {
        max_distance(&self.predecessor_hops(i))
    }

    /// Sensors that no source-component member can reach. Every finite digraph
    /// has a source component upstream of each vertex, so this is a structural
    /// self-check and is expected to be empty.
    pub fn unreachable_from_sources(&self, comps: &[SourceComponent]) -> Vec<SensorId> {
        self.sensors()
            .filter(|&i| {
                let hops = self.predecessor_hops(i);
                !hops.values().flatten().any(|v| comps.iter().any(|c| c.contains(*v)))
            })
            .collect()
    }
}

fn max_distance(hops: &BTreeMap<usize, BTreeSet<SensorId>>) -> usize {
    hops.keys().next_back().copied().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> BTreeSet<SensorId> {
        v.iter().map(|&i| SensorId(i)).collect()
    }

    fn hops(pairs: &[(usize, &[usize])]) -> BTreeMap<usize, BTreeSet<SensorId>> {
        pairs.iter().map(|(r, v)| (*r, ids(v))).collect()
    }

    fn diamond() -> SensorGraph {
        SensorGraph::new(4, &[(1, 2), (1, 3), (2, 4), (3, 4)]).unwrap()
    }

    fn comp_sets(g: &SensorGraph) -> Vec<Vec<usize>> {
        g.source_components()
            .iter()
            .map(|c| c.vertices.iter().map(|v| v.0).collect())
            .collect()
    }

    #[test]
    fn source_component_cases() {
        assert_eq!(comp_sets(&SensorGraph::new(1, &[]).unwrap()), vec![vec![1]]);
        assert_eq!(
            comp_sets(&SensorGraph::new(3, &[(1, 2), (2, 3)]).unwrap()),
            vec![vec![1]]
        );
        let g = SensorGraph::new(5, &[(1, 2), (2, 1), (3, 4), (4, 3), (2, 5), (4, 5)]).unwrap();
        assert_eq!(comp_sets(&g), vec![vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn predecessor_hop_cases() {
        let chain = SensorGraph::new(3, &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(
            chain.predecessor_hops(SensorId(3)),
            hops(&[(0, &[3]), (1, &[2]), (2, &[1])])
        );
        let cycle = SensorGraph::new(2, &[(1, 2), (2, 1)]).unwrap();
        assert_eq!(cycle.predecessor_hops(SensorId(1)), hops(&[(0, &[1]), (1, &[2])]));
        assert_eq!(
            diamond().predecessor_hops(SensorId(4)),
            hops(&[(0, &[4]), (1, &[2, 3]), (2, &[1])])
        );
    }

    #[test]
    fn m_set_cases() {
        let chain = SensorGraph::new(3, &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(chain.m_set(SensorId(3), 0), ids(&[2, 3]));
        assert_eq!(chain.m_set(SensorId(3), 10), ids(&[1, 2, 3]));
        assert_eq!(diamond().m_set(SensorId(4), 0), ids(&[2, 3, 4]));
    }

    #[test]
    fn eccentricity_and_window_cases() {
        assert_eq!(SensorGraph::new(1, &[]).unwrap().eccentricity(SensorId(1)), 0);
        let two = SensorGraph::new(2, &[(1, 2), (2, 1)]).unwrap();
        assert_eq!(two.eccentricity(SensorId(2)), 1);
        let three = SensorGraph::new(3, &[(1, 2), (2, 3), (3, 1)]).unwrap();
        assert!(three.sensors().all(|i| three.eccentricity(i) == 2));
        assert_eq!(
            SensorGraph::new(1, &[]).unwrap().source_components()[0].coit_window(),
            1
        );
        assert_eq!(two.source_components()[0].coit_window(), 1);
        assert_eq!(three.source_components()[0].coit_window(), 2);
    }

    #[test]
    fn self_loops_are_ignored() {
        let g = SensorGraph::new(2, &[(1, 1), (1, 2)]).unwrap();
        assert!(g.in_neighbors(SensorId(1)).is_empty());
        assert_eq!(g.eccentricity(SensorId(1)), 0);
        assert_eq!(comp_sets(&g), vec![vec![1]]);
    }

    #[test]
    fn rejects_out_of_range_ids() {
        assert!(SensorGraph::new(2, &[(0, 1)]).is_err());
        assert!(SensorGraph::new(2, &[(1, 3)]).is_err());
    }
}
