use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc as SharedFlag;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{validate_net, Marking, PetriError, PetriNet};

/// Limits on reachability exploration. All three must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationBounds {
    /// Distinct markings kept in the graph, the initial one included.
    pub max_markings: usize,
    /// Successors with more tokens than this in any place are dropped.
    pub max_tokens: u32,
    /// Markings at this BFS depth are not expanded.
    pub max_depth: usize,
}

impl Default for ExplorationBounds {
    fn default() -> Self {
        Self {
            max_markings: 10_000,
            max_tokens: 16,
            max_depth: 256,
        }
    }
}

impl ExplorationBounds {
    pub fn check(&self) -> Result<(), PetriError> {
        if self.max_markings == 0 {
            return Err(PetriError::InvalidBound("max_markings must be positive".into()));
        }
        if self.max_tokens == 0 {
            return Err(PetriError::InvalidBound("max_tokens must be positive".into()));
        }
        if self.max_depth == 0 {
            return Err(PetriError::InvalidBound("max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub transition: String,
    pub to: usize,
}

/// Markings reachable within bounds. Node 0 is the initial marking; nodes
/// are numbered in breadth-first discovery order with transitions tried in
/// id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachabilityGraph {
    pub markings: Vec<Marking>,
    pub edges: Vec<Edge>,
    /// Shortest firing distance from the initial marking, per node.
    pub depth: Vec<usize>,
    /// Index into `edges` of the edge that discovered each node.
    pub discovered_by: Vec<Option<usize>>,
    /// Some successor was dropped or left unexpanded because of a bound.
    pub truncated: bool,
    /// Exploration stopped early on a cancel request or deadline.
    pub cancelled: bool,
}

impl ReachabilityGraph {
    /// Firing sequence from the initial marking along discovery edges.
    pub fn path_to(&self, node: usize) -> Vec<&Edge> {
        let mut path = Vec::new();
        let mut at = node;
        while let Some(e) = self.discovered_by[at] {
            let edge = &self.edges[e];
            path.push(edge);
            at = edge.from;
        }
        path.reverse();
        path
    }

    pub fn index_of(&self, m: &Marking) -> Option<usize> {
        self.markings.iter().position(|x| x == m)
    }
}

/// Dense, index-based view of a well-formed net. Transitions are kept in
/// id order.
pub(crate) struct CompiledNet<'a> {
    pub(crate) places: Vec<&'a str>,
    place_index: BTreeMap<&'a str, usize>,
    pub(crate) transitions: Vec<&'a str>,
    transition_index: BTreeMap<&'a str, usize>,
    pre: Vec<Vec<(usize, u32)>>,
    post: Vec<Vec<(usize, u32)>>,
}

impl<'a> CompiledNet<'a> {
    pub(crate) fn new(net: &'a PetriNet) -> Result<Self, PetriError> {
        let report = validate_net(net);
        if !report.is_ok() {
            return Err(PetriError::InvalidNet(report));
        }
        let mut places: Vec<&str> = net.places.iter().map(|p| p.id.as_str()).collect();
        places.sort_unstable();
        let place_index: BTreeMap<&str, usize> =
            places.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut transitions: Vec<&str> = net.transitions.iter().map(|t| t.id.as_str()).collect();
        transitions.sort_unstable();
        let transition_index: BTreeMap<&str, usize> =
            transitions.iter().enumerate().map(|(i, t)| (*t, i)).collect();

        let mut pre = vec![Vec::new(); transitions.len()];
        let mut post = vec![Vec::new(); transitions.len()];
        for arc in &net.arcs {
            if let (Some(&p), Some(&t)) = (place_index.get(arc.source.as_str()), transition_index.get(arc.target.as_str())) {
                pre[t].push((p, arc.weight));
            } else if let (Some(&t), Some(&p)) = (transition_index.get(arc.source.as_str()), place_index.get(arc.target.as_str())) {
                post[t].push((p, arc.weight));
            }
        }
        Ok(Self {
            places,
            place_index,
            transitions,
            transition_index,
            pre,
            post,
        })
    }

    pub(crate) fn encode(&self, m: &Marking) -> Result<Vec<u32>, PetriError> {
        let mut v = vec![0; self.places.len()];
        for (p, n) in m.iter() {
            let i = *self
                .place_index
                .get(p)
                .ok_or_else(|| PetriError::UnknownPlace(p.to_owned()))?;
            v[i] = n;
        }
        Ok(v)
    }

    pub(crate) fn decode(&self, v: &[u32]) -> Marking {
        self.places
            .iter()
            .zip(v)
            .map(|(p, n)| (*p, *n))
            .collect()
    }

    pub(crate) fn transition(&self, id: &str) -> Result<usize, PetriError> {
        self.transition_index
            .get(id)
            .copied()
            .ok_or_else(|| PetriError::UnknownTransition(id.to_owned()))
    }

    pub(crate) fn is_enabled(&self, state: &[u32], t: usize) -> bool {
        self.pre[t].iter().all(|&(p, w)| state[p] >= w)
    }

    /// `M' = M - Pre(., t) + Post(., t)`; the caller checks enabledness.
    pub(crate) fn successor(&self, state: &[u32], t: usize) -> Result<Vec<u32>, PetriError> {
        let mut next = state.to_vec();
        for &(p, w) in &self.pre[t] {
            next[p] -= w;
        }
        for &(p, w) in &self.post[t] {
            next[p] = next[p]
                .checked_add(w)
                .ok_or_else(|| PetriError::Overflow(self.places[p].to_owned()))?;
        }
        Ok(next)
    }
}

/// Transitions enabled at `m`, sorted by id.
pub fn enabled(net: &PetriNet, m: &Marking) -> Result<Vec<String>, PetriError> {
    let c = CompiledNet::new(net)?;
    let state = c.encode(m)?;
    Ok((0..c.transitions.len())
        .filter(|&t| c.is_enabled(&state, t))
        .map(|t| c.transitions[t].to_owned())
        .collect())
}

/// Fires `transition` at `m`.
pub fn fire(net: &PetriNet, m: &Marking, transition: &str) -> Result<Marking, PetriError> {
    let c = CompiledNet::new(net)?;
    let state = c.encode(m)?;
    let t = c.transition(transition)?;
    if !c.is_enabled(&state, t) {
        return Err(PetriError::NotEnabled(transition.to_owned()));
    }
    Ok(c.decode(&c.successor(&state, t)?))
}

/// Breadth-first reachability within `bounds`.
pub fn reachability(
    net: &PetriNet,
    m0: &Marking,
    bounds: ExplorationBounds,
) -> Result<ReachabilityGraph, PetriError> {
    Explorer::new(bounds).explore(net, m0)
}

/// Reachability explorer with optional cancellation. The cancel flag and the
/// deadline are polled once per expanded marking.
#[derive(Debug, Clone, Default)]
pub struct Explorer {
    pub bounds: ExplorationBounds,
    cancel: Option<SharedFlag<AtomicBool>>,
    deadline: Option<Instant>,
}

impl Explorer {
    pub fn new(bounds: ExplorationBounds) -> Self {
        Self {
            bounds,
            cancel: None,
            deadline: None,
        }
    }

    pub fn with_cancel(mut self, flag: SharedFlag<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub(crate) fn should_stop(&self) -> bool {
        self.cancel.as_ref().is_some_and(|f| f.load(Ordering::Relaxed))
            || self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn explore(&self, net: &PetriNet, m0: &Marking) -> Result<ReachabilityGraph, PetriError> {
        self.bounds.check()?;
        let c = CompiledNet::new(net)?;
        let start = c.encode(m0)?;

        let mut states: Vec<Vec<u32>> = vec![start.clone()];
        let mut lookup: HashMap<Vec<u32>, usize> = HashMap::from([(start, 0)]);
        let mut depth = vec![0usize];
        let mut discovered_by: Vec<Option<usize>> = vec![None];
        let mut edges: Vec<Edge> = Vec::new();
        let mut truncated = false;
        let mut cancelled = false;
        let mut queue = VecDeque::from([0usize]);

        while let Some(node) = queue.pop_front() {
            if self.should_stop() {
                cancelled = true;
                truncated = true;
                break;
            }
            let state = states[node].clone();
            let at_depth_limit = depth[node] >= self.bounds.max_depth;
            for t in 0..c.transitions.len() {
                if !c.is_enabled(&state, t) {
                    continue;
                }
                if at_depth_limit {
                    truncated = true;
                    break;
                }
                let next = c.successor(&state, t)?;
                if next.iter().any(|&n| n > self.bounds.max_tokens) {
                    truncated = true;
                    continue;
                }
                let to = match lookup.get(&next) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= self.bounds.max_markings {
                            truncated = true;
                            continue;
                        }
                        let j = states.len();
                        lookup.insert(next.clone(), j);
                        states.push(next);
                        depth.push(depth[node] + 1);
                        discovered_by.push(Some(edges.len()));
                        queue.push_back(j);
                        j
                    }
                };
                edges.push(Edge {
                    from: node,
                    transition: c.transitions[t].to_owned(),
                    to,
                });
            }
        }

        Ok(ReachabilityGraph {
            markings: states.iter().map(|s| c.decode(s)).collect(),
            edges,
            depth,
            discovered_by,
            truncated,
            cancelled,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petri::Aspect;

    fn feeder() -> PetriNet {
        let mut net = PetriNet::new();
        net.place("p", "P", Aspect::External)
            .transition("t", "T", Aspect::Internal)
            .arc("p", "t", 1);
        net
    }

    fn cycle() -> PetriNet {
        let mut net = PetriNet::new();
        net.place("p", "P", Aspect::External)
            .place("q", "Q", Aspect::External)
            .transition("t1", "T1", Aspect::Interface)
            .transition("t2", "T2", Aspect::Interface)
            .arc("p", "t1", 1)
            .arc("t1", "q", 1)
            .arc("q", "t2", 1)
            .arc("t2", "p", 1);
        net
    }

    #[test]
    fn enabledness_follows_tokens() {
        let net = feeder();
        assert!(enabled(&net, &Marking::new()).unwrap().is_empty());
        assert_eq!(enabled(&net, &Marking::new().with("p", 1)).unwrap(), ["t"]);
    }

    #[test]
    fn unknown_place_in_marking() {
        let err = enabled(&feeder(), &Marking::new().with("zz", 1)).unwrap_err();
        assert!(matches!(err, PetriError::UnknownPlace(p) if p == "zz"));
    }

    #[test]
    fn source_transition_fires_from_empty() {
        let mut net = PetriNet::new();
        net.place("p", "P", Aspect::External)
            .transition("src", "Source", Aspect::External)
            .arc("src", "p", 1);
        let m = fire(&net, &Marking::new(), "src").unwrap();
        assert_eq!(m, Marking::new().with("p", 1));
    }

    #[test]
    fn weighted_firing() {
        let mut net = PetriNet::new();
        net.place("p", "P", Aspect::External)
            .place("q", "Q", Aspect::External)
            .transition("t", "T", Aspect::External)
            .arc("p", "t", 2)
            .arc("t", "q", 1);
        let m = fire(&net, &Marking::new().with("p", 3), "t").unwrap();
        assert_eq!(m, Marking::new().with("p", 1).with("q", 1));
        let err = fire(&net, &m, "t").unwrap_err();
        assert!(matches!(err, PetriError::NotEnabled(_)));
        assert!(matches!(fire(&net, &m, "nope"), Err(PetriError::UnknownTransition(_))));
    }

    #[test]
    fn dead_net_has_single_marking() {
        let g = reachability(&feeder(), &Marking::new(), ExplorationBounds::default()).unwrap();
        assert_eq!(g.markings.len(), 1);
        assert!(g.edges.is_empty());
        assert!(!g.truncated);
    }

    #[test]
    fn one_safe_cycle() {
        let g = reachability(&cycle(), &Marking::new().with("p", 1), ExplorationBounds::default()).unwrap();
        assert_eq!(g.markings.len(), 2);
        assert_eq!(g.edges.len(), 2);
        assert_eq!(g.markings[1], Marking::new().with("q", 1));
        assert!(!g.truncated);
    }

    #[test]
    fn zero_bound_is_rejected() {
        let b = ExplorationBounds { max_depth: 0, ..Default::default() };
        assert!(matches!(
            reachability(&cycle(), &Marking::new(), b),
            Err(PetriError::InvalidBound(_))
        ));
    }

    #[test]
    fn unbounded_source_is_truncated() {
        let mut net = PetriNet::new();
        net.place("p", "P", Aspect::External)
            .transition("src", "Source", Aspect::External)
            .arc("src", "p", 1);
        let b = ExplorationBounds { max_tokens: 4, ..Default::default() };
        let g = reachability(&net, &Marking::new(), b).unwrap();
        assert_eq!(g.markings.len(), 5);
        assert!(g.truncated);

        let b = ExplorationBounds { max_markings: 3, ..Default::default() };
        let g = reachability(&net, &Marking::new(), b).unwrap();
        assert_eq!(g.markings.len(), 3);
        assert!(g.truncated);

        let b = ExplorationBounds { max_depth: 2, ..Default::default() };
        let g = reachability(&net, &Marking::new(), b).unwrap();
        assert_eq!(g.markings.len(), 3);
        assert!(g.truncated);
    }

    #[test]
    fn cancellation_is_honoured() {
        let mut net = PetriNet::new();
        net.place("p", "P", Aspect::External)
            .transition("src", "Source", Aspect::External)
            .arc("src", "p", 1);
        let flag = SharedFlag::new(AtomicBool::new(true));
        let g = Explorer::new(ExplorationBounds::default())
            .with_cancel(flag)
            .explore(&net, &Marking::new())
            .unwrap();
        assert!(g.cancelled);
        assert_eq!(g.markings.len(), 1);
    }
}
