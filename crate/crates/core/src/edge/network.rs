//! Compute nodes, links and the paths tasks travel along.

use std::collections::HashMap;

use petgraph::algo::{astar, is_cyclic_directed};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub mac_per_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: String,
    pub from: String,
    pub to: String,
    pub bits_per_s: f64,
}

/// Directed acyclic multigraph of compute nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGraph {
    nodes: Vec<Node>,
    links: Vec<Link>,
    node_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
}

impl NetworkGraph {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self> {
        let mut problems = Vec::new();
        let mut node_index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id.clone(), i).is_some() {
                problems.push(format!("duplicate node `{}`", n.id));
            }
            if !(n.mac_per_s.is_finite() && n.mac_per_s > 0.0) {
                problems.push(format!("node `{}` speed {}", n.id, n.mac_per_s));
            }
        }
        let mut link_index = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.id.clone(), i).is_some() {
                problems.push(format!("duplicate link `{}`", l.id));
            }
            if !(l.bits_per_s.is_finite() && l.bits_per_s > 0.0) {
                problems.push(format!("link `{}` rate {}", l.id, l.bits_per_s));
            }
            for end in [&l.from, &l.to] {
                if !node_index.contains_key(end) {
                    problems.push(format!("link `{}` references unknown node `{end}`", l.id));
                }
            }
        }
        if nodes.is_empty() {
            problems.push("graph has no nodes".into());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let graph = Self {
            nodes,
            links,
            node_index,
            link_index,
        };
        if is_cyclic_directed(&graph.petgraph()) {
            return Err(Error::Scenario("network graph contains a directed cycle".into()));
        }
        Ok(graph)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: &str) -> Result<usize> {
        self.node_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Scenario(format!("unknown node `{id}`")))
    }

    pub fn link(&self, id: &str) -> Result<usize> {
        self.link_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Scenario(format!("unknown link `{id}`")))
    }

    /// Fastest link from `from` to `to`, if any.
    fn best_link(&self, from: usize, to: usize) -> Option<usize> {
        let (from, to) = (&self.nodes[from].id, &self.nodes[to].id);
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| &l.from == from && &l.to == to)
            .max_by(|(i, a), (j, b)| a.bits_per_s.total_cmp(&b.bits_per_s).then(j.cmp(i)))
            .map(|(i, _)| i)
    }

    /// Graph with one edge per link, weighted by seconds per bit.
    fn petgraph(&self) -> DiGraph<(), f64> {
        let mut g = DiGraph::with_capacity(self.nodes.len(), self.links.len());
        for _ in &self.nodes {
            g.add_node(());
        }
        for l in &self.links {
            let (a, b) = (self.node_index[&l.from], self.node_index[&l.to]);
            g.add_edge(NodeIndex::new(a), NodeIndex::new(b), 1.0 / l.bits_per_s);
        }
        g
    }
}

/// Ordered chain of nodes `v_0 .. v_M` and the links joining them.
#[derive(Clone, Debug, PartialEq)]
pub struct InferencePath {
    nodes: Vec<usize>,
    links: Vec<usize>,
}

impl InferencePath {
    /// Resolves node ids along the path. Without explicit `links`, each hop
    /// uses the fastest link joining the two nodes.
    pub fn new(graph: &NetworkGraph, node_ids: &[String], link_ids: Option<&[String]>) -> Result<Self> {
        let nodes = node_ids.iter().map(|id| graph.node(id)).collect::<Result<Vec<_>>>()?;
        if nodes.is_empty() {
            return Err(Error::Scenario("path has no nodes".into()));
        }
        let mut seen = nodes.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Scenario(format!("path {node_ids:?} repeats a node")));
        }
        let hops = nodes.len() - 1;
        let links = match link_ids {
            Some(ids) => {
                if ids.len() != hops {
                    return Err(Error::Scenario(format!(
                        "path {node_ids:?} has {hops} hops but {} links",
                        ids.len()
                    )));
                }
                let links = ids.iter().map(|id| graph.link(id)).collect::<Result<Vec<_>>>()?;
                for (j, &l) in links.iter().enumerate() {
                    let link = &graph.links()[l];
                    if link.from != graph.nodes()[nodes[j]].id || link.to != graph.nodes()[nodes[j + 1]].id {
                        return Err(Error::Scenario(format!(
                            "link `{}` does not join `{}` to `{}`",
                            link.id,
                            graph.nodes()[nodes[j]].id,
                            graph.nodes()[nodes[j + 1]].id
                        )));
                    }
                }
                links
            }
            None => (0..hops)
                .map(|j| {
                    graph.best_link(nodes[j], nodes[j + 1]).ok_or_else(|| {
                        Error::Scenario(format!(
                            "no link from `{}` to `{}`",
                            graph.nodes()[nodes[j]].id,
                            graph.nodes()[nodes[j + 1]].id
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Self { nodes, links })
    }

    /// Number of links `M`.
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn node_indices(&self) -> &[usize] {
        &self.nodes
    }

    pub fn link_indices(&self) -> &[usize] {
        &self.links
    }

    pub fn speeds(&self, graph: &NetworkGraph) -> Vec<f64> {
        self.nodes.iter().map(|&n| graph.nodes()[n].mac_per_s).collect()
    }

    pub fn rates(&self, graph: &NetworkGraph) -> Vec<f64> {
        self.links.iter().map(|&l| graph.links()[l].bits_per_s).collect()
    }

    pub fn node_ids<'g>(&self, graph: &'g NetworkGraph) -> Vec<&'g str> {
        self.nodes.iter().map(|&n| graph.nodes()[n].id.as_str()).collect()
    }
}

/// Path from `source` to `destination` minimizing the sum of `1 / rate`.
pub fn dijkstra_transmission_path(graph: &NetworkGraph, source: &str, destination: &str) -> Result<InferencePath> {
    let (s, d) = (graph.node(source)?, graph.node(destination)?);
    let pg = graph.petgraph();
    let (_, route) = astar(&pg, NodeIndex::new(s), |n| n.index() == d, |e| *e.weight(), |_| 0.0).ok_or_else(|| {
        Error::Unreachable {
            from: source.to_string(),
            to: destination.to_string(),
        }
    })?;
    let ids: Vec<String> = route.iter().map(|n| graph.nodes()[n.index()].id.clone()).collect();
    InferencePath::new(graph, &ids, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, speed: f64) -> Node {
        Node {
            id: id.into(),
            mac_per_s: speed,
        }
    }

    fn link(id: &str, from: &str, to: &str, rate: f64) -> Link {
        Link {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            bits_per_s: rate,
        }
    }

    fn names(p: &InferencePath, g: &NetworkGraph) -> Vec<String> {
        p.node_ids(g).into_iter().map(String::from).collect()
    }

    #[test]
    fn parallel_links_pick_the_faster() {
        let g = NetworkGraph::new(
            vec![node("a", 1.0), node("b", 1.0)],
            vec![link("slow", "a", "b", 5.0), link("fast", "a", "b", 10.0)],
        )
        .unwrap();
        let p = dijkstra_transmission_path(&g, "a", "b").unwrap();
        assert_eq!(p.rates(&g), vec![10.0]);
    }

    #[test]
    fn chain_has_one_path() {
        let g = NetworkGraph::new(
            vec![node("a", 1.0), node("b", 1.0), node("c", 1.0)],
            vec![link("ab", "a", "b", 3.0), link("bc", "b", "c", 4.0)],
        )
        .unwrap();
        let p = dijkstra_transmission_path(&g, "a", "c").unwrap();
        assert_eq!(names(&p, &g), vec!["a", "b", "c"]);
    }

    #[test]
    fn diamond_prefers_cheaper_two_hop_leg() {
        let g = NetworkGraph::new(
            vec![node("s", 1.0), node("m", 1.0), node("d", 1.0)],
            vec![
                link("sm", "s", "m", 10.0),
                link("md", "m", "d", 10.0),
                link("sd", "s", "d", 4.0),
            ],
        )
        .unwrap();
        let p = dijkstra_transmission_path(&g, "s", "d").unwrap();
        assert_eq!(names(&p, &g), vec!["s", "m", "d"]);
    }

    #[test]
    fn unreachable_is_an_error() {
        let g = NetworkGraph::new(vec![node("a", 1.0), node("b", 1.0)], vec![link("ba", "b", "a", 1.0)]).unwrap();
        assert!(matches!(
            dijkstra_transmission_path(&g, "a", "b"),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn graph_validation() {
        assert!(NetworkGraph::new(vec![node("a", 0.0)], vec![]).is_err());
        assert!(NetworkGraph::new(vec![node("a", 1.0)], vec![link("x", "a", "z", 1.0)]).is_err());
        let cyclic = NetworkGraph::new(
            vec![node("a", 1.0), node("b", 1.0)],
            vec![link("ab", "a", "b", 1.0), link("ba", "b", "a", 1.0)],
        );
        assert!(matches!(cyclic, Err(Error::Scenario(_))));
    }

    #[test]
    fn path_validation() {
        let g = NetworkGraph::new(
            vec![node("a", 1.0), node("b", 1.0), node("c", 1.0)],
            vec![link("ab", "a", "b", 3.0), link("bc", "b", "c", 4.0)],
        )
        .unwrap();
        let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(InferencePath::new(&g, &ids(&["a", "c"]), None).is_err());
        assert!(InferencePath::new(&g, &ids(&["a", "b", "a"]), None).is_err());
        assert!(InferencePath::new(&g, &ids(&["a", "b"]), Some(&ids(&["bc"]))).is_err());
        let p = InferencePath::new(&g, &ids(&["a", "b", "c"]), Some(&ids(&["ab", "bc"]))).unwrap();
        assert_eq!(p.hops(), 2);
    }
}
