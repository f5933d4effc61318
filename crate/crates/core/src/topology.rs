//! Node-link models of vertiport surfaces and the airspace between them.
//!
//! Every node and link is a potential resource with its own capacity. Surface
//! graphs follow a clover layout: each parking pad has a private taxiway node
//! that joins every TLOF. Airspace between two vertiports is a chain of
//! evenly spaced cruise waypoints ending in the destination's holding unit.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Capacity, EntityId};

pub const FEET_PER_MILE: f64 = 5280.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Tlof,
    ParkingPad,
    TaxiwayNode,
    ApproachFix,
    DepartureFix,
    HoldingUnit,
    ClimbExit,
    CruiseWaypoint,
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeRole::Tlof => "tlof",
            NodeRole::ParkingPad => "parking_pad",
            NodeRole::TaxiwayNode => "taxiway_node",
            NodeRole::ApproachFix => "approach_fix",
            NodeRole::DepartureFix => "departure_fix",
            NodeRole::HoldingUnit => "holding_unit",
            NodeRole::ClimbExit => "climb_exit",
            NodeRole::CruiseWaypoint => "cruise_waypoint",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x_ft: f64,
    pub y_ft: f64,
    pub alt_ft: f64,
}

impl Position {
    pub fn new(x_ft: f64, y_ft: f64, alt_ft: f64) -> Self {
        Position { x_ft, y_ft, alt_ft }
    }

    pub fn distance_ft(&self, other: &Position) -> f64 {
        let dx = self.x_ft - other.x_ft;
        let dy = self.y_ft - other.y_ft;
        let dz = self.alt_ft - other.alt_ft;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance_ft(&self, other: &Position) -> f64 {
        (self.x_ft - other.x_ft).hypot(self.y_ft - other.y_ft)
    }

    fn offset(&self, dx: f64, dy: f64) -> Position {
        Position::new(self.x_ft + dx, self.y_ft + dy, self.alt_ft)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    pub role: NodeRole,
    pub vertiport: Option<String>,
    pub position: Position,
    pub capacity: Capacity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
    pub length_ft: f64,
    pub capacity: Capacity,
}

impl Edge {
    pub fn other(&self, n: NodeId) -> NodeId {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("{what} must be at least 1 (got {got})")]
    NonPositiveCount { what: &'static str, got: u32 },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("vertiports '{0}' and '{1}' coincide")]
    CoincidentVertiports(String, String),
    #[error("waypoint spacing must be positive and no larger than the leg ({distance_mi} mi vs {spacing_mi} mi)")]
    BadSpacing { distance_mi: f64, spacing_mi: f64 },
    #[error("no route from {from:?} to {to:?}")]
    NoRoute { from: NodeId, to: NodeId },
    #[error("unknown node {0:?}")]
    UnknownNode(NodeId),
    #[error("unknown vertiport '{0}'")]
    UnknownVertiport(String),
}

/// Undirected node-link graph with per-element capacities.
#[derive(Clone, Debug, Default)]
pub struct ResourceGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
}

impl ResourceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(
        &mut self,
        label: impl Into<String>,
        role: NodeRole,
        vertiport: Option<&str>,
        position: Position,
        capacity: Capacity,
    ) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            label: label.into(),
            role,
            vertiport: vertiport.map(str::to_owned),
            position,
            capacity,
        });
        self.adjacency.push(Vec::new());
        id
    }

    /// Adds a link whose length is the straight-line distance between its ends.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId, capacity: Capacity) -> EdgeId {
        let len = self.nodes[a.0 as usize].position.distance_ft(&self.nodes[b.0 as usize].position);
        self.add_edge_with_length(a, b, len, capacity)
    }

    pub fn add_edge_with_length(&mut self, a: NodeId, b: NodeId, length_ft: f64, capacity: Capacity) -> EdgeId {
        assert!(length_ft > 0.0 && length_ft.is_finite(), "link length must be positive");
        assert_ne!(a, b, "self loops are not links");
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(Edge { id, a, b, length_ft, capacity });
        self.adjacency[a.0 as usize].push((b, id));
        self.adjacency[b.0 as usize].push((a, id));
        id
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0 as usize]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[id.0 as usize]
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency[id.0 as usize].len()
    }

    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        self.neighbors(a).iter().find(|(n, _)| *n == b).map(|&(_, e)| e)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        (id.0 as usize) < self.nodes.len()
    }

    /// Copies `other` into this graph, returning the id offset applied to its nodes.
    pub fn absorb(&mut self, other: &ResourceGraph) -> u32 {
        let offset = self.nodes.len() as u32;
        for n in &other.nodes {
            self.add_node(n.label.clone(), n.role, n.vertiport.as_deref(), n.position, n.capacity);
        }
        for e in &other.edges {
            self.add_edge_with_length(NodeId(e.a.0 + offset), NodeId(e.b.0 + offset), e.length_ft, e.capacity);
        }
        offset
    }

    pub fn write_nodes_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        out.write_record(["id", "label", "role", "vertiport", "x_ft", "y_ft", "alt_ft", "capacity"])?;
        for n in &self.nodes {
            out.write_record([
                n.id.0.to_string(),
                n.label.clone(),
                n.role.to_string(),
                n.vertiport.clone().unwrap_or_default(),
                format!("{:.3}", n.position.x_ft),
                format!("{:.3}", n.position.y_ft),
                format!("{:.3}", n.position.alt_ft),
                n.capacity.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_edges_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        out.write_record(["id", "a", "b", "length_ft", "capacity"])?;
        for e in &self.edges {
            out.write_record([
                e.id.0.to_string(),
                e.a.0.to_string(),
                e.b.0.to_string(),
                format!("{:.3}", e.length_ft),
                e.capacity.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Clover geometry knobs. The defaults put each pad 110.1 ft of taxiway from
/// the TLOF, which is 30 s at a 3.67 ft/s taxi speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloverGeometry {
    pub pad_ring_radius_ft: f64,
    /// Radius of the ring TLOFs sit on when there is more than one.
    pub tlof_ring_radius_ft: f64,
    pub fix_altitude_ft: f64,
    pub holding_altitude_ft: f64,
    /// TLOFs closer than this operate as one exclusivity group.
    pub tlof_separation_ft: f64,
}

impl Default for CloverGeometry {
    fn default() -> Self {
        CloverGeometry {
            pad_ring_radius_ft: 110.1,
            tlof_ring_radius_ft: 120.0,
            fix_altitude_ft: 300.0,
            holding_altitude_ft: 1000.0,
            tlof_separation_ft: 200.0,
        }
    }
}

impl CloverGeometry {
    pub fn validate(&self) -> Result<(), TopologyError> {
        let positive = [
            ("pad_ring_radius_ft", self.pad_ring_radius_ft),
            ("fix_altitude_ft", self.fix_altitude_ft),
            ("holding_altitude_ft", self.holding_altitude_ft),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TopologyError::Geometry(format!("{name} must be positive")));
            }
        }
        if !(self.tlof_ring_radius_ft >= 0.0) || !(self.tlof_separation_ft >= 0.0) {
            return Err(TopologyError::Geometry("TLOF ring radius and separation must be non-negative".into()));
        }
        if self.holding_altitude_ft <= self.fix_altitude_ft {
            return Err(TopologyError::Geometry("holding unit must sit above the fixes".into()));
        }
        Ok(())
    }
}

/// Named handles into a vertiport's part of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct VertiportLayout {
    pub id: String,
    pub site: Position,
    pub tlofs: Vec<NodeId>,
    pub pads: Vec<NodeId>,
    /// `taxiways[i]` is the private taxi node of `pads[i]`.
    pub taxiways: Vec<NodeId>,
    pub approach_fix: NodeId,
    pub departure_fix: NodeId,
    pub holding_unit: NodeId,
    /// Each inner list is one group of TLOFs that may not operate simultaneously.
    pub exclusivity_groups: Vec<Vec<NodeId>>,
    pub chargers: u32,
}

impl VertiportLayout {
    fn shift(&mut self, offset: u32) {
        let s = |n: &mut NodeId| n.0 += offset;
        self.tlofs.iter_mut().for_each(s);
        self.pads.iter_mut().for_each(s);
        self.taxiways.iter_mut().for_each(s);
        s(&mut self.approach_fix);
        s(&mut self.departure_fix);
        s(&mut self.holding_unit);
        self.exclusivity_groups.iter_mut().flatten().for_each(s);
    }

    pub fn exclusivity_group_of(&self, tlof: NodeId) -> Option<usize> {
        self.exclusivity_groups.iter().position(|g| g.contains(&tlof))
    }
}

#[derive(Clone, Debug)]
pub struct VertiportGraph {
    pub graph: ResourceGraph,
    pub layout: VertiportLayout,
}

/// Builds a clover vertiport centred on `site`. Chargers default to one per pad.
pub fn build_clover_vertiport(
    id: &str,
    site: Position,
    pads: u32,
    tlofs: u32,
    geometry: &CloverGeometry,
) -> Result<VertiportGraph, TopologyError> {
    if pads == 0 {
        return Err(TopologyError::NonPositiveCount { what: "pads", got: pads });
    }
    if tlofs == 0 {
        return Err(TopologyError::NonPositiveCount { what: "tlofs", got: tlofs });
    }
    geometry.validate()?;
    let mut g = ResourceGraph::new();
    let one = Capacity::Finite(1);
    let vp = Some(id);

    let tlof_nodes: Vec<NodeId> = (0..tlofs)
        .map(|k| {
            let pos = if tlofs == 1 {
                site
            } else {
                let theta = std::f64::consts::TAU * f64::from(k) / f64::from(tlofs);
                site.offset(geometry.tlof_ring_radius_ft * theta.cos(), geometry.tlof_ring_radius_ft * theta.sin())
            };
            g.add_node(format!("{id}/tlof{k}"), NodeRole::Tlof, vp, pos, one)
        })
        .collect();

    let mut pad_nodes = Vec::with_capacity(pads as usize);
    let mut taxi_nodes = Vec::with_capacity(pads as usize);
    for i in 0..pads {
        // Offset by half a step so pads never sit on the TLOF ring axis.
        let theta = std::f64::consts::TAU * (f64::from(i) + 0.5) / f64::from(pads);
        let (c, s) = (theta.cos(), theta.sin());
        let r = geometry.pad_ring_radius_ft;
        let pad = g.add_node(format!("{id}/pad{i}"), NodeRole::ParkingPad, vp, site.offset(r * c, r * s), one);
        let taxi =
            g.add_node(format!("{id}/taxi{i}"), NodeRole::TaxiwayNode, vp, site.offset(0.5 * r * c, 0.5 * r * s), one);
        g.add_edge(pad, taxi, one);
        for &t in &tlof_nodes {
            g.add_edge(taxi, t, one);
        }
        pad_nodes.push(pad);
        taxi_nodes.push(taxi);
    }

    let fix_alt = geometry.fix_altitude_ft;
    let approach = g.add_node(
        format!("{id}/approach_fix"),
        NodeRole::ApproachFix,
        vp,
        Position::new(site.x_ft - 500.0, site.y_ft, site.alt_ft + fix_alt),
        one,
    );
    let departure = g.add_node(
        format!("{id}/departure_fix"),
        NodeRole::DepartureFix,
        vp,
        Position::new(site.x_ft + 500.0, site.y_ft, site.alt_ft + fix_alt),
        one,
    );
    let holding = g.add_node(
        format!("{id}/holding"),
        NodeRole::HoldingUnit,
        vp,
        Position::new(site.x_ft, site.y_ft, site.alt_ft + geometry.holding_altitude_ft),
        Capacity::Unbounded,
    );
    for &t in &tlof_nodes {
        g.add_edge(approach, t, one);
        g.add_edge(t, departure, one);
    }
    g.add_edge(holding, approach, one);

    let groups = exclusivity_groups(&g, &tlof_nodes, geometry.tlof_separation_ft);
    let layout = VertiportLayout {
        id: id.to_owned(),
        site,
        tlofs: tlof_nodes,
        pads: pad_nodes,
        taxiways: taxi_nodes,
        approach_fix: approach,
        departure_fix: departure,
        holding_unit: holding,
        exclusivity_groups: groups,
        chargers: pads,
    };
    Ok(VertiportGraph { graph: g, layout })
}

/// Connected components of the "closer than `separation_ft`" relation.
fn exclusivity_groups(g: &ResourceGraph, tlofs: &[NodeId], separation_ft: f64) -> Vec<Vec<NodeId>> {
    let mut parent: Vec<usize> = (0..tlofs.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..tlofs.len() {
        for j in (i + 1)..tlofs.len() {
            let d = g.node(tlofs[i]).position.horizontal_distance_ft(&g.node(tlofs[j]).position);
            if d < separation_ft {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for (i, &tlof) in tlofs.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(tlof);
    }
    groups.into_values().collect()
}

/// Number of interior cruise waypoints on a leg: `floor(d / spacing) - 1`.
pub fn interior_waypoint_count(distance_mi: f64, spacing_mi: f64) -> Result<usize, TopologyError> {
    if !(spacing_mi > 0.0) || !(distance_mi >= spacing_mi) || !distance_mi.is_finite() {
        return Err(TopologyError::BadSpacing { distance_mi, spacing_mi });
    }
    // Guard against 12.0 / 1.0 landing at 11.999999.
    let links = (distance_mi / spacing_mi + 1e-9).floor() as usize;
    Ok(links - 1)
}

/// A directed cruise chain from an origin's climb-exit node to a
/// destination's holding unit.
#[derive(Clone, Debug, PartialEq)]
pub struct AirspaceRoute {
    pub origin: String,
    pub destination: String,
    pub distance_mi: f64,
    /// Climb-exit node, interior waypoints, destination holding unit.
    pub nodes: Vec<NodeId>,
    pub link_length_ft: f64,
}

impl AirspaceRoute {
    pub fn interior_waypoints(&self) -> &[NodeId] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn link_count(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Adds the cruise chain from `origin` to `destination` to `graph`. Both
/// layouts must already live in `graph`.
pub fn build_airspace(
    graph: &mut ResourceGraph,
    origin: &VertiportLayout,
    destination: &VertiportLayout,
    distance_mi: f64,
    spacing_mi: f64,
    cruise_altitude_ft: f64,
) -> Result<AirspaceRoute, TopologyError> {
    if origin.id == destination.id || !(distance_mi > 0.0) {
        return Err(TopologyError::CoincidentVertiports(origin.id.clone(), destination.id.clone()));
    }
    let interior = interior_waypoint_count(distance_mi, spacing_mi)?;
    let links = interior + 1;
    let link_len = distance_mi * FEET_PER_MILE / links as f64;
    let (a, b) = (origin.site, destination.site);
    let at = |frac: f64| {
        Position::new(a.x_ft + (b.x_ft - a.x_ft) * frac, a.y_ft + (b.y_ft - a.y_ft) * frac, cruise_altitude_ft)
    };
    let one = Capacity::Finite(1);
    let label = format!("{}>{}", origin.id, destination.id);
    let exit = graph.add_node(format!("{label}/exit"), NodeRole::ClimbExit, None, at(0.0), one);
    let mut nodes = vec![exit];
    for k in 1..=interior {
        let n =
            graph.add_node(format!("{label}/wp{k}"), NodeRole::CruiseWaypoint, None, at(k as f64 / links as f64), one);
        graph.add_edge_with_length(*nodes.last().unwrap(), n, link_len, one);
        nodes.push(n);
    }
    graph.add_edge_with_length(*nodes.last().unwrap(), destination.holding_unit, link_len, one);
    graph.add_edge_with_length(origin.departure_fix, exit, link_len.min(FEET_PER_MILE), one);
    nodes.push(destination.holding_unit);
    Ok(AirspaceRoute {
        origin: origin.id.clone(),
        destination: destination.id.clone(),
        distance_mi,
        nodes,
        link_length_ft: link_len,
    })
}

/// One vertiport to place in a network.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSpec {
    pub id: String,
    pub site: Position,
    pub pads: u32,
    pub tlofs: u32,
    pub chargers: u32,
}

/// Vertiport surfaces plus a cruise chain for every ordered pair of sites
/// with a leg between them.
#[derive(Clone, Debug)]
pub struct Network {
    pub graph: ResourceGraph,
    pub vertiports: Vec<VertiportLayout>,
    pub routes: Vec<AirspaceRoute>,
}

impl Network {
    /// `legs` are undirected `(a, b, distance_mi)` triples over `sites` indices.
    pub fn build(
        sites: &[SiteSpec],
        legs: &[(usize, usize, f64)],
        geometry: &CloverGeometry,
        spacing_mi: f64,
    ) -> Result<Network, TopologyError> {
        let mut graph = ResourceGraph::new();
        let mut vertiports = Vec::with_capacity(sites.len());
        for s in sites {
            if vertiports.iter().any(|v: &VertiportLayout| v.id == s.id) {
                return Err(TopologyError::CoincidentVertiports(s.id.clone(), s.id.clone()));
            }
            let v = build_clover_vertiport(&s.id, s.site, s.pads, s.tlofs, geometry)?;
            let mut layout = v.layout;
            layout.shift(graph.absorb(&v.graph));
            layout.chargers = s.chargers;
            vertiports.push(layout);
        }
        let mut routes = Vec::new();
        for &(a, b, d) in legs {
            for (from, to) in [(a, b), (b, a)] {
                let (o, t) = (vertiports.get(from), vertiports.get(to));
                let (Some(o), Some(t)) = (o, t) else {
                    return Err(TopologyError::UnknownVertiport(format!("#{}", from.max(to))));
                };
                routes.push(build_airspace(&mut graph, o, t, d, spacing_mi, geometry.holding_altitude_ft)?);
            }
        }
        Ok(Network { graph, vertiports, routes })
    }

    pub fn vertiport_index(&self, id: &str) -> Option<usize> {
        self.vertiports.iter().position(|v| v.id == id)
    }

    pub fn route(&self, from: usize, to: usize) -> Option<&AirspaceRoute> {
        let (o, d) = (&self.vertiports[from].id, &self.vertiports[to].id);
        self.routes.iter().find(|r| &r.origin == o && &r.destination == d)
    }

    /// Longest shortest taxi path from any pad to any TLOF group at a vertiport.
    pub fn taxi_length_ft(&self, vertiport: usize) -> Result<f64, TopologyError> {
        let layout = &self.vertiports[vertiport];
        let mut longest = 0.0f64;
        for &pad in &layout.pads {
            for group in &layout.exclusivity_groups {
                longest = longest.max(shortest_route(&self.graph, pad, group[0])?.length_ft);
            }
        }
        Ok(longest)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub link_lengths_ft: Vec<f64>,
    pub length_ft: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: NodeId,
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

const LENGTH_TOLERANCE_FT: f64 = 1e-6;

/// Minimum-length route. Among equally short routes the one whose node-id
/// sequence is lexicographically smallest wins.
pub fn shortest_route(graph: &ResourceGraph, from: NodeId, to: NodeId) -> Result<Route, TopologyError> {
    for n in [from, to] {
        if !graph.contains(n) {
            return Err(TopologyError::UnknownNode(n));
        }
    }
    // Distances to the target let the forward walk pick the smallest
    // neighbour that still lies on some shortest path.
    let mut dist = vec![f64::INFINITY; graph.node_count()];
    let mut heap = BinaryHeap::new();
    dist[to.0 as usize] = 0.0;
    heap.push(Frontier { dist: 0.0, node: to });
    while let Some(Frontier { dist: d, node }) = heap.pop() {
        if d > dist[node.0 as usize] {
            continue;
        }
        for &(next, e) in graph.neighbors(node) {
            let nd = d + graph.edge(e).length_ft;
            if nd < dist[next.0 as usize] {
                dist[next.0 as usize] = nd;
                heap.push(Frontier { dist: nd, node: next });
            }
        }
    }
    if dist[from.0 as usize].is_infinite() {
        return Err(TopologyError::NoRoute { from, to });
    }

    let mut nodes = vec![from];
    let mut edges = Vec::new();
    let mut link_lengths_ft = Vec::new();
    let mut at = from;
    while at != to {
        let here = dist[at.0 as usize];
        let (next, e) = graph
            .neighbors(at)
            .iter()
            .copied()
            .filter(|&(n, e)| {
                let via = graph.edge(e).length_ft + dist[n.0 as usize];
                dist[n.0 as usize] < here && (via - here).abs() <= LENGTH_TOLERANCE_FT * here.max(1.0)
            })
            .min_by_key(|&(n, _)| n)
            .expect("a shortest-path successor always exists");
        nodes.push(next);
        edges.push(e);
        link_lengths_ft.push(graph.edge(e).length_ft);
        at = next;
    }
    let length_ft = link_lengths_ft.iter().sum();
    Ok(Route { nodes, edges, link_lengths_ft, length_ft })
}

/// An entity currently travelling: `path[0]` is where it is now.
#[derive(Clone, Debug, PartialEq)]
pub struct Movement {
    pub entity: EntityId,
    pub path: Vec<NodeId>,
}

/// Snapshot of who is where on a surface.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Occupancy {
    pub moving: Vec<Movement>,
    pub stationary: Vec<(EntityId, NodeId)>,
}

/// True when `route` can be flown or taxied without a head-on meeting or
/// running into an entity that will stay put. Following an entity that moves
/// the same way is allowed; capacity-one links make overtaking impossible.
pub fn conflict_free(route: &Route, occupancy: &Occupancy) -> bool {
    let ahead = &route.nodes[1..];
    if occupancy.stationary.iter().any(|(_, n)| ahead.contains(n)) {
        return false;
    }
    for m in &occupancy.moving {
        // Opposite traversal of any shared link is a head-on conflict.
        for w in m.path.windows(2) {
            if route.nodes.windows(2).any(|r| r[0] == w[1] && r[1] == w[0]) {
                return false;
            }
        }
        // An entity whose trip ends on our path will sit there.
        if let Some(last) = m.path.last() {
            if ahead.contains(last) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clover(pads: u32) -> VertiportGraph {
        build_clover_vertiport("A", Position::default(), pads, 1, &CloverGeometry::default()).unwrap()
    }

    #[test]
    fn four_pad_clover_structure() {
        let v = clover(4);
        let l = &v.layout;
        assert_eq!(l.tlofs.len(), 1);
        assert_eq!(l.pads.len(), 4);
        assert_eq!(v.graph.node(l.holding_unit).capacity, Capacity::Unbounded);
        for &p in &l.pads {
            let r = shortest_route(&v.graph, p, l.tlofs[0]).unwrap();
            assert_eq!(r.nodes.len(), 3);
            assert!((r.length_ft - 110.1).abs() < 1e-6);
        }
    }

    #[test]
    fn minimal_clover_is_connected() {
        let v = clover(1);
        assert!(shortest_route(&v.graph, v.layout.pads[0], v.layout.tlofs[0]).is_ok());
    }

    #[test]
    fn ten_pad_junction_degree() {
        let v = clover(10);
        let t = v.layout.tlofs[0];
        let taxi_links =
            v.graph.neighbors(t).iter().filter(|(n, _)| v.graph.node(*n).role == NodeRole::TaxiwayNode).count();
        assert_eq!(taxi_links, 10);
        assert!(v
            .graph
            .nodes()
            .iter()
            .filter(|n| n.role != NodeRole::HoldingUnit)
            .all(|n| n.capacity == Capacity::Finite(1)));
        assert!(v.graph.edges().iter().all(|e| e.capacity == Capacity::Finite(1)));
    }

    #[test]
    fn zero_counts_rejected() {
        let g = CloverGeometry::default();
        assert!(build_clover_vertiport("A", Position::default(), 0, 1, &g).is_err());
        assert!(build_clover_vertiport("A", Position::default(), 3, 0, &g).is_err());
    }

    #[test]
    fn nearby_tlofs_share_a_group() {
        let mut g = CloverGeometry { tlof_ring_radius_ft: 60.0, ..CloverGeometry::default() };
        let v = build_clover_vertiport("A", Position::default(), 4, 2, &g).unwrap();
        assert_eq!(v.layout.exclusivity_groups.len(), 1);
        g.tlof_ring_radius_ft = 150.0;
        let v = build_clover_vertiport("A", Position::default(), 4, 2, &g).unwrap();
        assert_eq!(v.layout.exclusivity_groups.len(), 2);
    }

    #[test]
    fn waypoint_counts() {
        assert_eq!(interior_waypoint_count(12.0, 1.0).unwrap(), 11);
        assert_eq!(interior_waypoint_count(24.0, 1.0).unwrap(), 23);
        assert_eq!(interior_waypoint_count(1.0, 1.0).unwrap(), 0);
        assert!(interior_waypoint_count(0.5, 1.0).is_err());
        assert!(interior_waypoint_count(5.0, 0.0).is_err());
    }

    fn two_sites(distance_mi: f64) -> (ResourceGraph, VertiportLayout, VertiportLayout) {
        let geo = CloverGeometry::default();
        let a = build_clover_vertiport("A", Position::default(), 2, 1, &geo).unwrap();
        let b = build_clover_vertiport("B", Position::new(distance_mi * FEET_PER_MILE, 0.0, 0.0), 2, 1, &geo).unwrap();
        let mut g = ResourceGraph::new();
        let mut la = a.layout.clone();
        la.shift(g.absorb(&a.graph));
        let mut lb = b.layout.clone();
        lb.shift(g.absorb(&b.graph));
        (g, la, lb)
    }

    #[test]
    fn airspace_chain_is_uniform() {
        let (mut g, a, b) = two_sites(24.0);
        let r = build_airspace(&mut g, &a, &b, 24.0, 1.0, 1000.0).unwrap();
        assert_eq!(r.interior_waypoints().len(), 23);
        assert_eq!(*r.nodes.last().unwrap(), b.holding_unit);
        for w in r.nodes.windows(2) {
            let e = g.edge_between(w[0], w[1]).unwrap();
            assert!((g.edge(e).length_ft - FEET_PER_MILE).abs() < 1e-6);
        }
        let (mut g, a, b) = two_sites(1.0);
        let r = build_airspace(&mut g, &a, &b, 1.0, 1.0, 1000.0).unwrap();
        assert!(r.interior_waypoints().is_empty());
        assert!(g.edge_between(r.nodes[0], b.holding_unit).is_some());
    }

    #[test]
    fn network_has_both_directions() {
        let geo = CloverGeometry::default();
        let site = |id: &str, x: f64| SiteSpec {
            id: id.into(),
            site: Position::new(x, 0.0, 0.0),
            pads: 3,
            tlofs: 1,
            chargers: 3,
        };
        let n = Network::build(&[site("A", 0.0), site("B", 12.0 * FEET_PER_MILE)], &[(0, 1, 12.0)], &geo, 1.0).unwrap();
        let ab = n.route(0, 1).unwrap();
        let ba = n.route(1, 0).unwrap();
        assert_eq!(ab.interior_waypoints().len(), 11);
        assert_eq!(*ab.nodes.last().unwrap(), n.vertiports[1].holding_unit);
        assert_eq!(*ba.nodes.last().unwrap(), n.vertiports[0].holding_unit);
        for l in &n.vertiports {
            for &p in &l.pads {
                assert!(shortest_route(&n.graph, p, l.tlofs[0]).is_ok());
            }
        }
    }

    #[test]
    fn coincident_vertiports_rejected() {
        let (mut g, a, _) = two_sites(5.0);
        let err = build_airspace(&mut g, &a, &a.clone(), 5.0, 1.0, 1000.0).unwrap_err();
        assert!(matches!(err, TopologyError::CoincidentVertiports(..)));
    }

    #[test]
    fn same_node_route() {
        let v = clover(2);
        let r = shortest_route(&v.graph, v.layout.pads[0], v.layout.pads[0]).unwrap();
        assert_eq!(r.nodes, vec![v.layout.pads[0]]);
        assert_eq!(r.length_ft, 0.0);
    }

    #[test]
    fn disconnected_pair_has_no_route() {
        let mut g = ResourceGraph::new();
        let a = g.add_node("a", NodeRole::TaxiwayNode, None, Position::default(), Capacity::Finite(1));
        let b = g.add_node("b", NodeRole::TaxiwayNode, None, Position::new(1.0, 0.0, 0.0), Capacity::Finite(1));
        assert!(matches!(shortest_route(&g, a, b), Err(TopologyError::NoRoute { .. })));
    }

    #[test]
    fn ties_prefer_smaller_ids() {
        // Diamond: 0-1-3 and 0-2-3 have equal length.
        let mut g = ResourceGraph::new();
        let one = Capacity::Finite(1);
        let n: Vec<NodeId> = (0..4)
            .map(|i| g.add_node(format!("n{i}"), NodeRole::TaxiwayNode, None, Position::default(), one))
            .collect();
        g.add_edge_with_length(n[0], n[2], 1.0, one);
        g.add_edge_with_length(n[0], n[1], 1.0, one);
        g.add_edge_with_length(n[2], n[3], 1.0, one);
        g.add_edge_with_length(n[1], n[3], 1.0, one);
        let r = shortest_route(&g, n[0], n[3]).unwrap();
        assert_eq!(r.nodes, vec![n[0], n[1], n[3]]);
    }

    fn chain3() -> (ResourceGraph, [NodeId; 3]) {
        let mut g = ResourceGraph::new();
        let one = Capacity::Finite(1);
        let a = g.add_node("a", NodeRole::TaxiwayNode, None, Position::new(0.0, 0.0, 0.0), one);
        let b = g.add_node("b", NodeRole::TaxiwayNode, None, Position::new(10.0, 0.0, 0.0), one);
        let c = g.add_node("c", NodeRole::TaxiwayNode, None, Position::new(20.0, 0.0, 0.0), one);
        g.add_edge(a, b, one);
        g.add_edge(b, c, one);
        (g, [a, b, c])
    }

    #[test]
    fn empty_surface_is_conflict_free() {
        let (g, [a, _, c]) = chain3();
        let r = shortest_route(&g, a, c).unwrap();
        assert!(conflict_free(&r, &Occupancy::default()));
    }

    #[test]
    fn head_on_rejected() {
        let (g, [a, b, _]) = chain3();
        let r = shortest_route(&g, b, a).unwrap();
        let occ = Occupancy { moving: vec![Movement { entity: EntityId(1), path: vec![a, b] }], stationary: vec![] };
        assert!(!conflict_free(&r, &occ));
    }

    #[test]
    fn parked_entity_blocks() {
        let (g, [a, b, c]) = chain3();
        let r = shortest_route(&g, a, c).unwrap();
        let occ = Occupancy { moving: vec![], stationary: vec![(EntityId(1), b)] };
        assert!(!conflict_free(&r, &occ));
    }

    /// Enumerates every interleaving of unit moves on a capacity-one chain:
    /// returns (any capacity violation, every schedule finishes).
    fn interleavings(leader: &[usize], follower: &[usize]) -> (bool, bool) {
        fn go(l: &[usize], f: &[usize], li: usize, fi: usize, violation: &mut bool, stuck: &mut bool) {
            if l[li] == f[fi] {
                *violation = true;
            }
            let l_done = li + 1 == l.len();
            let f_done = fi + 1 == f.len();
            if l_done && f_done {
                return;
            }
            let mut moved = false;
            if !l_done && l[li + 1] != f[fi] {
                moved = true;
                go(l, f, li + 1, fi, violation, stuck);
            }
            if !f_done && f[fi + 1] != l[li] {
                moved = true;
                go(l, f, li, fi + 1, violation, stuck);
            }
            if !moved {
                *stuck = true;
            }
        }
        let (mut violation, mut stuck) = (false, false);
        go(leader, follower, 0, 0, &mut violation, &mut stuck);
        (violation, !stuck)
    }

    #[test]
    fn follower_behind_leader_accepted() {
        let (g, [a, b, c]) = chain3();
        let route = shortest_route(&g, a, b).unwrap();
        let occ = Occupancy { moving: vec![Movement { entity: EntityId(1), path: vec![b, c] }], stationary: vec![] };
        assert!(conflict_free(&route, &occ));
        let (violation, all_finish) = interleavings(&[1, 2], &[0, 1]);
        assert!(!violation && all_finish);
        // Same oracle agrees that the head-on case can deadlock.
        let (_, all_finish) = interleavings(&[0, 1], &[1, 0]);
        assert!(!all_finish);
    }

    #[test]
    fn graph_dump_has_headers() {
        let v = clover(2);
        let mut n = Vec::new();
        v.graph.write_nodes_csv(&mut n).unwrap();
        let mut e = Vec::new();
        v.graph.write_edges_csv(&mut e).unwrap();
        assert!(String::from_utf8(n).unwrap().starts_with("id,label,role,vertiport,x_ft,y_ft,alt_ft,capacity\n"));
        assert_eq!(String::from_utf8(e).unwrap().lines().count(), 1 + v.graph.edges().len());
    }
}
