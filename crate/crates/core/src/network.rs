//! Thermodynamical material networks.
//!
//! A network is a set of compartments `c^k_{i,j}`. Node compartments store,
//! use or transform the target material and satisfy `i = j = k`; arc
//! compartments move it from node `i` to node `j` (`i != j`). Validation never
//! fails: problems come back as data in a [`ValidationReport`].
//!
//! Networks are read from and written to a small TOML document:
//!
//! ```toml
//! material = "plastic"
//! n_v = 3          # optional declared counts, checked by validation
//! n_a = 3
//! n_c = 6
//!
//! [[compartment]]
//! k = 1
//! i = 1
//! j = 1
//! kind = "node"
//! roles = ["nonrenewable-reservoir"]
//! label = "raw material extraction"
//! ```

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// The `(k, i, j)` index triple of a compartment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CompartmentId {
    pub k: u32,
    pub i: u32,
    pub j: u32,
}

impl CompartmentId {
    pub fn node(k: u32) -> Self {
        Self { k, i: k, j: k }
    }

    pub fn arc(k: u32, from: u32, to: u32) -> Self {
        Self { k, i: from, j: to }
    }
}

impl fmt::Display for CompartmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c^{}_{{{},{}}}", self.k, self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompartmentKind {
    Node,
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    NonrenewableReservoir,
    Landfill,
    Incinerator,
    NaturalEnvironment,
    Process,
    Use,
    Transport,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::NonrenewableReservoir,
        Role::Landfill,
        Role::Incinerator,
        Role::NaturalEnvironment,
        Role::Process,
        Role::Use,
        Role::Transport,
    ];

    /// Locations where material entering counts as finite-time sustainable.
    pub fn is_terminal(self) -> bool {
        matches!(self, Role::Landfill | Role::Incinerator | Role::NaturalEnvironment)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::NonrenewableReservoir => "nonrenewable-reservoir",
            Role::Landfill => "landfill",
            Role::Incinerator => "incinerator",
            Role::NaturalEnvironment => "natural-environment",
            Role::Process => "process",
            Role::Use => "use",
            Role::Transport => "transport",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "CompartmentRecord", into = "CompartmentRecord")]
pub struct Compartment {
    pub id: CompartmentId,
    pub kind: CompartmentKind,
    pub roles: BTreeSet<Role>,
    pub label: String,
}

/// Flat on-disk form of a compartment.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompartmentRecord {
    k: u32,
    i: u32,
    j: u32,
    kind: CompartmentKind,
    #[serde(default)]
    roles: BTreeSet<Role>,
    #[serde(default)]
    label: String,
}

impl From<CompartmentRecord> for Compartment {
    fn from(r: CompartmentRecord) -> Self {
        Self {
            id: CompartmentId { k: r.k, i: r.i, j: r.j },
            kind: r.kind,
            roles: r.roles,
            label: r.label,
        }
    }
}

impl From<Compartment> for CompartmentRecord {
    fn from(c: Compartment) -> Self {
        Self {
            k: c.id.k,
            i: c.id.i,
            j: c.id.j,
            kind: c.kind,
            roles: c.roles,
            label: c.label,
        }
    }
}

impl Compartment {
    pub fn node(k: u32, roles: &[Role], label: impl Into<String>) -> Self {
        Self {
            id: CompartmentId::node(k),
            kind: CompartmentKind::Node,
            roles: roles.iter().copied().collect(),
            label: label.into(),
        }
    }

    pub fn arc(k: u32, from: u32, to: u32, label: impl Into<String>) -> Self {
        Self {
            id: CompartmentId::arc(k, from, to),
            kind: CompartmentKind::Arc,
            roles: BTreeSet::from([Role::Transport]),
            label: label.into(),
        }
    }

    pub fn k(&self) -> u32 {
        self.id.k
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }
}

/// A thermodynamical material network.
///
/// `n_v`, `n_a` and `n_c` are the declared counts. [`Tmn::new`] derives them
/// from the compartments; a parsed file may declare different values, which
/// [`validate_tmn`] then reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tmn {
    pub material: String,
    pub compartments: Vec<Compartment>,
    pub n_v: usize,
    pub n_a: usize,
    pub n_c: usize,
}

impl Tmn {
    pub fn new(material: impl Into<String>, compartments: Vec<Compartment>) -> Self {
        let n_v = compartments
            .iter()
            .filter(|c| c.kind == CompartmentKind::Node)
            .count();
        let n_a = compartments.len() - n_v;
        Self {
            material: material.into(),
            compartments,
            n_v,
            n_a,
            n_c: n_v + n_a,
        }
    }

    pub fn get(&self, k: u32) -> Option<&Compartment> {
        self.compartments.iter().find(|c| c.id.k == k)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Compartment> {
        self.compartments
            .iter()
            .filter(|c| c.kind == CompartmentKind::Node)
    }

    pub fn arcs(&self) -> impl Iterator<Item = &Compartment> {
        self.compartments
            .iter()
            .filter(|c| c.kind == CompartmentKind::Arc)
    }

    /// The solid-waste network: extraction, robotic sorting and incineration,
    /// with first use (`c^4_{1,2}`), recycling plus second use (`c^5_{2,3}`)
    /// and truck transport of unsorted waste (`c^6_{2,3}`).
    pub fn solid_waste() -> Self {
        Self::new(
            "solid waste",
            vec![
                Compartment::node(1, &[Role::NonrenewableReservoir], "raw material extraction"),
                Compartment::node(2, &[Role::Process], "robotic waste sorting"),
                Compartment::node(3, &[Role::Incinerator], "incinerator"),
                Compartment::arc(4, 1, 2, "first use"),
                Compartment::arc(5, 2, 3, "recycling and second use"),
                Compartment::arc(6, 2, 3, "truck transport of unsorted waste"),
            ],
        )
    }

    /// The net-zero CO2 network: emitter, atmosphere, microalgae remover.
    pub fn net_zero() -> Self {
        Self::new(
            "CO2",
            vec![
                Compartment::node(1, &[Role::Process], "CO2 emitter"),
                Compartment::node(2, &[Role::NaturalEnvironment], "atmosphere"),
                Compartment::node(3, &[Role::Process], "microalgae cultivation"),
                Compartment::arc(4, 1, 2, "emission"),
                Compartment::arc(5, 2, 3, "uptake"),
            ],
        )
    }

    pub fn from_toml(text: &str) -> Result<Self, NetworkError> {
        let file: TmnFile = toml::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        let derived = Tmn::new(file.material, file.compartment);
        Ok(Tmn {
            n_v: file.n_v.unwrap_or(derived.n_v),
            n_a: file.n_a.unwrap_or(derived.n_a),
            n_c: file.n_c.unwrap_or(derived.n_c),
            ..derived
        })
    }

    pub fn to_toml(&self) -> String {
        let file = TmnFile {
            material: self.material.clone(),
            n_v: Some(self.n_v),
            n_a: Some(self.n_a),
            n_c: Some(self.n_c),
            compartment: self.compartments.clone(),
        };
        toml::to_string(&file).expect("network serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TmnFile {
    material: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_v: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_a: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_c: Option<usize>,
    #[serde(default)]
    compartment: Vec<Compartment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId { k: u32 },
    NonPositiveIndex { k: u32 },
    NodeIndexRule { k: u32, i: u32, j: u32 },
    ArcSelfLoop { k: u32, node: u32 },
    DanglingArcEndpoint { k: u32, endpoint: u32 },
    RoleMismatch { k: u32, role: Role },
    CountMismatch { field: &'static str, declared: usize, actual: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { k } => write!(f, "duplicate compartment identifier k={k}"),
            Violation::NonPositiveIndex { k } => {
                write!(f, "compartment k={k} has a non-positive index")
            }
            Violation::NodeIndexRule { k, i, j } => {
                write!(f, "node compartment k={k} must have i = j = k (got i={i}, j={j})")
            }
            Violation::ArcSelfLoop { k, node } => {
                write!(f, "arc compartment k={k} is a self-loop on node {node}")
            }
            Violation::DanglingArcEndpoint { k, endpoint } => {
                write!(f, "dangling arc endpoint: arc k={k} references missing node {endpoint}")
            }
            Violation::RoleMismatch { k, role } => {
                write!(f, "compartment k={k} cannot carry role {role}")
            }
            Violation::CountMismatch { field, declared, actual } => {
                write!(f, "count mismatch: {field} declared {declared}, actual {actual}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// The node set splits into more than one weakly connected component.
    Disconnected { components: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Disconnected { components } => {
                write!(f, "network is not weakly connected ({components} components)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
    pub n_v: usize,
    pub n_a: usize,
    pub n_c: usize,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            write!(f, "ok (n_v={}, n_a={}, n_c={})", self.n_v, self.n_a, self.n_c)?;
        } else {
            write!(f, "{} violation(s):", self.violations.len())?;
            for v in &self.violations {
                write!(f, "\n  - {v}")?;
            }
        }
        for w in &self.warnings {
            write!(f, "\n  warning: {w}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
    #[error("network file: {0}")]
    Parse(String),
}

pub fn validate_tmn(tmn: &Tmn) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for c in &tmn.compartments {
        if !seen.insert(c.id.k) {
            violations.push(Violation::DuplicateId { k: c.id.k });
        }
    }

    let node_ks: BTreeSet<u32> = tmn.nodes().map(|c| c.id.k).collect();

    for c in &tmn.compartments {
        let CompartmentId { k, i, j } = c.id;
        if k == 0 || i == 0 || j == 0 {
            violations.push(Violation::NonPositiveIndex { k });
        }
        match c.kind {
            CompartmentKind::Node => {
                if !(i == k && j == k) {
                    violations.push(Violation::NodeIndexRule { k, i, j });
                }
                if c.has_role(Role::Transport) {
                    violations.push(Violation::RoleMismatch { k, role: Role::Transport });
                }
            }
            CompartmentKind::Arc => {
                if i == j {
                    violations.push(Violation::ArcSelfLoop { k, node: i });
                }
                for endpoint in [i, j] {
                    if !node_ks.contains(&endpoint) {
                        violations.push(Violation::DanglingArcEndpoint { k, endpoint });
                    }
                }
                for role in c.roles.iter().filter(|r| **r != Role::Transport) {
                    violations.push(Violation::RoleMismatch { k, role: *role });
                }
            }
        }
    }

    let derived = Tmn::new(String::new(), tmn.compartments.clone());
    for (field, declared, actual) in [
        ("n_v", tmn.n_v, derived.n_v),
        ("n_a", tmn.n_a, derived.n_a),
        ("n_c", tmn.n_c, derived.n_c),
    ] {
        if declared != actual {
            violations.push(Violation::CountMismatch { field, declared, actual });
        }
    }

    let mut warnings = Vec::new();
    let components = weak_components(tmn, &node_ks);
    if components > 1 {
        warnings.push(Warning::Disconnected { components });
    }

    ValidationReport {
        violations,
        warnings,
        n_v: derived.n_v,
        n_a: derived.n_a,
        n_c: derived.n_c,
    }
}

fn weak_components(tmn: &Tmn, node_ks: &BTreeSet<u32>) -> usize {
    let index: BTreeMap<u32, usize> = node_ks.iter().enumerate().map(|(n, k)| (*k, n)).collect();
    let mut parent: Vec<usize> = (0..index.len()).collect();

    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }

    for arc in tmn.arcs() {
        if let (Some(&a), Some(&b)) = (index.get(&arc.id.i), index.get(&arc.id.j)) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    (0..parent.len()).filter(|&n| find(&mut parent, n) == n).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DigraphEdge {
    pub k: u32,
    pub from: u32,
    pub to: u32,
}

/// Compartmental digraph: node compartments as vertices, arc compartments as
/// flow-directed edges keyed by `k` (parallel edges allowed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompartmentalDigraph {
    pub nodes: Vec<u32>,
    pub edges: Vec<DigraphEdge>,
}

impl CompartmentalDigraph {
    pub fn out_edges(&self, node: u32) -> impl Iterator<Item = &DigraphEdge> {
        self.edges.iter().filter(move |e| e.from == node)
    }

    pub fn in_edges(&self, node: u32) -> impl Iterator<Item = &DigraphEdge> {
        self.edges.iter().filter(move |e| e.to == node)
    }
}

pub fn compartmental_digraph(tmn: &Tmn) -> Result<CompartmentalDigraph, NetworkError> {
    let report = validate_tmn(tmn);
    if !report.is_ok() {
        return Err(NetworkError::Invalid(report));
    }
    let mut nodes: Vec<u32> = tmn.nodes().map(|c| c.id.k).collect();
    nodes.sort_unstable();
    let mut edges: Vec<DigraphEdge> = tmn
        .arcs()
        .map(|c| DigraphEdge { k: c.id.k, from: c.id.i, to: c.id.j })
        .collect();
    edges.sort_unstable_by_key(|e| e.k);
    Ok(CompartmentalDigraph { nodes, edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Exiting,
    Entering,
}

/// Whether mass crossing `endpoint` in `direction` is finite-time
/// sustainable: it leaves a nonrenewable reservoir, or it enters a landfill,
/// an incinerator or the natural environment.
pub fn is_finite_time_sustainable(endpoint: &Compartment, direction: Direction) -> bool {
    match direction {
        Direction::Exiting => endpoint.has_role(Role::NonrenewableReservoir),
        Direction::Entering => endpoint.roles.iter().any(|r| r.is_terminal()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solid_network_is_valid() {
        let tmn = Tmn::solid_waste();
        let report = validate_tmn(&tmn);
        assert!(report.is_ok(), "{report}");
        assert_eq!((report.n_v, report.n_a, report.n_c), (3, 3, 6));
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn empty_network_is_valid() {
        let tmn = Tmn::new("nothing", vec![]);
        let report = validate_tmn(&tmn);
        assert!(report.is_ok());
        assert_eq!(report.n_c, 0);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn dangling_endpoint_is_reported() {
        let mut tmn = Tmn::solid_waste();
        tmn.compartments[3] = Compartment::arc(4, 1, 5, "nowhere");
        let report = validate_tmn(&tmn);
        assert_eq!(
            report.violations,
            vec![Violation::DanglingArcEndpoint { k: 4, endpoint: 5 }]
        );
        assert!(report.violations[0].to_string().contains("dangling arc endpoint"));
    }

    #[test]
    fn role_rules() {
        let mut tmn = Tmn::net_zero();
        tmn.compartments[0].roles.insert(Role::Transport);
        tmn.compartments[3].roles.insert(Role::Landfill);
        let report = validate_tmn(&tmn);
        assert_eq!(
            report.violations,
            vec![
                Violation::RoleMismatch { k: 1, role: Role::Transport },
                Violation::RoleMismatch { k: 4, role: Role::Landfill },
            ]
        );
    }

    #[test]
    fn zero_index_rejected() {
        let tmn = Tmn::new("x", vec![Compartment::node(0, &[], "zero")]);
        let report = validate_tmn(&tmn);
        assert_eq!(report.violations, vec![Violation::NonPositiveIndex { k: 0 }]);
    }

    #[test]
    fn disconnected_is_only_a_warning() {
        let tmn = Tmn::new(
            "x",
            vec![
                Compartment::node(1, &[], "a"),
                Compartment::node(2, &[], "b"),
                Compartment::node(3, &[], "c"),
                Compartment::arc(4, 1, 2, ""),
            ],
        );
        let report = validate_tmn(&tmn);
        assert!(report.is_ok());
        assert_eq!(report.warnings, vec![Warning::Disconnected { components: 2 }]);
    }

    #[test]
    fn digraph_of_solid_network_keeps_parallel_arcs() {
        let g = compartmental_digraph(&Tmn::solid_waste()).unwrap();
        assert_eq!(g.nodes, vec![1, 2, 3]);
        assert_eq!(
            g.edges,
            vec![
                DigraphEdge { k: 4, from: 1, to: 2 },
                DigraphEdge { k: 5, from: 2, to: 3 },
                DigraphEdge { k: 6, from: 2, to: 3 },
            ]
        );
        assert_eq!(g.out_edges(2).count(), 2);
        assert_eq!(g.in_edges(3).count(), 2);
    }

    #[test]
    fn digraph_of_net_zero_and_single_node() {
        let g = compartmental_digraph(&Tmn::net_zero()).unwrap();
        assert_eq!(g.nodes, vec![1, 2, 3]);
        assert_eq!(
            g.edges,
            vec![DigraphEdge { k: 4, from: 1, to: 2 }, DigraphEdge { k: 5, from: 2, to: 3 }]
        );

        let single = Tmn::new("x", vec![Compartment::node(1, &[Role::Use], "only")]);
        let g = compartmental_digraph(&single).unwrap();
        assert_eq!(g.nodes, vec![1]);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn digraph_rejects_invalid() {
        let tmn = Tmn::new("x", vec![Compartment::arc(1, 1, 1, "loop")]);
        assert!(matches!(compartmental_digraph(&tmn), Err(NetworkError::Invalid(_))));
    }

    #[test]
    fn finite_time_sustainable_locations() {
        let reservoir = Compartment::node(1, &[Role::NonrenewableReservoir], "");
        let incinerator = Compartment::node(3, &[Role::Incinerator], "");
        let process = Compartment::node(2, &[Role::Process], "");
        let atmosphere = Compartment::node(2, &[Role::NaturalEnvironment], "");
        let landfill = Compartment::node(4, &[Role::Landfill], "");

        assert!(is_finite_time_sustainable(&reservoir, Direction::Exiting));
        assert!(!is_finite_time_sustainable(&reservoir, Direction::Entering));
        assert!(is_finite_time_sustainable(&incinerator, Direction::Entering));
        assert!(!is_finite_time_sustainable(&incinerator, Direction::Exiting));
        assert!(!is_finite_time_sustainable(&process, Direction::Entering));
        assert!(!is_finite_time_sustainable(&process, Direction::Exiting));
        assert!(is_finite_time_sustainable(&atmosphere, Direction::Entering));
        assert!(is_finite_time_sustainable(&landfill, Direction::Entering));
    }

    #[test]
    fn declared_counts_survive_parsing() {
        let text = r#"
material = "x"
n_v = 2
n_a = 0
n_c = 1

[[compartment]]
k = 1
i = 1
j = 1
kind = "node"
"#;
        let tmn = Tmn::from_toml(text).unwrap();
        let report = validate_tmn(&tmn);
        assert_eq!(
            report.violations,
            vec![Violation::CountMismatch { field: "n_v", declared: 2, actual: 1 }]
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "material = \"x\"\n[[compartment]]\nk = 1\ni = 1\nj = 1\nkind = \"node\"\ncolour = \"red\"\n";
        assert!(matches!(Tmn::from_toml(text), Err(NetworkError::Parse(_))));
    }
}
