use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::parse::{ComponentNode, NodeMap};
use super::registry::Registry;
use super::value::{ConfigValue, InterfaceId, ParamKind};

/// A single configuration defect found by [`build_graph`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown component ({interface}, {variant})")]
    UnknownComponent {
        node: String,
        interface: InterfaceId,
        variant: String,
    },
    #[error("param '{param}' references undefined node '{target}'")]
    DanglingReference {
        node: String,
        param: String,
        target: String,
    },
    #[error("dependency cycle {}", .path.join(" -> "))]
    Cycle { path: Vec<String> },
    #[error("param '{param}' expects interface '{expected}' but '{target}' implements '{actual}'")]
    InterfaceMismatch {
        node: String,
        param: String,
        target: String,
        expected: InterfaceId,
        actual: InterfaceId,
    },
    #[error("missing required param '{param}'")]
    MissingParam { node: String, param: String },
    #[error("unknown param '{param}'")]
    UnknownParam { node: String, param: String },
    #[error("param '{param}' expects {expected}, found {found}")]
    TypeError {
        node: String,
        param: String,
        expected: String,
        found: String,
    },
}

impl GraphError {
    /// Node the diagnostic is attributed to. Cycles are attributed to the
    /// first node on the reported path.
    pub fn node_id(&self) -> &str {
        match self {
            GraphError::Cycle { path } => path.first().map(String::as_str).unwrap_or(""),
            GraphError::UnknownComponent { node, .. }
            | GraphError::DanglingReference { node, .. }
            | GraphError::InterfaceMismatch { node, .. }
            | GraphError::MissingParam { node, .. }
            | GraphError::UnknownParam { node, .. }
            | GraphError::TypeError { node, .. } => node,
        }
    }
}

/// All defects of one document, in deterministic (node id, param) order.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} configuration error(s); first: {}", .0.len(), .0[0])]
pub struct ValidationErrors(pub Vec<GraphError>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Level {
    Warn,
    Error,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Warn => "WARN",
            Level::Error => "ERROR",
        })
    }
}

/// One line of validator output: `LEVEL node_id: message`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Diagnostic {
    pub level: Level,
    pub node_id: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.level, self.node_id, self.message)
    }
}

impl From<&GraphError> for Diagnostic {
    fn from(e: &GraphError) -> Self {
        Diagnostic {
            level: Level::Error,
            node_id: e.node_id().to_string(),
            message: e.to_string(),
        }
    }
}

/// A reference from `from.param` to node `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub param: String,
}

/// Validated, acyclic interface-level dependency graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGraph {
    nodes: NodeMap,
    edges: Vec<Edge>,
    order: Vec<String>,
}

impl DependencyGraph {
    pub fn nodes(&self) -> &NodeMap {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&ComponentNode> {
        self.nodes.get(id)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Dependencies first; ties broken by lexicographic node id.
    pub fn topological_order(&self) -> &[String] {
        &self.order
    }

    /// Node ids reachable from `roots` (roots included).
    pub fn closure<'a>(&'a self, roots: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = roots.into_iter().collect();
        while let Some(id) = stack.pop() {
            if let Some((key, node)) = self.nodes.get_key_value(id) {
                if seen.insert(key.as_str()) {
                    stack.extend(node.references().map(|(_, t)| t));
                }
            }
        }
        seen
    }

    /// Warnings for nodes not reachable from any root.
    pub fn unused_node_warnings(&self, roots: &[&str]) -> Vec<Diagnostic> {
        let used = self.closure(roots.iter().copied());
        self.nodes
            .keys()
            .filter(|id| !used.contains(id.as_str()))
            .map(|id| Diagnostic {
                level: Level::Warn,
                node_id: id.clone(),
                message: format!("node is not reachable from root {}", roots.join(", ")),
            })
            .collect()
    }
}

/// Validate parsed nodes against the registry and build the dependency DAG.
///
/// Every defect in the document is collected; no factory is invoked.
pub fn build_graph(
    nodes: NodeMap,
    registry: &Registry,
) -> Result<DependencyGraph, ValidationErrors> {
    let mut errors = Vec::new();
    let mut edges = Vec::new();

    for (id, node) in &nodes {
        for (param, target) in node.references() {
            if nodes.contains_key(target) {
                edges.push(Edge {
                    from: id.clone(),
                    to: target.to_string(),
                    param: param.to_string(),
                });
            } else {
                errors.push(GraphError::DanglingReference {
                    node: id.clone(),
                    param: param.to_string(),
                    target: target.to_string(),
                });
            }
        }

        let Some(descriptor) = registry.get(&node.interface, &node.variant) else {
            errors.push(GraphError::UnknownComponent {
                node: id.clone(),
                interface: node.interface.clone(),
                variant: node.variant.clone(),
            });
            continue;
        };

        for param in node.config.keys() {
            if descriptor.param(param).is_none() {
                errors.push(GraphError::UnknownParam {
                    node: id.clone(),
                    param: param.clone(),
                });
            }
        }

        for spec in &descriptor.params {
            let Some(value) = node.config.get(&spec.name) else {
                if spec.required && spec.default.is_none() {
                    errors.push(GraphError::MissingParam {
                        node: id.clone(),
                        param: spec.name.clone(),
                    });
                }
                continue;
            };
            if !spec.kind.accepts(value) {
                let found = match value {
                    ConfigValue::List(_) if spec.kind == ParamKind::List => {
                        "list containing a reference".to_string()
                    }
                    other => other.type_name().to_string(),
                };
                errors.push(GraphError::TypeError {
                    node: id.clone(),
                    param: spec.name.clone(),
                    expected: spec.kind.to_string(),
                    found,
                });
                continue;
            }
            if let (ParamKind::Dependency(expected), ConfigValue::Ref(target)) = (&spec.kind, value)
            {
                if let Some(target_node) = nodes.get(target) {
                    if &target_node.interface != expected {
                        errors.push(GraphError::InterfaceMismatch {
                            node: id.clone(),
                            param: spec.name.clone(),
                            target: target.clone(),
                            expected: expected.clone(),
                            actual: target_node.interface.clone(),
                        });
                    }
                }
            }
        }
    }

    edges.sort();
    let order = match topological_order(&nodes, &edges) {
        Ok(order) => order,
        Err(path) => {
            errors.push(GraphError::Cycle { path });
            Vec::new()
        }
    };

    if !errors.is_empty() {
        errors.sort_by(|a, b| a.node_id().cmp(b.node_id()));
        return Err(ValidationErrors(errors));
    }
    Ok(DependencyGraph {
        nodes,
        edges,
        order,
    })
}

/// Kahn's algorithm over "depends on" edges: a node becomes ready once all of
/// its targets are placed; the smallest ready id goes first. On failure the
/// returned path is one cycle, starting and ending at the same node.
fn topological_order(nodes: &NodeMap, edges: &[Edge]) -> Result<Vec<String>, Vec<String>> {
    let mut pending: BTreeMap<&str, usize> = nodes.keys().map(|k| (k.as_str(), 0)).collect();
    let mut dependents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in edges {
        // Two params may reference the same target; count the pair once.
        if deps
            .entry(e.from.as_str())
            .or_default()
            .insert(e.to.as_str())
        {
            *pending
                .get_mut(e.from.as_str())
                .expect("edge source is a node") += 1;
            dependents
                .entry(e.to.as_str())
                .or_default()
                .push(e.from.as_str());
        }
    }

    let mut ready: BTreeSet<&str> = pending
        .iter()
        .filter(|(_, &n)| n == 0)
        .map(|(&k, _)| k)
        .collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.to_string());
        for &d in dependents.get(next).map(Vec::as_slice).unwrap_or(&[]) {
            let count = pending.get_mut(d).expect("dependent is a node");
            *count -= 1;
            if *count == 0 {
                ready.insert(d);
            }
        }
    }
    if order.len() == nodes.len() {
        return Ok(order);
    }

    // Every unplaced node still has an unplaced dependency, so walking
    // smallest unplaced dependencies from the smallest unplaced node must
    // revisit a node.
    let placed: BTreeSet<&str> = order.iter().map(String::as_str).collect();
    let start = *pending
        .keys()
        .find(|k| !placed.contains(*k))
        .expect("an unplaced node exists");
    let mut path = vec![start];
    let mut position: BTreeMap<&str, usize> = BTreeMap::from([(start, 0)]);
    let mut current = start;
    loop {
        current = *deps[current]
            .iter()
            .find(|t| !placed.contains(*t))
            .expect("unplaced node has an unplaced dependency");
        if let Some(&first) = position.get(current) {
            let mut cycle: Vec<String> = path[first..].iter().map(|s| s.to_string()).collect();
            cycle.push(current.to_string());
            return Err(cycle);
        }
        position.insert(current, path.len());
        path.push(current);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config_graph::{parse_config, FactoryDescriptor, ParamSpec};

    fn registry() -> Registry {
        let mut reg = Registry::new();
        reg.register(
            FactoryDescriptor::builder("node", "link")
                .param(ParamSpec::optional(
                    "a",
                    ParamKind::Dependency("node".into()),
                ))
                .param(ParamSpec::optional(
                    "b",
                    ParamKind::Dependency("node".into()),
                ))
                .construct(|_| Ok(())),
        )
        .unwrap();
        reg
    }

    #[test]
    fn two_node_cycle_path() {
        let text = "A: {interface: node, variant: link, config: {a: !ref B}}\nB: {interface: node, variant: link, config: {a: !ref A}}";
        let err = build_graph(parse_config(text).unwrap(), &registry()).unwrap_err();
        assert_eq!(
            err.0,
            vec![GraphError::Cycle {
                path: vec!["A".into(), "B".into(), "A".into()]
            }]
        );
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let text = "A: {interface: node, variant: link, config: {a: !ref A}}";
        let err = build_graph(parse_config(text).unwrap(), &registry()).unwrap_err();
        assert_eq!(
            err.0,
            vec![GraphError::Cycle {
                path: vec!["A".into(), "A".into()]
            }]
        );
    }

    #[test]
    fn diamond_edges_and_order() {
        let text = "
A: {interface: node, variant: link, config: {a: !ref B, b: !ref C}}
B: {interface: node, variant: link, config: {a: !ref D}}
C: {interface: node, variant: link, config: {a: !ref D}}
D: {interface: node, variant: link}
";
        let g = build_graph(parse_config(text).unwrap(), &registry()).unwrap();
        assert_eq!(g.nodes().len(), 4);
        let pairs: Vec<(&str, &str)> = g
            .edges()
            .iter()
            .map(|e| (e.from.as_str(), e.to.as_str()))
            .collect();
        assert_eq!(pairs, vec![("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")]);
        assert_eq!(g.topological_order(), ["D", "B", "C", "A"]);
    }

    #[test]
    fn dangling_reference_is_a_build_error() {
        let text = "A: {interface: node, variant: link, config: {a: !ref missing_node}}";
        let nodes = parse_config(text).unwrap();
        let err = build_graph(nodes, &registry()).unwrap_err();
        assert!(
            matches!(&err.0[0], GraphError::DanglingReference { target, .. } if target == "missing_node")
        );
    }

    #[test]
    fn unused_nodes_warn() {
        let text = "A: {interface: node, variant: link, config: {a: !ref B}}\nB: {interface: node, variant: link}\nZ: {interface: node, variant: link}";
        let g = build_graph(parse_config(text).unwrap(), &registry()).unwrap();
        let warnings = g.unused_node_warnings(&["A"]);
        assert_eq!(warnings.len(), 1);
        assert_eq!(
            warnings[0].to_string(),
            "WARN Z: node is not reachable from root A"
        );
    }
}
