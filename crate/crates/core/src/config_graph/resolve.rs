use std::any::Any;
use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::graph::DependencyGraph;
use super::registry::{BoxError, Component, ParamValue, Params, Registry};
use super::value::ParamKind;

#[derive(Debug, Error)]
#[error("failed to construct node '{node}': {source}")]
pub struct ConstructionError {
    pub node: String,
    #[source]
    pub source: BoxError,
}

/// The instantiated components of a dependency graph.
pub struct ObjectGraph {
    instances: BTreeMap<String, Component>,
    order: Vec<String>,
    roots: Vec<String>,
}

impl ObjectGraph {
    pub fn get<T: Any + Send + Sync>(&self, node_id: &str) -> Option<Arc<T>> {
        self.instances
            .get(node_id)
            .and_then(|c| c.clone().downcast::<T>().ok())
    }

    pub fn component(&self, node_id: &str) -> Option<&Component> {
        self.instances.get(node_id)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instantiation_order(&self) -> &[String] {
        &self.order
    }

    pub fn roots(&self) -> &[String] {
        &self.roots
    }
}

impl std::fmt::Debug for ObjectGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObjectGraph")
            .field("order", &self.order)
            .field("roots", &self.roots)
            .finish()
    }
}

/// Instantiate every node. Roots are the nodes nothing else references.
pub fn resolve(
    graph: &DependencyGraph,
    registry: &Registry,
) -> Result<ObjectGraph, ConstructionError> {
    let referenced: std::collections::BTreeSet<&str> =
        graph.edges().iter().map(|e| e.to.as_str()).collect();
    let roots: Vec<String> = graph
        .nodes()
        .keys()
        .filter(|id| !referenced.contains(id.as_str()))
        .cloned()
        .collect();
    let all: Vec<&str> = graph
        .topological_order()
        .iter()
        .map(String::as_str)
        .collect();
    instantiate(graph, registry, &all, roots)
}

/// Instantiate only `roots` and their transitive dependencies.
pub fn resolve_roots(
    graph: &DependencyGraph,
    registry: &Registry,
    roots: &[&str],
) -> Result<ObjectGraph, ConstructionError> {
    for root in roots {
        if graph.node(root).is_none() {
            return Err(ConstructionError {
                node: root.to_string(),
                source: "root node is not defined".into(),
            });
        }
    }
    let needed = graph.closure(roots.iter().copied());
    let order: Vec<&str> = graph
        .topological_order()
        .iter()
        .map(String::as_str)
        .filter(|id| needed.contains(id))
        .collect();
    instantiate(
        graph,
        registry,
        &order,
        roots.iter().map(|r| r.to_string()).collect(),
    )
}

fn instantiate(
    graph: &DependencyGraph,
    registry: &Registry,
    order: &[&str],
    roots: Vec<String>,
) -> Result<ObjectGraph, ConstructionError> {
    let mut instances: BTreeMap<String, Component> = BTreeMap::new();
    for &id in order {
        let node = graph.node(id).expect("order lists graph nodes");
        let descriptor = registry
            .get(&node.interface, &node.variant)
            .expect("build_graph checked registration");

        let mut values = BTreeMap::new();
        for spec in &descriptor.params {
            let value = match (node.config.get(&spec.name), &spec.default) {
                (Some(v), _) => v,
                (None, Some(default)) => default,
                (None, None) => continue,
            };
            let value = match (&spec.kind, value) {
                (ParamKind::Dependency(_), super::ConfigValue::Ref(target)) => {
                    ParamValue::Instance(instances[target.as_str()].clone())
                }
                (_, literal) => ParamValue::Literal(literal.clone()),
            };
            values.insert(spec.name.clone(), value);
        }

        let params = Params::new(id.to_string(), values);
        let instance = descriptor
            .construct(&params)
            .map_err(|source| ConstructionError {
                node: id.to_string(),
                source,
            })?;
        log::debug!("constructed {id} ({}, {})", node.interface, node.variant);
        instances.insert(id.to_string(), instance);
    }
    Ok(ObjectGraph {
        instances,
        order: order.iter().map(|s| s.to_string()).collect(),
        roots,
    })
}
