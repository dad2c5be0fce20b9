//! Declarative configuration to object graph.
//!
//! A YAML document maps node ids to `{interface, variant, config}` entries.
//! Config values are literals or `!ref <node_id>` references. Resolution is
//! two-phase:
//!
//! 1. [`parse_config`] turns the document into [`ComponentNode`]s.
//! 2. [`build_graph`] checks every node against the [`Registry`]: known
//!    component, parameter names and literal kinds, dependency interfaces,
//!    dangling references and cycles. All defects are reported together and
//!    no factory runs.
//! 3. [`resolve`] / [`resolve_roots`] invoke factories in topological order,
//!    constructing each node exactly once and sharing the instance among all
//!    of its dependents.

mod graph;
mod overrides;
mod parse;
mod registry;
mod resolve;
mod value;

use thiserror::Error;

pub use graph::{
    build_graph, DependencyGraph, Diagnostic, Edge, GraphError, Level, ValidationErrors,
};
pub use overrides::apply_override;
pub use parse::{parse_config, ComponentNode, NodeMap};
pub use registry::{
    BoxError, Component, DescriptorBuilder, FactoryDescriptor, ParamAccessError, Params, Registry,
    RegistryError,
};
pub use resolve::{resolve, resolve_roots, ConstructionError, ObjectGraph};
pub use value::{ConfigValue, InterfaceId, ParamKind, ParamSpec};

/// Document-level failures raised before graph validation.
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("node '{node}': {message}")]
    Schema { node: String, message: String },
    #[error("override '{assignment}': {message}")]
    Override { assignment: String, message: String },
}

impl ConfigError {
    pub fn diagnostic(&self) -> Diagnostic {
        let (node_id, message) = match self {
            ConfigError::Syntax(m) => ("<document>".to_string(), m.clone()),
            ConfigError::Schema { node, message } => (node.clone(), message.clone()),
            ConfigError::Override {
                assignment,
                message,
            } => ("<override>".to_string(), format!("{assignment}: {message}")),
        };
        Diagnostic {
            level: Level::Error,
            node_id,
            message,
        }
    }
}

/// Outcome of validating a document against a registry.
#[derive(Debug)]
pub struct Validation {
    pub graph: Option<DependencyGraph>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.graph.is_some()
    }
}

/// Parse, apply overrides, build and check the root. Produces the
/// line-oriented diagnostics used by the `resolve` command.
pub fn validate_document(
    text: &str,
    registry: &Registry,
    overrides: &[String],
    root: Option<&str>,
) -> Validation {
    let fail = |d: Diagnostic| Validation {
        graph: None,
        diagnostics: vec![d],
    };
    let mut nodes = match parse_config(text) {
        Ok(nodes) => nodes,
        Err(e) => return fail(e.diagnostic()),
    };
    for assignment in overrides {
        if let Err(e) = apply_override(&mut nodes, registry, assignment) {
            return fail(e.diagnostic());
        }
    }
    if let Some(root) = root {
        if !nodes.contains_key(root) {
            return fail(Diagnostic {
                level: Level::Error,
                node_id: root.to_string(),
                message: "root node is not defined".to_string(),
            });
        }
    }
    match build_graph(nodes, registry) {
        Ok(graph) => {
            let diagnostics = root
                .map(|r| graph.unused_node_warnings(&[r]))
                .unwrap_or_default();
            Validation {
                graph: Some(graph),
                diagnostics,
            }
        }
        Err(errors) => Validation {
            graph: None,
            diagnostics: errors.0.iter().map(Diagnostic::from).collect(),
        },
    }
}
