use std::collections::BTreeMap;

use serde_yaml::Value;

use super::value::{ConfigValue, InterfaceId};
use super::ConfigError;

/// One top-level entry of a configuration document.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentNode {
    pub node_id: String,
    pub interface: InterfaceId,
    pub variant: String,
    pub config: BTreeMap<String, ConfigValue>,
}

impl ComponentNode {
    /// Targets of every `!ref` in this node's config, by parameter name.
    pub fn references(&self) -> impl Iterator<Item = (&str, &str)> {
        self.config.iter().filter_map(|(param, value)| match value {
            ConfigValue::Ref(target) => Some((param.as_str(), target.as_str())),
            _ => None,
        })
    }
}

pub type NodeMap = BTreeMap<String, ComponentNode>;

/// Parse a YAML configuration document into component nodes.
///
/// References are not checked here; a dangling `!ref` is reported by
/// [`build_graph`](super::build_graph).
pub fn parse_config(text: &str) -> Result<NodeMap, ConfigError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let top = match doc {
        Value::Null => return Ok(NodeMap::new()),
        Value::Mapping(m) => m,
        other => {
            return Err(ConfigError::Syntax(format!(
                "top level must be a mapping of node ids, found {}",
                yaml_kind(&other)
            )))
        }
    };

    let mut nodes = NodeMap::new();
    for (key, body) in top {
        let node_id = match key {
            Value::String(s) if !s.is_empty() => s,
            other => {
                return Err(ConfigError::Syntax(format!(
                    "node id must be a non-empty string, found {}",
                    yaml_kind(&other)
                )))
            }
        };
        let node = parse_node(&node_id, body)?;
        nodes.insert(node_id, node);
    }
    Ok(nodes)
}

fn parse_node(node_id: &str, body: Value) -> Result<ComponentNode, ConfigError> {
    let schema = |message: String| ConfigError::Schema {
        node: node_id.to_string(),
        message,
    };
    let Value::Mapping(mut body) = body else {
        return Err(schema(format!(
            "node must be a mapping, found {}",
            yaml_kind(&body)
        )));
    };
    let mut take_str = |field: &str| -> Result<String, ConfigError> {
        match body.remove(field) {
            Some(Value::String(s)) if !s.is_empty() => Ok(s),
            Some(other) => Err(schema(format!(
                "field '{field}' must be a non-empty string, found {}",
                yaml_kind(&other)
            ))),
            None => Err(schema(format!("missing required field '{field}'"))),
        }
    };
    let interface = InterfaceId::new(take_str("interface")?);
    let variant = take_str("variant")?;

    let mut config = BTreeMap::new();
    match body.remove("config") {
        None | Some(Value::Null) => {}
        Some(Value::Mapping(m)) => {
            for (k, v) in m {
                let Value::String(param) = k else {
                    return Err(schema(format!(
                        "config keys must be strings, found {}",
                        yaml_kind(&k)
                    )));
                };
                let value =
                    convert_value(&v).map_err(|msg| schema(format!("config.{param}: {msg}")))?;
                config.insert(param, value);
            }
        }
        Some(other) => {
            return Err(schema(format!(
                "field 'config' must be a mapping, found {}",
                yaml_kind(&other)
            )))
        }
    }
    if let Some((extra, _)) = body.into_iter().next() {
        let name = extra
            .as_str()
            .map(str::to_string)
            .unwrap_or_else(|| format!("{extra:?}"));
        return Err(schema(format!("unexpected field '{name}'")));
    }

    Ok(ComponentNode {
        node_id: node_id.to_string(),
        interface,
        variant,
        config,
    })
}

pub(crate) fn convert_value(v: &Value) -> Result<ConfigValue, String> {
    match v {
        Value::Bool(b) => Ok(ConfigValue::Bool(*b)),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(ConfigValue::Int(i))
            } else if n.is_f64() {
                Ok(ConfigValue::Float(n.as_f64().unwrap_or(f64::NAN)))
            } else {
                Err(format!("integer {n} does not fit in a signed 64-bit value"))
            }
        }
        Value::String(s) => Ok(ConfigValue::Str(s.clone())),
        Value::Sequence(items) => items
            .iter()
            .map(convert_value)
            .collect::<Result<_, _>>()
            .map(ConfigValue::List),
        Value::Tagged(tagged) => {
            if tagged.tag != "ref" {
                return Err(format!("unsupported tag {}", tagged.tag));
            }
            match &tagged.value {
                Value::String(target) if !target.is_empty() => Ok(ConfigValue::Ref(target.clone())),
                other => Err(format!(
                    "!ref expects a node id, found {}",
                    yaml_kind(other)
                )),
            }
        }
        Value::Null => Err("null values are not allowed".to_string()),
        Value::Mapping(_) => Err("nested mappings are not allowed".to_string()),
    }
}

fn yaml_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Sequence(_) => "sequence",
        Value::Mapping(_) => "mapping",
        Value::Tagged(_) => "tagged value",
    }
}
