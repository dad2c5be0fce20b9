use serde_yaml::Value;

use super::parse::{convert_value, NodeMap};
use super::registry::Registry;
use super::value::{ConfigValue, InterfaceId, ParamKind};
use super::ConfigError;

/// Apply one `node.config.param=value` (or `node.variant=…`,
/// `node.interface=…`) assignment to parsed nodes.
///
/// When the node's component is registered, the value is parsed according
/// to the declared parameter kind; otherwise it is read as a YAML scalar.
pub fn apply_override(
    nodes: &mut NodeMap,
    registry: &Registry,
    assignment: &str,
) -> Result<(), ConfigError> {
    let fail = |message: String| ConfigError::Override {
        assignment: assignment.to_string(),
        message,
    };
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| fail("expected key=value".to_string()))?;
    let segments: Vec<&str> = path.trim().split('.').collect();
    let node_id = segments[0];
    let node = nodes
        .get_mut(node_id)
        .ok_or_else(|| fail(format!("no node named '{node_id}'")))?;

    match segments[1..] {
        ["interface"] if !raw.is_empty() => node.interface = InterfaceId::new(raw),
        ["variant"] if !raw.is_empty() => node.variant = raw.to_string(),
        ["config", param] if !param.is_empty() => {
            let kind = registry
                .get(&node.interface, &node.variant)
                .and_then(|d| d.param(param))
                .map(|spec| spec.kind.clone());
            let value = parse_for_kind(raw, kind.as_ref()).map_err(fail)?;
            node.config.insert(param.to_string(), value);
        }
        _ => {
            return Err(fail(
                "path must be <node>.config.<param>, <node>.variant or <node>.interface"
                    .to_string(),
            ))
        }
    }
    Ok(())
}

fn parse_for_kind(raw: &str, kind: Option<&ParamKind>) -> Result<ConfigValue, String> {
    let raw = raw.trim();
    match kind {
        Some(ParamKind::Int) => raw
            .parse()
            .map(ConfigValue::Int)
            .map_err(|_| format!("'{raw}' is not an int")),
        Some(ParamKind::Float) => raw
            .parse()
            .map(ConfigValue::Float)
            .map_err(|_| format!("'{raw}' is not a float")),
        Some(ParamKind::Bool) => raw
            .parse()
            .map(ConfigValue::Bool)
            .map_err(|_| format!("'{raw}' is not a bool")),
        Some(ParamKind::Str) => Ok(ConfigValue::Str(raw.to_string())),
        Some(ParamKind::Dependency(_)) => {
            let target = raw.strip_prefix("!ref").map(str::trim).unwrap_or(raw);
            if target.is_empty() {
                return Err("missing reference target".to_string());
            }
            Ok(ConfigValue::Ref(target.to_string()))
        }
        Some(ParamKind::List) | None => {
            let value: Value = serde_yaml::from_str(raw).map_err(|e| e.to_string())?;
            match value {
                Value::Null => Ok(ConfigValue::Str(raw.to_string())),
                v => convert_value(&v),
            }
        }
    }
}
