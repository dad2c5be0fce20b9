use std::fmt;

/// A literal or reference appearing in a node's `config` mapping.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    List(Vec<ConfigValue>),
    /// `!ref <node_id>`
    Ref(String),
}

impl ConfigValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ConfigValue::Int(_) => "int",
            ConfigValue::Float(_) => "float",
            ConfigValue::Str(_) => "string",
            ConfigValue::Bool(_) => "bool",
            ConfigValue::List(_) => "list",
            ConfigValue::Ref(_) => "reference",
        }
    }

    fn contains_ref(&self) -> bool {
        match self {
            ConfigValue::Ref(_) => true,
            ConfigValue::List(items) => items.iter().any(ConfigValue::contains_ref),
            _ => false,
        }
    }
}

impl fmt::Display for ConfigValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigValue::Int(v) => write!(f, "{v}"),
            ConfigValue::Float(v) => write!(f, "{v:?}"),
            ConfigValue::Str(v) => write!(f, "{v:?}"),
            ConfigValue::Bool(v) => write!(f, "{v}"),
            ConfigValue::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            ConfigValue::Ref(target) => write!(f, "!ref {target}"),
        }
    }
}

/// Identifier of an interface in the component catalog. Matching is exact
/// and case-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InterfaceId(String);

impl InterfaceId {
    /// Panics on an empty name.
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "interface id must be non-empty");
        InterfaceId(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for InterfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for InterfaceId {
    fn from(name: &str) -> Self {
        InterfaceId::new(name)
    }
}

/// Declared kind of a factory parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamKind {
    Int,
    Float,
    Str,
    Bool,
    List,
    Dependency(InterfaceId),
}

impl ParamKind {
    /// Nominal check of a literal against this kind. No numeric coercion:
    /// an int literal does not satisfy a float parameter.
    pub fn accepts(&self, value: &ConfigValue) -> bool {
        match (self, value) {
            (ParamKind::Int, ConfigValue::Int(_))
            | (ParamKind::Float, ConfigValue::Float(_))
            | (ParamKind::Str, ConfigValue::Str(_))
            | (ParamKind::Bool, ConfigValue::Bool(_))
            | (ParamKind::Dependency(_), ConfigValue::Ref(_)) => true,
            (ParamKind::List, ConfigValue::List(items)) => {
                !items.iter().any(ConfigValue::contains_ref)
            }
            _ => false,
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::Int => f.write_str("int"),
            ParamKind::Float => f.write_str("float"),
            ParamKind::Str => f.write_str("string"),
            ParamKind::Bool => f.write_str("bool"),
            ParamKind::List => f.write_str("list"),
            ParamKind::Dependency(iface) => write!(f, "dependency({iface})"),
        }
    }
}

/// Schema of one factory parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
    pub default: Option<ConfigValue>,
}

impl ParamSpec {
    pub fn required(name: impl Into<String>, kind: ParamKind) -> Self {
        ParamSpec {
            name: name.into(),
            kind,
            required: true,
            default: None,
        }
    }

    /// May be omitted; the factory sees it as absent.
    pub fn optional(name: impl Into<String>, kind: ParamKind) -> Self {
        ParamSpec {
            name: name.into(),
            kind,
            required: false,
            default: None,
        }
    }

    pub fn with_default(name: impl Into<String>, kind: ParamKind, default: ConfigValue) -> Self {
        ParamSpec {
            name: name.into(),
            kind,
            required: false,
            default: Some(default),
        }
    }

    pub fn dependency(name: impl Into<String>, interface: impl Into<InterfaceId>) -> Self {
        ParamSpec::required(name, ParamKind::Dependency(interface.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_does_not_satisfy_float() {
        assert!(!ParamKind::Float.accepts(&ConfigValue::Int(1)));
        assert!(ParamKind::Float.accepts(&ConfigValue::Float(1.0)));
        assert!(!ParamKind::Int.accepts(&ConfigValue::Float(1.0)));
    }

    #[test]
    fn lists_reject_nested_references() {
        let list = ConfigValue::List(vec![ConfigValue::Int(1), ConfigValue::Ref("x".into())]);
        assert!(!ParamKind::List.accepts(&list));
        assert!(ParamKind::List.accepts(&ConfigValue::List(vec![ConfigValue::Int(1)])));
    }

    #[test]
    #[should_panic]
    fn empty_interface_id_panics() {
        InterfaceId::new("");
    }
}
