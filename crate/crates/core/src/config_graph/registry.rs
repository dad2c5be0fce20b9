use std::any::{Any, TypeId};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::value::{ConfigValue, InterfaceId, ParamKind, ParamSpec};

/// An instantiated component. Concrete types are recovered by downcasting.
pub type Component = Arc<dyn Any + Send + Sync>;

/// Error type factories report back to the resolver.
pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

type ConstructFn = dyn Fn(&Params) -> Result<Component, BoxError> + Send + Sync;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("component ({interface}, {variant}) is already registered")]
    DuplicateVariant {
        interface: InterfaceId,
        variant: String,
    },
    #[error("component ({interface}, {variant}) declares parameter '{param}' twice")]
    DuplicateParam {
        interface: InterfaceId,
        variant: String,
        param: String,
    },
    #[error("component ({interface}, {variant}): default of '{param}' is not a {kind}")]
    InvalidDefault {
        interface: InterfaceId,
        variant: String,
        param: String,
        kind: String,
    },
    #[error(
        "component ({interface}, {variant}) produces {found} but interface '{interface}' is bound to {expected}"
    )]
    InterfaceTypeConflict {
        interface: InterfaceId,
        variant: String,
        expected: &'static str,
        found: &'static str,
    },
}

/// Registration record for one pluggable component.
pub struct FactoryDescriptor {
    pub interface: InterfaceId,
    pub variant: String,
    pub params: Vec<ParamSpec>,
    output: TypeId,
    output_name: &'static str,
    construct: Arc<ConstructFn>,
}

impl FactoryDescriptor {
    pub fn builder(
        interface: impl Into<InterfaceId>,
        variant: impl Into<String>,
    ) -> DescriptorBuilder {
        DescriptorBuilder {
            interface: interface.into(),
            variant: variant.into(),
            params: Vec::new(),
        }
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn output_type_name(&self) -> &'static str {
        self.output_name
    }

    pub(crate) fn construct(&self, params: &Params) -> Result<Component, BoxError> {
        (self.construct)(params)
    }
}

impl fmt::Debug for FactoryDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactoryDescriptor")
            .field("interface", &self.interface)
            .field("variant", &self.variant)
            .field("params", &self.params)
            .field("output", &self.output_name)
            .finish()
    }
}

pub struct DescriptorBuilder {
    interface: InterfaceId,
    variant: String,
    params: Vec<ParamSpec>,
}

impl DescriptorBuilder {
    pub fn param(mut self, spec: ParamSpec) -> Self {
        self.params.push(spec);
        self
    }

    /// Finish the descriptor with a typed constructor. Every variant of an
    /// interface must produce the same Rust type.
    pub fn construct<T, F>(self, f: F) -> FactoryDescriptor
    where
        T: Any + Send + Sync,
        F: Fn(&Params) -> Result<T, BoxError> + Send + Sync + 'static,
    {
        FactoryDescriptor {
            interface: self.interface,
            variant: self.variant,
            params: self.params,
            output: TypeId::of::<T>(),
            output_name: std::any::type_name::<T>(),
            construct: Arc::new(move |p| f(p).map(|v| Arc::new(v) as Component)),
        }
    }
}

/// Lookup from (interface, variant) to factory descriptors.
#[derive(Default)]
pub struct Registry {
    factories: BTreeMap<(InterfaceId, String), FactoryDescriptor>,
    bindings: BTreeMap<InterfaceId, (TypeId, &'static str)>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, descriptor: FactoryDescriptor) -> Result<(), RegistryError> {
        let key = (descriptor.interface.clone(), descriptor.variant.clone());
        if self.factories.contains_key(&key) {
            return Err(RegistryError::DuplicateVariant {
                interface: key.0,
                variant: key.1,
            });
        }
        let mut seen = BTreeSet::new();
        for spec in &descriptor.params {
            if !seen.insert(spec.name.as_str()) {
                return Err(RegistryError::DuplicateParam {
                    interface: key.0,
                    variant: key.1,
                    param: spec.name.clone(),
                });
            }
            let bad_default = match (&spec.kind, &spec.default) {
                (ParamKind::Dependency(_), Some(_)) => true,
                (kind, Some(default)) => !kind.accepts(default),
                (_, None) => false,
            };
            if bad_default {
                return Err(RegistryError::InvalidDefault {
                    interface: key.0,
                    variant: key.1,
                    param: spec.name.clone(),
                    kind: spec.kind.to_string(),
                });
            }
        }
        if let Some(&(bound, bound_name)) = self.bindings.get(&descriptor.interface) {
            if bound != descriptor.output {
                return Err(RegistryError::InterfaceTypeConflict {
                    interface: key.0,
                    variant: key.1,
                    expected: bound_name,
                    found: descriptor.output_name,
                });
            }
        } else {
            self.bindings.insert(
                descriptor.interface.clone(),
                (descriptor.output, descriptor.output_name),
            );
        }
        self.factories.insert(key, descriptor);
        Ok(())
    }

    pub fn get(&self, interface: &InterfaceId, variant: &str) -> Option<&FactoryDescriptor> {
        // BTreeMap lookups need an owned key; registries are small.
        self.factories
            .get(&(interface.clone(), variant.to_string()))
    }

    pub fn len(&self) -> usize {
        self.factories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factories.is_empty()
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &InterfaceId> {
        self.bindings.keys()
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &FactoryDescriptor> {
        self.factories.values()
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

#[derive(Debug, Error)]
pub enum ParamAccessError {
    #[error("parameter '{0}' is not set")]
    Missing(String),
    #[error("parameter '{name}' is a {found}, not a {wanted}")]
    WrongKind {
        name: String,
        wanted: &'static str,
        found: &'static str,
    },
    #[error("dependency '{name}' does not hold a {wanted}")]
    WrongInstance { name: String, wanted: &'static str },
    #[error("parameter '{name}' = {value} is out of range: {reason}")]
    OutOfRange {
        name: String,
        value: String,
        reason: String,
    },
}

#[derive(Clone)]
pub(crate) enum ParamValue {
    Literal(ConfigValue),
    Instance(Component),
}

/// Validated parameters handed to a factory: literals with defaults applied
/// and dependency parameters replaced by their constructed instances.
pub struct Params {
    node_id: String,
    values: BTreeMap<String, ParamValue>,
}

impl Params {
    pub(crate) fn new(node_id: String, values: BTreeMap<String, ParamValue>) -> Self {
        Params { node_id, values }
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    fn literal(&self, name: &str) -> Result<Option<&ConfigValue>, ParamAccessError> {
        match self.values.get(name) {
            None => Ok(None),
            Some(ParamValue::Literal(v)) => Ok(Some(v)),
            Some(ParamValue::Instance(_)) => Err(ParamAccessError::WrongKind {
                name: name.to_string(),
                wanted: "literal",
                found: "dependency",
            }),
        }
    }

    fn wrong(name: &str, wanted: &'static str, found: &ConfigValue) -> ParamAccessError {
        ParamAccessError::WrongKind {
            name: name.to_string(),
            wanted,
            found: found.type_name(),
        }
    }

    pub fn opt_int(&self, name: &str) -> Result<Option<i64>, ParamAccessError> {
        match self.literal(name)? {
            None => Ok(None),
            Some(ConfigValue::Int(v)) => Ok(Some(*v)),
            Some(other) => Err(Self::wrong(name, "int", other)),
        }
    }

    pub fn int(&self, name: &str) -> Result<i64, ParamAccessError> {
        self.opt_int(name)?
            .ok_or_else(|| ParamAccessError::Missing(name.to_string()))
    }

    /// Integer parameter that must be at least `min`.
    pub fn count(&self, name: &str, min: u64) -> Result<u64, ParamAccessError> {
        let v = self.int(name)?;
        Self::check_count(name, v, min)
    }

    pub fn opt_count(&self, name: &str, min: u64) -> Result<Option<u64>, ParamAccessError> {
        self.opt_int(name)?
            .map(|v| Self::check_count(name, v, min))
            .transpose()
    }

    fn check_count(name: &str, v: i64, min: u64) -> Result<u64, ParamAccessError> {
        if v < 0 || (v as u64) < min {
            return Err(ParamAccessError::OutOfRange {
                name: name.to_string(),
                value: v.to_string(),
                reason: format!("must be >= {min}"),
            });
        }
        Ok(v as u64)
    }

    pub fn opt_float(&self, name: &str) -> Result<Option<f64>, ParamAccessError> {
        match self.literal(name)? {
            None => Ok(None),
            Some(ConfigValue::Float(v)) => Ok(Some(*v)),
            Some(other) => Err(Self::wrong(name, "float", other)),
        }
    }

    pub fn float(&self, name: &str) -> Result<f64, ParamAccessError> {
        self.opt_float(name)?
            .ok_or_else(|| ParamAccessError::Missing(name.to_string()))
    }

    pub fn opt_str(&self, name: &str) -> Result<Option<&str>, ParamAccessError> {
        match self.literal(name)? {
            None => Ok(None),
            Some(ConfigValue::Str(v)) => Ok(Some(v)),
            Some(other) => Err(Self::wrong(name, "string", other)),
        }
    }

    pub fn str(&self, name: &str) -> Result<&str, ParamAccessError> {
        self.opt_str(name)?
            .ok_or_else(|| ParamAccessError::Missing(name.to_string()))
    }

    pub fn opt_bool(&self, name: &str) -> Result<Option<bool>, ParamAccessError> {
        match self.literal(name)? {
            None => Ok(None),
            Some(ConfigValue::Bool(v)) => Ok(Some(*v)),
            Some(other) => Err(Self::wrong(name, "bool", other)),
        }
    }

    pub fn bool(&self, name: &str) -> Result<bool, ParamAccessError> {
        self.opt_bool(name)?
            .ok_or_else(|| ParamAccessError::Missing(name.to_string()))
    }

    pub fn opt_list(&self, name: &str) -> Result<Option<&[ConfigValue]>, ParamAccessError> {
        match self.literal(name)? {
            None => Ok(None),
            Some(ConfigValue::List(v)) => Ok(Some(v)),
            Some(other) => Err(Self::wrong(name, "list", other)),
        }
    }

    /// List parameter whose elements must all be non-negative integers >= `min`.
    pub fn opt_count_list(
        &self,
        name: &str,
        min: u64,
    ) -> Result<Option<Vec<u64>>, ParamAccessError> {
        let Some(items) = self.opt_list(name)? else {
            return Ok(None);
        };
        items
            .iter()
            .map(|item| match item {
                ConfigValue::Int(v) => Self::check_count(name, *v, min),
                other => Err(Self::wrong(name, "list of int", other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn opt_dependency<T: Any + Send + Sync>(
        &self,
        name: &str,
    ) -> Result<Option<Arc<T>>, ParamAccessError> {
        match self.values.get(name) {
            None => Ok(None),
            Some(ParamValue::Instance(c)) => {
                c.clone()
                    .downcast::<T>()
                    .map(Some)
                    .map_err(|_| ParamAccessError::WrongInstance {
                        name: name.to_string(),
                        wanted: std::any::type_name::<T>(),
                    })
            }
            Some(ParamValue::Literal(v)) => Err(Self::wrong(name, "dependency", v)),
        }
    }

    pub fn dependency<T: Any + Send + Sync>(&self, name: &str) -> Result<Arc<T>, ParamAccessError> {
        self.opt_dependency(name)?
            .ok_or_else(|| ParamAccessError::Missing(name.to_string()))
    }
}
