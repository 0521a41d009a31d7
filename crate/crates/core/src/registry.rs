use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Name-keyed table of strategy factories.
///
/// `F` is normally an unsized `dyn Fn(..) -> Result<Box<dyn Trait>>`; the
/// registry itself knows nothing about what the factories build.
pub struct Registry<F: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Box<F>>,
}

impl<F: ?Sized> Registry<F> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers a factory. Re-registering a name is an error.
    pub fn register(&mut self, name: &'static str, factory: Box<F>) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::InvalidParameter(format!(
                "{} `{name}` is already registered",
                self.kind
            )));
        }
        self.entries.insert(name, factory);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&F> {
        self.entries
            .get(name)
            .map(|f| f.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

impl<F: ?Sized> std::fmt::Debug for Registry<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}
