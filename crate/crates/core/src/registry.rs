//! Named strategy tables: implementations behind a shared trait, chosen by
//! name at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} '{name}' (available: {})", available.join(", "))]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub available: Vec<String>,
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Arc<T>>,
}

impl<T: ?Sized> Registry<T> {
    /// `kind` names the strategy family in error messages.
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `imp` under `name`, returning any entry it replaced.
    pub fn register(&mut self, name: impl Into<String>, imp: Arc<T>) -> Option<Arc<T>> {
        self.entries.insert(name.into(), imp)
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>, UnknownStrategy> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| UnknownStrategy {
                kind: self.kind,
                name: name.to_owned(),
                available: self.names(),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

impl<T: ?Sized> Clone for Registry<T> {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            entries: self.entries.clone(),
        }
    }
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.names())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greet: Send + Sync {
        fn greet(&self) -> String;
    }
    struct En;
    struct Fr;
    impl Greet for En {
        fn greet(&self) -> String {
            "hello".into()
        }
    }
    impl Greet for Fr {
        fn greet(&self) -> String {
            "bonjour".into()
        }
    }

    #[test]
    fn selects_by_name_and_reports_unknown() {
        let mut r: Registry<dyn Greet> = Registry::new("greeter");
        r.register("en", Arc::new(En));
        r.register("fr", Arc::new(Fr));
        assert_eq!(r.get("fr").unwrap().greet(), "bonjour");
        let err = r.get("de").err().unwrap();
        assert_eq!(err.available, vec!["en", "fr"]);
        assert_eq!(err.to_string(), "unknown greeter 'de' (available: en, fr)");
    }

    #[test]
    fn re_registering_replaces() {
        let mut r: Registry<dyn Greet> = Registry::new("greeter");
        assert!(r.register("x", Arc::new(En)).is_none());
        assert!(r.register("x", Arc::new(Fr)).is_some());
        assert_eq!(r.get("x").unwrap().greet(), "bonjour");
    }
}
