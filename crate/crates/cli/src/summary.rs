//! Run summaries: a TOML document with one table per section and arrays of
//! tables for per-step traces.

use serde::Serialize;
use toml::{Table, Value};

#[derive(Clone, Debug, Default)]
pub struct Summary {
    root: Table,
}

impl Summary {
    pub fn new(subcommand: &str) -> Self {
        let mut s = Self::default();
        s.set("run", "subcommand", subcommand);
        s
    }

    fn table(&mut self, section: &str) -> &mut Table {
        let entry = self
            .root
            .entry(section.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        match entry {
            Value::Table(t) => t,
            other => {
                *other = Value::Table(Table::new());
                other.as_table_mut().unwrap()
            }
        }
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<Value>) {
        self.table(section).insert(key.to_string(), value.into());
    }

    /// Store a serializable value as a whole section.
    pub fn section<T: Serialize>(&mut self, section: &str, value: &T) {
        if let Ok(Value::Table(t)) = Value::try_from(value) {
            self.table(section).extend(t);
        }
    }

    /// Append one table to the array `name`.
    pub fn push<T: Serialize>(&mut self, name: &str, value: &T) {
        let Ok(v) = Value::try_from(value) else {
            return;
        };
        let entry = self
            .root
            .entry(name.to_string())
            .or_insert_with(|| Value::Array(Vec::new()));
        if let Value::Array(a) = entry {
            a.push(v);
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.root.get(section)?.as_table()?.get(key)
    }

    pub fn render(&self) -> String {
        toml::to_string(&self.root).unwrap_or_default()
    }
}
