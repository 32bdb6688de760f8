//! Typed access to TOML tables with key-path tracking.

use super::error::{DescriptorError, Result};
use toml::{Table, Value};

pub(crate) fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

pub(crate) fn index(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// A view over one table that rejects keys outside `allowed`.
pub(crate) struct Fields<'a> {
    table: &'a Table,
    path: String,
}

impl<'a> Fields<'a> {
    pub fn new(table: &'a Table, path: impl Into<String>, allowed: &[&str]) -> Result<Self> {
        let path = path.into();
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(DescriptorError::schema(join(&path, key), format!("unknown key `{key}`")));
            }
        }
        Ok(Fields { table, path })
    }

    /// A view whose keys are free-form (e.g. `Flows.<id>`); no unknown-key check.
    pub fn open(table: &'a Table, path: impl Into<String>) -> Self {
        Fields { table, path: path.into() }
    }

    pub fn path(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.get(key)
    }

    fn missing(&self, key: &str) -> DescriptorError {
        DescriptorError::schema(self.path(key), format!("missing required key `{key}`"))
    }

    fn wrong(&self, key: &str, expected: &str, v: &Value) -> DescriptorError {
        DescriptorError::schema(
            self.path(key),
            format!("expected {expected}, found {}", type_name(v)),
        )
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(self.wrong(key, "string", v)),
        }
    }

    pub fn req_str(&self, key: &str) -> Result<String> {
        self.opt_str(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn opt_int(&self, key: &str) -> Result<Option<i64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(v) => Err(self.wrong(key, "integer", v)),
        }
    }

    pub fn req_int(&self, key: &str) -> Result<i64> {
        self.opt_int(key)?.ok_or_else(|| self.missing(key))
    }

    /// Integer or float.
    pub fn opt_number(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(v) => Err(self.wrong(key, "number", v)),
        }
    }

    pub fn opt_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(self.wrong(key, "boolean", v)),
        }
    }

    pub fn opt_table(&self, key: &str) -> Result<Option<&'a Table>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(t)),
            Some(v) => Err(self.wrong(key, "table", v)),
        }
    }

    pub fn req_table(&self, key: &str) -> Result<&'a Table> {
        self.opt_table(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn opt_array(&self, key: &str) -> Result<Option<&'a Vec<Value>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(v) => Err(self.wrong(key, "array", v)),
        }
    }

    /// Array of tables (`[[key]]`), each element paired with its key path.
    pub fn table_array(&self, key: &str) -> Result<Vec<(String, &'a Table)>> {
        let Some(items) = self.opt_array(key)? else {
            return Ok(Vec::new());
        };
        let base = self.path(key);
        items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Table(t) => Ok((index(&base, i), t)),
                other => Err(DescriptorError::schema(
                    index(&base, i),
                    format!("expected table, found {}", type_name(other)),
                )),
            })
            .collect()
    }

    pub fn string_array(&self, key: &str) -> Result<Vec<String>> {
        let Some(items) = self.opt_array(key)? else {
            return Ok(Vec::new());
        };
        let base = self.path(key);
        items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::String(s) => Ok(s.clone()),
                other => Err(DescriptorError::schema(
                    index(&base, i),
                    format!("expected string, found {}", type_name(other)),
                )),
            })
            .collect()
    }
}

pub(crate) fn parse_document(text: &str) -> Result<Table> {
    text.parse::<Table>()
        .map_err(|e| DescriptorError::syntax(e.message().to_string()))
}

/// Checked conversion of an integer field into an unsigned quantity.
pub(crate) fn non_negative(path: &str, v: i64) -> Result<u64> {
    u64::try_from(v).map_err(|_| DescriptorError::invariant(path, format!("must be >= 0, got {v}")))
}

pub(crate) fn positive(path: &str, v: i64) -> Result<u64> {
    if v <= 0 {
        return Err(DescriptorError::invariant(path, format!("must be > 0, got {v}")));
    }
    Ok(v as u64)
}
