//! Path-tracking accessors over a parsed JSON tree.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix, C64};

#[derive(Clone, Copy)]
pub(crate) struct Node<'a> {
    pub value: &'a Value,
    path: &'a str,
}

/// Owns a path string so children can borrow it.
pub(crate) struct Field<'a> {
    pub value: &'a Value,
    pub path: String,
}

impl<'a> Field<'a> {
    pub fn node(&self) -> Node<'_> {
        Node {
            value: self.value,
            path: &self.path,
        }
    }
}

fn join(parent: &str, key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

impl<'a> Node<'a> {
    pub fn root(value: &'a Value) -> Self {
        Node { value, path: "" }
    }

    pub fn path(&self) -> &str {
        if self.path.is_empty() {
            "$"
        } else {
            self.path
        }
    }

    pub fn err(&self, message: impl Into<String>) -> Error {
        Error::Schema {
            path: self.path().to_string(),
            message: message.into(),
        }
    }

    pub fn object(&self) -> Result<&'a Map<String, Value>> {
        self.value
            .as_object()
            .ok_or_else(|| self.err("expected an object"))
    }

    pub fn get(&self, key: &str) -> Result<Option<Field<'a>>> {
        Ok(self
            .object()?
            .get(key)
            .filter(|v| !v.is_null())
            .map(|value| Field {
                value,
                path: join(self.path, key),
            }))
    }

    pub fn require(&self, key: &str) -> Result<Field<'a>> {
        self.get(key)?.ok_or_else(|| Error::Schema {
            path: join(self.path, key),
            message: "required field is missing".into(),
        })
    }

    /// Rejects keys outside `allowed` so typos surface as schema errors.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        for key in self.object()?.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Schema {
                    path: join(self.path, key),
                    message: format!("unknown field (expected one of {})", allowed.join(", ")),
                });
            }
        }
        Ok(())
    }

    pub fn items(&self) -> Result<Vec<Field<'a>>> {
        let arr = self
            .value
            .as_array()
            .ok_or_else(|| self.err("expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, value)| Field {
                value,
                path: format!("{}[{i}]", self.path()),
            })
            .collect())
    }

    pub fn str(&self) -> Result<&'a str> {
        self.value
            .as_str()
            .ok_or_else(|| self.err("expected a string"))
    }

    pub fn f64(&self) -> Result<f64> {
        let x = self
            .value
            .as_f64()
            .ok_or_else(|| self.err("expected a number"))?;
        if !x.is_finite() {
            return Err(self.err("expected a finite number"));
        }
        Ok(x)
    }

    pub fn positive_f64(&self) -> Result<f64> {
        let x = self.f64()?;
        if x <= 0.0 {
            return Err(self.err("expected a positive number"));
        }
        Ok(x)
    }

    pub fn u64(&self) -> Result<u64> {
        self.value
            .as_u64()
            .ok_or_else(|| self.err("expected a non-negative integer"))
    }

    pub fn usize(&self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| self.err("integer out of range"))
    }

    pub fn bool(&self) -> Result<bool> {
        self.value
            .as_bool()
            .ok_or_else(|| self.err("expected a boolean"))
    }

    /// `[re, im]` or a bare real number.
    pub fn complex(&self) -> Result<C64> {
        if let Some(x) = self.value.as_f64() {
            return Ok(C64::new(x, 0.0));
        }
        let parts = self.items()?;
        if parts.len() != 2 {
            return Err(self.err("complex numbers are [re, im]"));
        }
        Ok(C64::new(parts[0].node().f64()?, parts[1].node().f64()?))
    }

    /// `{"rows", "cols", "entries": [[re, im], ...]}` with row-major entries.
    pub fn matrix(&self) -> Result<ComplexMatrix> {
        self.only(&["rows", "cols", "entries"])?;
        let rows = self.require("rows")?.node().usize()?;
        let cols = self.require("cols")?.node().usize()?;
        let entries = self.require("entries")?;
        let items = entries.node().items()?;
        if items.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{}: {} entries for a {rows}x{cols} matrix",
                entries.path,
                items.len()
            )));
        }
        let data = items
            .iter()
            .map(|f| f.node().complex())
            .collect::<Result<Vec<_>>>()?;
        ComplexMatrix::from_vec(rows, cols, data)
    }

    pub fn hermitian(&self) -> Result<HermitianMatrix> {
        let m = self.matrix()?;
        HermitianMatrix::strict(m, 1e-10).map_err(|e| self.err(e.to_string()))
    }
}
