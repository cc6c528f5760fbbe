//! Program configuration: the declared location universe, arrays, value
//! domain, distribution symbols, adversary context and enumeration caps.

use crate::syntax::ast::{ArrayId, Ident, LocId, Term, Type};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_CAP: u64 = 1 << 20;

/// The environment variable overriding the enumeration cap.
pub const CAP_ENV: &str = "HOPLOG_CAP";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArrayDecl {
    pub name: Ident,
    /// The cells, in index order; each is a plain location of the universe.
    pub cells: Vec<LocId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistKind {
    /// `d(k)`: uniform over `{0..k-1}`.
    Uniform,
    /// `d(k, e1, ..., en)`: uniform over `{0..k-1}` minus the values of the
    /// remaining arguments (out-of-range arguments are ignored).
    UniformExcluding,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProgramConfig {
    /// Location names; `LocId(i)` names `locations[i]`.
    pub locations: Vec<Ident>,
    pub arrays: Vec<ArrayDecl>,
    /// The value domain is `{0..value_count-1}`; every location stores one
    /// such value. `values nat 8;` gives `value_count = 8`.
    pub value_count: u64,
    pub dists: BTreeMap<Ident, DistKind>,
    /// The adversary context Δ.
    pub adversaries: BTreeMap<Ident, Type>,
    /// Named assertion expressions: `qatom F(m) = ...;` — bodies are
    /// expanded at use sites.
    pub qatoms: BTreeMap<Ident, (Vec<Ident>, Term)>,
    /// Cap on the raw instantiation product of any single enumeration.
    pub cap: u64,
}

impl ProgramConfig {
    pub fn new() -> Self {
        ProgramConfig {
            locations: Vec::new(),
            arrays: Vec::new(),
            value_count: 2,
            dists: BTreeMap::new(),
            adversaries: BTreeMap::new(),
            qatoms: BTreeMap::new(),
            cap: DEFAULT_CAP,
        }
    }

    pub fn effective_cap(&self) -> u64 {
        match std::env::var(CAP_ENV) {
            Ok(s) => s.parse().unwrap_or(self.cap),
            Err(_) => self.cap,
        }
    }

    pub fn loc_id(&self, name: &str) -> Option<LocId> {
        self.locations
            .iter()
            .position(|l| l == name)
            .map(|i| LocId(i as u16))
    }

    pub fn loc_name(&self, l: LocId) -> &str {
        &self.locations[l.0 as usize]
    }

    pub fn add_loc(&mut self, name: &str) -> LocId {
        debug_assert!(self.loc_id(name).is_none());
        self.locations.push(name.to_string());
        LocId((self.locations.len() - 1) as u16)
    }

    pub fn array_id(&self, name: &str) -> Option<ArrayId> {
        self.arrays
            .iter()
            .position(|a| a.name == name)
            .map(|i| ArrayId(i as u16))
    }

    pub fn array(&self, a: ArrayId) -> &ArrayDecl {
        &self.arrays[a.0 as usize]
    }

    pub fn add_array(&mut self, name: &str, len: u64) -> ArrayId {
        let cells = (0..len)
            .map(|i| self.add_loc(&format!("{name}[{i}]")))
            .collect();
        self.arrays.push(ArrayDecl {
            name: name.to_string(),
            cells,
        });
        ArrayId((self.arrays.len() - 1) as u16)
    }

    pub fn num_locs(&self) -> usize {
        self.locations.len()
    }

    /// The sentinel used by `card-dom`/`card-im`/`in-dom`/`in-im`: the top
    /// value of the domain stands for "undefined".
    pub fn sentinel(&self) -> u64 {
        self.value_count - 1
    }

    /// The value domain as a type: `Val ≅ nat[value_count-1]`.
    pub fn val_bound(&self) -> u64 {
        self.value_count - 1
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.value_count < 2 {
            return Err("value domain must have at least 2 values".into());
        }
        if self.value_count > 256 {
            return Err("value domain larger than 256 is not supported".into());
        }
        if self.locations.len() > u16::MAX as usize {
            return Err("too many locations".into());
        }
        if self.cap == 0 {
            return Err("cap must be positive".into());
        }
        Ok(())
    }
}

impl Default for ProgramConfig {
    fn default() -> Self {
        Self::new()
    }
}

/// A parsed `.hop` file: configuration plus named definitions (in order).
#[derive(Clone, Debug, Serialize)]
pub struct Program {
    pub config: ProgramConfig,
    /// Definitions with previous definitions already inlined, plus the
    /// declared type.
    pub defs: Vec<Def>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Def {
    pub name: Ident,
    pub ty: Type,
    pub body: Term,
}

impl Program {
    pub fn def(&self, name: &str) -> Option<&Def> {
        self.defs.iter().find(|d| d.name == name)
    }
}
