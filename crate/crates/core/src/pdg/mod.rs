//! Statement-level program dependency matrix.

mod dataflow;
mod dot;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pystmt::{StatementTree, StmtKind};

pub use dataflow::data_dependencies;
pub use dot::export_dot;

/// Default number of statements kept per function.
pub const DEFAULT_MAX_STATEMENTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyMode {
    #[default]
    Full,
    DataOnly,
    ControlOnly,
}

impl fmt::Display for DependencyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DependencyMode::Full => "full",
            DependencyMode::DataOnly => "data_only",
            DependencyMode::ControlOnly => "control_only",
        })
    }
}

impl FromStr for DependencyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(DependencyMode::Full),
            "data_only" | "data" => Ok(DependencyMode::DataOnly),
            "control_only" | "control" => Ok(DependencyMode::ControlOnly),
            other => Err(format!("unknown dependency mode {other:?}")),
        }
    }
}

/// Control-dependency edges `(i, j)`: `j` is any header on the parent chain
/// of `i`, not only the nearest one.
pub fn control_dependencies(tree: &StatementTree) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for s in &tree.statements {
        if matches!(s.kind, StmtKind::FuncName | StmtKind::Params) {
            continue;
        }
        for a in tree.ancestors(s.index) {
            edges.insert((s.index, a));
        }
    }
    edges
}

/// Both edge families of one function, computed on the untruncated tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyEdges {
    pub data: BTreeSet<(usize, usize)>,
    pub control: BTreeSet<(usize, usize)>,
    pub statement_count: usize,
}

impl DependencyEdges {
    pub fn of(tree: &StatementTree) -> Self {
        DependencyEdges {
            data: data_dependencies(tree),
            control: control_dependencies(tree),
            statement_count: tree.len(),
        }
    }

    pub fn matrix(&self, mode: DependencyMode, cap: usize) -> DependencyMatrix {
        let mut m = DependencyMatrix::zeros(cap, mode, self.statement_count);
        let mut add = |edges: &BTreeSet<(usize, usize)>| {
            for &(i, j) in edges {
                if i != j && i <= cap && j <= cap {
                    m.set(i, j, true);
                }
            }
        };
        match mode {
            DependencyMode::Full => {
                add(&self.data);
                add(&self.control);
            }
            DependencyMode::DataOnly => add(&self.data),
            DependencyMode::ControlOnly => add(&self.control),
        }
        m
    }
}

/// `size × size` binary relation; entry `(i, j)` (1-based) is set when
/// statement `i` depends on statement `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyMatrix {
    size: usize,
    bits: Vec<bool>,
    mode: DependencyMode,
    true_statement_count: usize,
}

impl DependencyMatrix {
    pub fn zeros(size: usize, mode: DependencyMode, true_statement_count: usize) -> Self {
        DependencyMatrix { size, bits: vec![false; size * size], mode, true_statement_count }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mode(&self) -> DependencyMode {
        self.mode
    }

    /// Statement count before truncation to `size`.
    pub fn true_statement_count(&self) -> usize {
        self.true_statement_count
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i >= 1 && j >= 1 && i <= self.size && j <= self.size, "index out of range");
        self.bits[(i - 1) * self.size + (j - 1)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i >= 1 && j >= 1 && i <= self.size && j <= self.size, "index out of range");
        self.bits[(i - 1) * self.size + (j - 1)] = value;
    }

    /// Row `i` (1-based) as a 0/1 vector.
    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[(i - 1) * self.size..i * self.size]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.size;
        (0..n * n)
            .filter(|&k| self.bits[k])
            .map(|k| (k / n + 1, k % n + 1))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Elementwise OR, keeping `self`'s mode.
    pub fn or(&self, other: &DependencyMatrix) -> DependencyMatrix {
        assert_eq!(self.size, other.size);
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        DependencyMatrix { bits, ..self.clone() }
    }

    pub fn with_mode(mut self, mode: DependencyMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mode": self.mode.to_string(),
            "size": self.size,
            "l": self.true_statement_count,
            "bits": self.bits.iter().map(|&b| b as u8).collect::<Vec<_>>(),
        })
    }

    /// Row-major bits packed eight to a byte, most significant bit first.
    pub fn pack(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (k, &b) in self.bits.iter().enumerate() {
            if b {
                out[k / 8] |= 0x80 >> (k % 8);
            }
        }
        out
    }

    pub fn unpack(bytes: &[u8], size: usize, mode: DependencyMode, true_statement_count: usize) -> Option<Self> {
        if bytes.len() != (size * size).div_ceil(8) {
            return None;
        }
        let bits = (0..size * size).map(|k| bytes[k / 8] & (0x80 >> (k % 8)) != 0).collect();
        Some(DependencyMatrix { size, bits, mode, true_statement_count })
    }
}

/// Dependency matrix of `tree` restricted to `mode`, truncated to `cap`
/// statements. Edges are computed on the whole function before truncation.
pub fn build_matrix(tree: &StatementTree, mode: DependencyMode, cap: usize) -> DependencyMatrix {
    assert!(cap >= 1, "matrix cap must be positive");
    DependencyEdges::of(tree).matrix(mode, cap)
}
