//! Partitions of tensor modes into symmetric cells.

use std::fmt;

use crate::error::{Error, Result};

/// A partition `I_1 ⊔ ⋯ ⊔ I_K` of the modes `0..N` together with the cell map
/// `sigma` (mode → cell). Modes inside a cell are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModePartition {
    cells: Vec<Vec<usize>>,
    sigma: Vec<usize>,
}

impl ModePartition {
    /// Validates that `cells` (0-based modes) partition `0..order` exactly.
    pub fn new(cells: Vec<Vec<usize>>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidPartition("tensor has no modes".into()));
        }
        let mut sigma = vec![usize::MAX; order];
        let mut sorted = Vec::with_capacity(cells.len());
        for (k, cell) in cells.into_iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::InvalidPartition(format!("cell {} is empty", k + 1)));
            }
            let mut cell = cell;
            cell.sort_unstable();
            for &mode in &cell {
                if mode >= order {
                    return Err(Error::InvalidPartition(format!(
                        "mode {} does not exist in a {order}-way tensor",
                        mode + 1
                    )));
                }
                if sigma[mode] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "mode {} is duplicated (appears in cells {} and {})",
                        mode + 1,
                        sigma[mode] + 1,
                        k + 1
                    )));
                }
                sigma[mode] = k;
            }
            sorted.push(cell);
        }
        if let Some(missing) = sigma.iter().position(|&s| s == usize::MAX) {
            return Err(Error::InvalidPartition(format!(
                "mode {} is not assigned to any cell",
                missing + 1
            )));
        }
        Ok(Self {
            cells: sorted,
            sigma,
        })
    }

    /// Every mode in its own cell: the nonsymmetric case.
    pub fn singletons(order: usize) -> Self {
        Self::new((0..order).map(|n| vec![n]).collect(), order).expect("valid by construction")
    }

    /// One cell holding every mode: full symmetry.
    pub fn full(order: usize) -> Self {
        Self::new(vec![(0..order).collect()], order).expect("valid by construction")
    }

    /// Parses the 1-based bracket notation used in config files, e.g. `[[1,2],[3]]`.
    pub fn parse(text: &str, order: usize) -> Result<Self> {
        let cells = parse_cells(text)?;
        let cells = cells
            .into_iter()
            .map(|cell| {
                cell.into_iter()
                    .map(|m| {
                        m.checked_sub(1).ok_or_else(|| {
                            Error::InvalidPartition("modes are numbered from 1".into())
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cells, order)
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn order(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn cell_of(&self, mode: usize) -> usize {
        self.sigma[mode]
    }

    /// Size of the shared dimension of every cell, checking that the modes in
    /// each cell agree.
    pub fn cell_sizes(&self, dims: &[usize]) -> Result<Vec<usize>> {
        if dims.len() != self.order() {
            return Err(Error::shape(format!(
                "partition covers {} modes but the tensor has {}",
                self.order(),
                dims.len()
            )));
        }
        self.cells
            .iter()
            .enumerate()
            .map(|(k, cell)| {
                let size = dims[cell[0]];
                if cell.iter().any(|&m| dims[m] != size) {
                    return Err(Error::CellDimensionMismatch {
                        cell: k,
                        modes: cell.clone(),
                        sizes: cell.iter().map(|&m| dims[m]).collect(),
                    });
                }
                Ok(size)
            })
            .collect()
    }

    pub(crate) fn check_dims(&self, dims: &[usize]) -> Result<()> {
        self.cell_sizes(dims).map(|_| ())
    }
}

impl fmt::Display for ModePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, cell) in self.cells.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for (j, m) in cell.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", m + 1)?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

fn parse_cells(text: &str) -> Result<Vec<Vec<usize>>> {
    let bad = |msg: &str| Error::InvalidPartition(format!("{msg} in `{text}`"));
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| bad("expected outer brackets"))?;
    let mut cells = Vec::new();
    let mut rest = inner;
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('[')
            .ok_or_else(|| bad("expected `[` to open a cell"))?;
        let close = body.find(']').ok_or_else(|| bad("unclosed cell"))?;
        let cell = body[..close]
            .split(',')
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| bad(&format!("bad mode number `{tok}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(cell);
        rest = &body[close + 1..];
        if let Some(r) = rest.strip_prefix(',') {
            if r.is_empty() {
                return Err(bad("trailing comma"));
            }
            rest = r;
        } else if !rest.is_empty() {
            return Err(bad("expected `,` between cells"));
        }
    }
    Ok(cells)
}
