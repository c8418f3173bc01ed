//! Coefficient vectors of a discrete solution and their on-disk form: a text
//! vector dump plus a JSON sidecar describing the spaces.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{SpaceKind, Spaces, Variant};
use crate::mesh::{write_mesh, Mesh};

#[derive(Debug, Error)]
pub enum StateError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed state file: {0}")]
    Parse(String),
    #[error("state does not match spaces: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub variant: Variant,
    pub order: usize,
    /// Combined velocity vector (cell space, then facet space).
    pub velocity: Vec<f64>,
    pub density: Vec<f64>,
    pub iterations: usize,
    /// `[momentum, density]` residual per iteration.
    pub residual_history: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceEntry {
    pub name: String,
    pub kind: SpaceKind,
    pub ndofs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMetadata {
    pub format: String,
    pub variant: Variant,
    pub order: usize,
    pub mesh_hash: String,
    pub spaces: Vec<SpaceEntry>,
    pub iterations: usize,
}

/// SHA-256 of the mesh in its text format.
pub fn mesh_hash(mesh: &Mesh) -> String {
    let mut buf = Vec::new();
    write_mesh(mesh, &mut buf).expect("writing to memory cannot fail");
    Sha256::digest(&buf).iter().map(|b| format!("{b:02x}")).collect()
}

fn sidecar(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

impl DiscreteState {
    pub fn zeros(spaces: &Spaces) -> Self {
        Self {
            variant: spaces.variant(),
            order: spaces.order(),
            velocity: vec![0.0; spaces.num_velocity()],
            density: vec![0.0; spaces.num_density()],
            iterations: 0,
            residual_history: Vec::new(),
        }
    }

    pub fn check(&self, spaces: &Spaces) -> Result<(), StateError> {
        if self.variant != spaces.variant() || self.order != spaces.order() {
            return Err(StateError::Mismatch(format!(
                "state is {} k={}, spaces are {} k={}",
                self.variant,
                self.order,
                spaces.variant(),
                spaces.order()
            )));
        }
        if self.velocity.len() != spaces.num_velocity() || self.density.len() != spaces.num_density() {
            return Err(StateError::Mismatch("vector lengths differ from dof counts".into()));
        }
        if self.density.iter().any(|v| !v.is_finite()) {
            return Err(StateError::Mismatch("non-finite density coefficient".into()));
        }
        Ok(())
    }

    pub fn metadata(&self, spaces: &Spaces) -> StateMetadata {
        StateMetadata {
            format: "grstokes-state v1".into(),
            variant: self.variant,
            order: self.order,
            mesh_hash: mesh_hash(spaces.mesh()),
            spaces: vec![
                SpaceEntry { name: "velocity".into(), kind: spaces.velocity.kind, ndofs: spaces.velocity.ndofs },
                SpaceEntry { name: "trace".into(), kind: spaces.trace.kind, ndofs: spaces.trace.ndofs },
                SpaceEntry { name: "density".into(), kind: spaces.density.kind, ndofs: spaces.density.ndofs },
            ],
            iterations: self.iterations,
        }
    }

    /// Writes `path` (one coefficient per line, velocity then density) and
    /// `path.json`.
    pub fn save(&self, spaces: &Spaces, path: &Path) -> Result<(), StateError> {
        self.check(spaces)?;
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "velocity {}", self.velocity.len())?;
        for v in &self.velocity {
            writeln!(out, "{v:.16e}")?;
        }
        writeln!(out, "density {}", self.density.len())?;
        for v in &self.density {
            writeln!(out, "{v:.16e}")?;
        }
        out.flush()?;
        fs::write(sidecar(path), serde_json::to_string_pretty(&self.metadata(spaces))?)?;
        Ok(())
    }

    pub fn load(spaces: &Spaces, path: &Path) -> Result<Self, StateError> {
        let meta: StateMetadata = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
        if meta.mesh_hash != mesh_hash(spaces.mesh()) {
            return Err(StateError::Mismatch("mesh hash differs".into()));
        }
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let mut section = |name: &str| -> Result<Vec<f64>, StateError> {
            let head = lines.next().ok_or_else(|| StateError::Parse(format!("missing {name} header")))?;
            let n: usize = head
                .strip_prefix(name)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| StateError::Parse(format!("bad {name} header '{head}'")))?;
            (0..n)
                .map(|_| {
                    lines
                        .next()
                        .and_then(|l| l.trim().parse().ok())
                        .ok_or_else(|| StateError::Parse(format!("bad {name} value")))
                })
                .collect()
        };
        let velocity = section("velocity")?;
        let density = section("density")?;
        let state = Self {
            variant: meta.variant,
            order: meta.order,
            velocity,
            density,
            iterations: meta.iterations,
            residual_history: Vec::new(),
        };
        state.check(spaces)?;
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square;
    use crate::spaces::build_spaces;
    use std::sync::Arc;

    #[test]
    fn save_and_load_round_trip() {
        let spaces = build_spaces(Arc::new(build_unit_square(0)), 2, Variant::HdivHdg).unwrap();
        let mut state = DiscreteState::zeros(&spaces);
        state.velocity = spaces.interpolate_velocity(&|x| [x[1].sin(), -x[0] * x[1]]);
        state.density = spaces.l2_project_density(&|x| (x[0] - x[1]).exp());
        state.iterations = 12;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.txt");
        state.save(&spaces, &path).unwrap();
        let back = DiscreteState::load(&spaces, &path).unwrap();
        assert_eq!(back.velocity, state.velocity);
        assert_eq!(back.density, state.density);
        assert_eq!(back.iterations, 12);

        let other = build_spaces(Arc::new(build_unit_square(1)), 2, Variant::HdivHdg).unwrap();
        assert!(matches!(DiscreteState::load(&other, &path), Err(StateError::Mismatch(_))));
    }

    #[test]
    fn rejects_wrong_lengths() {
        let spaces = build_spaces(Arc::new(build_unit_square(0)), 1, Variant::FullHdg).unwrap();
        let mut state = DiscreteState::zeros(&spaces);
        state.density.pop();
        assert!(state.check(&spaces).is_err());
    }
}
