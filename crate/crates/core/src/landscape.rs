//! The stationary-point database: minima, transition states and the JSON
//! file they persist to.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::kmeans::{assign, centroids, cost, Assignment, MinimaStore, MinimumRecord};
use crate::matrix::{Centres, Matrix};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

/// A minimum-energy crossing point between two assignments that differ on
/// one data location, linking two distinct minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransitionStateRecord<T> {
    pub id: usize,
    pub cost: T,
    pub centres: Centres<T>,
    /// Lowest index among the points whose label differs across the seam.
    pub point_index_changed: usize,
    /// Every point whose label differs; more than one only for coincident
    /// data points.
    pub points_changed: Vec<usize>,
    /// Cluster of the changed points on each side of the seam.
    pub clusters: [usize; 2],
    pub connected: [usize; 2],
    pub seam_gap: T,
    pub sigma: T,
}

impl<T: Scalar> TransitionStateRecord<T> {
    /// The two assignments that meet at this crossing point.
    pub fn assignment_pair(&self, points: &Matrix<T>) -> (Assignment, Assignment) {
        let base = assign(points, &self.centres);
        let mut r1 = base.clone();
        let mut r2 = base;
        for &i in &self.points_changed {
            r1.0[i] = self.clusters[0];
            r2.0[i] = self.clusters[1];
        }
        (r1, r2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeMeta {
    pub schema_version: u32,
    pub dataset_hash: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// Minima plus transition states for one dataset and one K.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape<T> {
    pub meta: LandscapeMeta,
    pub minima: MinimaStore<T>,
    pub transition_states: Vec<TransitionStateRecord<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct LandscapeFile<T> {
    #[serde(flatten)]
    meta: LandscapeMeta,
    minima: Vec<MinimumRecord<T>>,
    #[serde(default)]
    transition_states: Vec<TransitionStateRecord<T>>,
}

#[derive(Debug, thiserror::Error)]
pub enum DbError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed database: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}")]
    Schema(u32),
    #[error("inconsistent database: {0}")]
    Inconsistent(String),
}

impl<T: Scalar> Landscape<T> {
    pub fn new(d: &Dataset<T>, k: usize, seed: u64, config_hash: impl Into<String>) -> Self {
        Landscape {
            meta: LandscapeMeta {
                schema_version: SCHEMA_VERSION,
                dataset_hash: d.content_hash(),
                k,
                seed,
                config_hash: config_hash.into(),
            },
            minima: MinimaStore::new(k),
            transition_states: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.meta.k
    }

    /// Appends a transition state unless an equivalent one (same pair of
    /// minima, same cost to 1e-6 relative) is already stored.
    pub fn add_transition_state(&mut self, mut ts: TransitionStateRecord<T>) -> Option<usize> {
        let [a, b] = ts.connected;
        let tol = T::lit(1e-6) * (T::one() + ts.cost.abs());
        let dup = self.transition_states.iter().any(|o| {
            let same_pair = (o.connected == [a, b]) || (o.connected == [b, a]);
            same_pair && (o.cost - ts.cost).abs() <= tol
        });
        if dup {
            return None;
        }
        ts.id = self.transition_states.len();
        let id = ts.id;
        self.transition_states.push(ts);
        Some(id)
    }

    pub fn to_json(&self) -> Result<String, DbError> {
        let file = LandscapeFile {
            meta: self.meta.clone(),
            minima: self.minima.records().to_vec(),
            transition_states: self.transition_states.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self, DbError> {
        let file: LandscapeFile<T> = serde_json::from_str(s)?;
        if file.meta.schema_version != SCHEMA_VERSION {
            return Err(DbError::Schema(file.meta.schema_version));
        }
        let minima =
            MinimaStore::from_records(file.meta.k, file.minima).map_err(DbError::Inconsistent)?;
        for (i, ts) in file.transition_states.iter().enumerate() {
            if ts.id != i {
                return Err(DbError::Inconsistent(format!(
                    "transition state at position {i} has id {}",
                    ts.id
                )));
            }
        }
        Ok(Landscape {
            meta: file.meta,
            minima,
            transition_states: file.transition_states,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DbError> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DbError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Re-checks every record invariant against the data.
    pub fn validate(&self, d: &Dataset<T>, tol: &ValidationTolerances<T>) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.meta.dataset_hash != d.content_hash() {
            out.push(Violation::DatasetMismatch);
        }
        let points = d.points();
        let scale = points
            .as_slice()
            .iter()
            .fold(T::zero(), |m, x| m.max(x.abs()));
        let k = self.k();
        for m in self.minima.records() {
            let id = m.id;
            if m.centres.rows() != k
                || m.centres.cols() != d.n_features()
                || m.canonical_labels.len() != d.len()
            {
                out.push(Violation::Minimum {
                    id,
                    kind: MinimumViolation::Shape,
                });
                continue;
            }
            let a = m.assignment();
            if a.0.iter().any(|&l| l >= k) {
                out.push(Violation::Minimum {
                    id,
                    kind: MinimumViolation::Shape,
                });
                continue;
            }
            if a.has_empty_cluster(k) {
                out.push(Violation::Minimum {
                    id,
                    kind: MinimumViolation::EmptyCluster,
                });
            }
            if assign(points, &m.centres) != a {
                out.push(Violation::Minimum {
                    id,
                    kind: MinimumViolation::AssignmentInconsistent,
                });
            }
            let means = centroids(points, &a, &m.centres);
            let worst = means
                .as_slice()
                .iter()
                .zip(m.centres.as_slice())
                .fold(T::zero(), |w, (&x, &y)| w.max((x - y).abs()));
            if worst > tol.tol_fp * (T::one() + scale) {
                out.push(Violation::Minimum {
                    id,
                    kind: MinimumViolation::NotCentroidal,
                });
            }
            let j = cost(points, &m.centres, &a);
            if (j - m.cost).abs() > tol.tol_fp * (T::one() + j.abs()) {
                out.push(Violation::Minimum {
                    id,
                    kind: MinimumViolation::CostMismatch,
                });
            }
        }
        for ts in &self.transition_states {
            let id = ts.id;
            let [a, b] = ts.connected;
            let (Some(ma), Some(mb)) = (self.minima.get(a), self.minima.get(b)) else {
                out.push(Violation::TransitionState {
                    id,
                    kind: TsViolation::MissingMinimum,
                });
                continue;
            };
            if a == b {
                out.push(Violation::TransitionState {
                    id,
                    kind: TsViolation::SelfConnected,
                });
            }
            if ts.centres.rows() != k
                || ts.points_changed.is_empty()
                || ts.points_changed.iter().any(|&i| i >= d.len())
                || ts.clusters.iter().any(|&c| c >= k)
            {
                out.push(Violation::TransitionState {
                    id,
                    kind: TsViolation::Shape,
                });
                continue;
            }
            let (r1, r2) = ts.assignment_pair(points);
            if r1 == r2 {
                out.push(Violation::TransitionState {
                    id,
                    kind: TsViolation::NotASeam,
                });
                continue;
            }
            let j1 = cost(points, &ts.centres, &r1);
            let j2 = cost(points, &ts.centres, &r2);
            if (j1 - j2).abs() > tol.tol_seam {
                out.push(Violation::TransitionState {
                    id,
                    kind: TsViolation::SeamGap,
                });
            }
            if (j1 - ts.cost).abs() > tol.tol_seam || (j2 - ts.cost).abs() > tol.tol_seam {
                out.push(Violation::TransitionState {
                    id,
                    kind: TsViolation::CostMismatch,
                });
            }
            if ts.cost < ma.cost.max(mb.cost) - tol.tol_seam {
                out.push(Violation::TransitionState {
                    id,
                    kind: TsViolation::BelowMinimum,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationTolerances<T> {
    pub tol_fp: T,
    pub tol_seam: T,
}

impl<T: Scalar> Default for ValidationTolerances<T> {
    fn default() -> Self {
        ValidationTolerances {
            tol_fp: T::default_tol(),
            tol_seam: T::lit(1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimumViolation {
    Shape,
    EmptyCluster,
    AssignmentInconsistent,
    NotCentroidal,
    CostMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsViolation {
    Shape,
    MissingMinimum,
    SelfConnected,
    NotASeam,
    SeamGap,
    CostMismatch,
    BelowMinimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    DatasetMismatch,
    Minimum { id: usize, kind: MinimumViolation },
    TransitionState { id: usize, kind: TsViolation },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DatasetMismatch => write!(f, "database was built from a different dataset"),
            Violation::Minimum { id, kind } => write!(f, "minimum {id}: {kind:?}"),
            Violation::TransitionState { id, kind } => write!(f, "transition state {id}: {kind:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::{local_minimize, MinimizerConfig};

    fn toy() -> (Dataset<f64>, Landscape<f64>) {
        let d = Dataset::from_rows(&[vec![0.0], vec![3.0], vec![4.0], vec![7.0]]).unwrap();
        let mut land = Landscape::new(&d, 2, 1, "test");
        let cfg = MinimizerConfig::default();
        for start in [[1.0, 7.0], [1.5, 5.5]] {
            let c =
                local_minimize(d.points(), &Matrix::from_vec(2, 1, start.to_vec()), &cfg).unwrap();
            land.minima.dedup_insert(&c);
        }
        land.add_transition_state(TransitionStateRecord {
            id: 0,
            cost: 10.0,
            centres: Matrix::from_vec(2, 1, vec![2.0, 6.0]),
            point_index_changed: 2,
            points_changed: vec![2],
            clusters: [0, 1],
            connected: [0, 1],
            seam_gap: 0.0,
            sigma: 30.0,
        });
        (d, land)
    }

    #[test]
    fn fresh_database_is_clean_and_roundtrips() {
        let (d, land) = toy();
        assert_eq!(land.minima.len(), 2);
        assert!(land
            .validate(&d, &ValidationTolerances::default())
            .is_empty());
        let back = Landscape::<f64>::from_json(&land.to_json().unwrap()).unwrap();
        assert_eq!(back, land);
    }

    #[test]
    fn injected_faults_are_reported() {
        let (d, mut land) = toy();
        land.minima.records_mut()[1].cost += 0.5;
        land.transition_states[0].connected = [0, 7];
        let v = land.validate(&d, &ValidationTolerances::default());
        assert_eq!(
            v,
            vec![
                Violation::Minimum {
                    id: 1,
                    kind: MinimumViolation::CostMismatch
                },
                Violation::TransitionState {
                    id: 0,
                    kind: TsViolation::MissingMinimum
                },
            ]
        );
    }

    #[test]
    fn duplicate_transition_state_skipped() {
        let (_, mut land) = toy();
        let mut again = land.transition_states[0].clone();
        again.connected = [1, 0];
        assert_eq!(land.add_transition_state(again), None);
    }
}
