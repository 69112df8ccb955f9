//! CSV tables for paths, frustration profiles and per-minimum summaries.
//! Each table starts with a `#` comment line carrying provenance.

use std::io::Write;

use serde::Serialize;

use super::frustration::FrustrationProfile;
use crate::network::{Path, StationaryKind};

/// Key-value pairs written ahead of every table.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        vec![
            ("config_hash".into(), self.config_hash.clone()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

fn write_table<W: Write, R: Serialize>(
    mut out: W,
    prov: &Provenance,
    rows: impl IntoIterator<Item = R>,
) -> csv::Result<()> {
    out.write_all(prov.header().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRow {
    pub step: usize,
    pub kind: StationaryKind,
    pub id: usize,
    #[serde(rename = "J")]
    pub cost: f64,
    pub structure_type_change: bool,
    pub partition_change: bool,
}

/// Path profile rows. `structure` and `partition` give, per minimum id, a
/// structure-type id and a partition key; minima flag a change relative to
/// the previous minimum on the path.
pub fn path_rows<K: PartialEq>(path: &Path, structure: &[usize], partition: &[K]) -> Vec<PathRow> {
    let mut prev: Option<usize> = None;
    path.steps
        .iter()
        .enumerate()
        .map(|(step, s)| {
            let (st, pc) = match (s.kind, prev) {
                (StationaryKind::Minimum, Some(p)) => (
                    structure[p] != structure[s.id],
                    partition[p] != partition[s.id],
                ),
                _ => (false, false),
            };
            if s.kind == StationaryKind::Minimum {
                prev = Some(s.id);
            }
            PathRow {
                step,
                kind: s.kind,
                id: s.id,
                cost: s.cost,
                structure_type_change: st,
                partition_change: pc,
            }
        })
        .collect()
}

pub fn write_path_csv<W: Write>(out: W, prov: &Provenance, rows: &[PathRow]) -> csv::Result<()> {
    write_table(out, prov, rows)
}

#[derive(Serialize)]
struct EntropyRow {
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "S")]
    s: f64,
}

pub fn write_frustration_csv<W: Write>(
    out: W,
    prov: &Provenance,
    profile: &FrustrationProfile,
) -> csv::Result<()> {
    let rows = profile
        .temperatures
        .iter()
        .zip(&profile.entropy)
        .map(|(&t, &s)| EntropyRow { t, s });
    write_table(out, prov, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimumRow {
    pub min_id: usize,
    #[serde(rename = "J")]
    pub cost: f64,
    #[serde(rename = "ARI")]
    pub ari: Option<f64>,
    pub structure_type_id: usize,
}

pub fn write_minima_csv<W: Write>(
    out: W,
    prov: &Provenance,
    rows: &[MinimumRow],
) -> csv::Result<()> {
    write_table(out, prov, rows)
}

/// Writes arbitrary serialisable rows with the provenance header.
pub fn write_rows<W: Write, R: Serialize>(
    out: W,
    prov: &Provenance,
    rows: &[R],
) -> csv::Result<()> {
    write_table(out, prov, rows)
}
