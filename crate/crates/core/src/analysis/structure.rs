//! How appended outliers are accommodated by a clustering.

use serde::Serialize;

use crate::kmeans::Assignment;

/// Outliers either sit in clusters that also hold original rows
/// (`absorbed`) or form clusters of their own (`group_sizes`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct StructureType {
    pub absorbed_count: usize,
    /// Ascending.
    pub group_sizes: Vec<usize>,
    pub canonical_id: usize,
}

impl StructureType {
    pub fn n_outliers(&self) -> usize {
        self.absorbed_count + self.group_sizes.iter().sum::<usize>()
    }

    fn from_parts(absorbed_count: usize, mut group_sizes: Vec<usize>) -> Self {
        group_sizes.sort_unstable();
        let canonical_id = canonical_id(&group_sizes);
        StructureType {
            absorbed_count,
            group_sizes,
            canonical_id,
        }
    }
}

/// Classifies an assignment given per-row outlier flags.
pub fn structure_type(a: &Assignment, outlier_flags: &[bool]) -> StructureType {
    assert_eq!(a.len(), outlier_flags.len(), "one flag per row");
    let k = a.labels().iter().copied().max().map_or(0, |m| m + 1);
    let mut originals = vec![0usize; k];
    let mut outliers = vec![0usize; k];
    for (&l, &o) in a.labels().iter().zip(outlier_flags) {
        if o {
            outliers[l] += 1;
        } else {
            originals[l] += 1;
        }
    }
    let mut absorbed = 0;
    let mut groups = Vec::new();
    for (&orig, &out) in originals.iter().zip(&outliers) {
        if out == 0 {
            continue;
        }
        if orig > 0 {
            absorbed += out;
        } else {
            groups.push(out);
        }
    }
    StructureType::from_parts(absorbed, groups)
}

/// Integer partitions of `m` as ascending part lists, in ascending
/// colexicographic order (largest part compared first).
fn partitions(m: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, max_part: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            let mut p = cur.clone();
            p.reverse();
            out.push(p);
            return;
        }
        for part in 1..=left.min(max_part) {
            cur.push(part);
            rec(left - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, m, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

/// Every structure type for `o` outliers, ordered by canonical id. With
/// `max_groups`, types needing more outlier-only clusters are dropped (ids
/// are unaffected).
pub fn enumerate_structure_types(o: usize, max_groups: Option<usize>) -> Vec<StructureType> {
    let mut out = Vec::new();
    for grouped in 0..=o {
        for p in partitions(grouped) {
            if max_groups.is_none_or(|g| p.len() <= g) {
                out.push(StructureType::from_parts(o - grouped, p));
            }
        }
    }
    out
}

/// Position of a configuration among those with the same outlier count:
/// fewer grouped outliers first, then ascending colexicographic order of
/// the group sizes. Id 0 is "all absorbed".
pub fn canonical_id(group_sizes: &[usize]) -> usize {
    let grouped: usize = group_sizes.iter().sum();
    let before: usize = (0..grouped).map(|m| partitions(m).len()).sum();
    let mut sorted = group_sizes.to_vec();
    sorted.sort_unstable();
    before
        + partitions(grouped)
            .iter()
            .position(|p| *p == sorted)
            .expect("sizes form a partition")
}
