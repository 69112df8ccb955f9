//! Superbasins and disconnectivity trees.

use std::cmp::Ordering;

use serde::Serialize;

use crate::network::{Network, UnionFind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("need at least two levels")]
    TooFewLevels,
    #[error("top level {hi} must exceed bottom level {lo}")]
    BadRange { lo: f64, hi: f64 },
    #[error("no minimum lies below the top level")]
    NoMinima,
}

/// Groups of minima joined by transition states strictly below `threshold`,
/// each sorted, ordered by smallest member.
pub fn superbasins(net: &Network, threshold: f64) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(net.len());
    for e in net.edges() {
        if e.cost < threshold {
            uf.union(e.a, e.b);
        }
    }
    group(&mut uf, 0..net.len())
}

fn group(uf: &mut UnionFind, ids: impl Iterator<Item = usize>) -> Vec<Vec<usize>> {
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in ids {
        by_root.entry(uf.find(i)).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = by_root.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// True when every group of `fine` lies inside one group of `coarse`.
pub fn refines(fine: &[Vec<usize>], coarse: &[Vec<usize>]) -> bool {
    let mut owner = std::collections::HashMap::new();
    for (g, members) in coarse.iter().enumerate() {
        for &m in members {
            owner.insert(m, g);
        }
    }
    fine.iter().all(|members| {
        let first = owner.get(&members[0]);
        first.is_some() && members.iter().all(|m| owner.get(m) == first)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Basin {
    /// Sorted minimum ids.
    pub members: Vec<usize>,
    /// Index into the basins of the level above.
    pub parent: Option<usize>,
    pub min_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Leaf {
    pub id: usize,
    pub cost: f64,
}

/// Superbasins at descending thresholds. Only minima below a threshold
/// appear at that level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisconnectivityTree {
    /// Descending.
    pub levels: Vec<f64>,
    /// `basins[l]` partitions the minima below `levels[l]`.
    pub basins: Vec<Vec<Basin>>,
    pub leaves: Vec<Leaf>,
}

/// Default range: from the global minimum up to 2% above the highest
/// stationary point.
pub fn default_range(net: &Network) -> (f64, f64) {
    let lo = net.costs().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = net
        .edges()
        .iter()
        .map(|e| e.cost)
        .chain(net.costs().iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let top = if hi > 0.0 {
        hi * 1.02
    } else {
        hi + 0.02 * hi.abs().max(1.0)
    };
    if top > lo {
        (lo, top)
    } else {
        (lo, lo + 1.0)
    }
}

pub fn build_disconnectivity(
    net: &Network,
    n_levels: usize,
    j_min: f64,
    j_max: f64,
) -> Result<DisconnectivityTree, TreeError> {
    if n_levels < 2 {
        return Err(TreeError::TooFewLevels);
    }
    if !(j_max > j_min) {
        return Err(TreeError::BadRange {
            lo: j_min,
            hi: j_max,
        });
    }
    if !net.costs().iter().any(|&c| c < j_max) {
        return Err(TreeError::NoMinima);
    }
    let step = (j_max - j_min) / (n_levels - 1) as f64;
    let levels: Vec<f64> = (0..n_levels).map(|l| j_max - step * l as f64).collect();
    let mut basins: Vec<Vec<Basin>> = Vec::with_capacity(n_levels);
    for (l, &level) in levels.iter().enumerate() {
        let mut uf = UnionFind::new(net.len());
        for e in net.edges() {
            if e.cost < level {
                uf.union(e.a, e.b);
            }
        }
        let present = (0..net.len()).filter(|&i| net.cost(i) < level);
        let groups = group(&mut uf, present);
        let row = groups
            .into_iter()
            .map(|members| {
                let parent = (l > 0).then(|| {
                    basins[l - 1]
                        .iter()
                        .position(|b| b.members.binary_search(&members[0]).is_ok())
                        .expect("basins nest")
                });
                let min_cost = members
                    .iter()
                    .map(|&m| net.cost(m))
                    .fold(f64::INFINITY, f64::min);
                Basin {
                    members,
                    parent,
                    min_cost,
                }
            })
            .collect();
        basins.push(row);
    }
    let leaves = (0..net.len())
        .filter(|&i| net.cost(i) < j_max)
        .map(|id| Leaf {
            id,
            cost: net.cost(id),
        })
        .collect();
    Ok(DisconnectivityTree {
        levels,
        basins,
        leaves,
    })
}

impl DisconnectivityTree {
    /// Each level's basins refine those of the level above.
    pub fn is_nested(&self) -> bool {
        self.basins.windows(2).all(|w| {
            let fine: Vec<Vec<usize>> = w[1].iter().map(|b| b.members.clone()).collect();
            let coarse: Vec<Vec<usize>> = w[0].iter().map(|b| b.members.clone()).collect();
            refines(&fine, &coarse)
        })
    }

    /// Levels at which some basin of the level above splits.
    pub fn branch_levels(&self) -> Vec<usize> {
        (1..self.levels.len())
            .filter(|&l| {
                let above = &self.basins[l - 1];
                let mut kids = vec![0usize; above.len()];
                for b in &self.basins[l] {
                    kids[b.parent.unwrap()] += 1;
                }
                kids.iter().any(|&k| k > 1)
            })
            .collect()
    }

    /// Horizontal positions: leaves evenly spaced in depth-first order with
    /// larger basins first; basins sit at the mean of their children.
    pub fn layout(&self) -> Layout {
        let n_levels = self.levels.len();
        let mut children: Vec<Vec<Vec<Item>>> = self
            .basins
            .iter()
            .map(|r| vec![Vec::new(); r.len()])
            .collect();
        for l in 1..n_levels {
            for (i, b) in self.basins[l].iter().enumerate() {
                children[l - 1][b.parent.unwrap()].push(Item::Basin(
                    i,
                    b.members.len(),
                    b.min_cost,
                ));
            }
        }
        // minima present at level l but not at l + 1 end there
        let cost = |m: usize| self.leaves.iter().find(|x| x.id == m).unwrap().cost;
        let mut ends_at = vec![usize::MAX; self.leaves.iter().map(|x| x.id + 1).max().unwrap_or(0)];
        for (l, row) in self.basins.iter().enumerate() {
            for (i, b) in row.iter().enumerate() {
                for &m in &b.members {
                    let deeper = l + 1 < n_levels
                        && self.basins[l + 1]
                            .iter()
                            .any(|c| c.members.binary_search(&m).is_ok());
                    if !deeper {
                        children[l][i].push(Item::Leaf(m, cost(m)));
                        ends_at[m] = l;
                    }
                }
            }
        }
        for row in children.iter_mut() {
            for items in row.iter_mut() {
                items.sort_by(Item::order);
            }
        }
        let mut basin_x: Vec<Vec<f64>> = self.basins.iter().map(|r| vec![0.0; r.len()]).collect();
        let mut leaf_x = vec![f64::NAN; ends_at.len()];
        let mut next = 0.0;
        let mut tops: Vec<Item> = self.basins[0]
            .iter()
            .enumerate()
            .map(|(i, b)| Item::Basin(i, b.members.len(), b.min_cost))
            .collect();
        tops.sort_by(Item::order);
        for t in tops {
            if let Item::Basin(i, ..) = t {
                place(0, i, &children, &mut basin_x, &mut leaf_x, &mut next);
            }
        }
        let leaves = self
            .leaves
            .iter()
            .map(|leaf| LeafPlacement {
                id: leaf.id,
                x: leaf_x[leaf.id],
                level: ends_at[leaf.id],
            })
            .collect();
        Layout { basin_x, leaves }
    }
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Basin(usize, usize, f64),
    Leaf(usize, f64),
}

impl Item {
    fn key(&self) -> (usize, f64, usize) {
        match *self {
            Item::Basin(i, size, c) => (size, c, i),
            Item::Leaf(m, c) => (1, c, m),
        }
    }

    fn order(a: &Item, b: &Item) -> Ordering {
        let (sa, ca, ia) = a.key();
        let (sb, cb, ib) = b.key();
        sb.cmp(&sa).then(ca.total_cmp(&cb)).then(ia.cmp(&ib))
    }
}

fn place(
    l: usize,
    i: usize,
    children: &[Vec<Vec<Item>>],
    basin_x: &mut [Vec<f64>],
    leaf_x: &mut [f64],
    next: &mut f64,
) -> f64 {
    let mut xs = Vec::new();
    for item in &children[l][i] {
        let x = match *item {
            Item::Basin(c, ..) => place(l + 1, c, children, basin_x, leaf_x, next),
            Item::Leaf(m, _) => {
                leaf_x[m] = *next;
                *next += 1.0;
                leaf_x[m]
            }
        };
        xs.push(x);
    }
    let x = xs.iter().sum::<f64>() / xs.len() as f64;
    basin_x[l][i] = x;
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafPlacement {
    pub id: usize,
    pub x: f64,
    /// Deepest level whose basins still contain this minimum.
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub basin_x: Vec<Vec<f64>>,
    pub leaves: Vec<LeafPlacement>,
}
