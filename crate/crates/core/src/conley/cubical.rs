//! Combinatorial index pairs on a uniform cubical grid.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::FlowError;

use super::homology::{ChainComplex, SparseMatrix};
use super::{ConleyError, Flow, Homology, IndexPair, PairRegion};

/// Cubes by integer index.
pub type CubeSet = BTreeSet<Vec<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicalSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
    /// Time of the sampled map.
    pub tau: f64,
    /// RK4 steps per application of the map.
    pub substeps: usize,
}

impl CubicalSpec {
    /// `[-r, r]^dim` with `n` cubes per axis.
    pub fn symmetric(dim: usize, r: f64, n: usize) -> Self {
        Self { lower: vec![-r; dim], upper: vec![r; dim], resolution: vec![n; dim], tau: 0.5, substeps: 8 }
    }

    fn validate(&self, dim: usize) -> Result<(), ConleyError> {
        let ok = self.lower.len() == dim
            && self.upper.len() == dim
            && self.resolution.len() == dim
            && self.resolution.iter().all(|&n| n > 0)
            && self.lower.iter().zip(&self.upper).all(|(a, b)| a < b)
            && self.tau > 0.0
            && self.substeps > 0;
        if ok {
            Ok(())
        } else {
            Err(ConleyError::InvalidInput(format!("cubical grid does not fit a flow of dimension {dim}")))
        }
    }
}

struct Grid {
    n: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl Grid {
    fn new(n: &[usize]) -> Self {
        let mut strides = vec![1; n.len()];
        for i in (0..n.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * n[i + 1];
        }
        Self { n: n.to_vec(), strides, total: n.iter().product() }
    }

    fn coords(&self, mut id: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let c = id / s;
                id %= s;
                c
            })
            .collect()
    }

    fn id(&self, c: &[usize]) -> usize {
        c.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    /// Cubes in the index box `[lo, hi]` (inclusive, already clamped).
    fn for_each_in_box(&self, lo: &[usize], hi: &[usize], mut f: impl FnMut(usize)) {
        let d = lo.len();
        let mut cur = lo.to_vec();
        loop {
            f(self.id(&cur));
            let mut i = d;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if cur[i] < hi[i] {
                    cur[i] += 1;
                    break;
                }
                cur[i] = lo[i];
            }
        }
    }

    fn on_boundary(&self, id: usize) -> bool {
        self.coords(id).iter().zip(&self.n).any(|(&c, &n)| c == 0 || c + 1 == n)
    }
}

fn rk4_map(flow: &dyn Flow, x: &[f64], tau: f64, steps: usize) -> Result<Vec<f64>, FlowError> {
    let h = tau / steps as f64;
    let mut y = x.to_vec();
    let add = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| u + s * v).collect() };
    for _ in 0..steps {
        let k1 = flow.field(&y)?;
        let k2 = flow.field(&add(&y, 0.5 * h, &k1))?;
        let k3 = flow.field(&add(&y, 0.5 * h, &k2))?;
        let k4 = flow.field(&add(&y, h, &k3))?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(y)
}

/// Outer approximation of the time-`tau` map: an index box per cube, cut to
/// the grid (`None` when the image leaves it entirely).
struct Multimap {
    boxes: Vec<Option<(Vec<usize>, Vec<usize>)>>,
}

impl Multimap {
    fn for_image(&self, grid: &Grid, id: usize, f: impl FnMut(usize)) {
        if let Some((lo, hi)) = &self.boxes[id] {
            grid.for_each_in_box(lo, hi, f);
        }
    }
}

fn outer_map(flow: &dyn Flow, spec: &CubicalSpec, grid: &Grid) -> Result<Multimap, ConleyError> {
    let d = grid.n.len();
    let h: Vec<f64> = (0..d).map(|i| (spec.upper[i] - spec.lower[i]) / grid.n[i] as f64).collect();
    let boxes = (0..grid.total)
        .into_par_iter()
        .map(|id| -> Result<Option<(Vec<usize>, Vec<usize>)>, ConleyError> {
            let c = grid.coords(id);
            let mut pts: Vec<Vec<f64>> = (0..1usize << d)
                .map(|mask| (0..d).map(|i| spec.lower[i] + h[i] * (c[i] + ((mask >> i) & 1)) as f64).collect())
                .collect();
            pts.push((0..d).map(|i| spec.lower[i] + h[i] * (c[i] as f64 + 0.5)).collect());
            let mut lo = vec![i64::MAX; d];
            let mut hi = vec![i64::MIN; d];
            for p in pts {
                let y = rk4_map(flow, &p, spec.tau, spec.substeps)?;
                for i in 0..d {
                    let k = ((y[i] - spec.lower[i]) / h[i]).floor();
                    let k = k.clamp(-2.0, grid.n[i] as f64 + 1.0) as i64;
                    lo[i] = lo[i].min(k - 1);
                    hi[i] = hi[i].max(k + 1);
                }
            }
            if (0..d).any(|i| hi[i] < 0 || lo[i] >= grid.n[i] as i64) {
                return Ok(None);
            }
            let clamp = |v: i64, i: usize| v.clamp(0, grid.n[i] as i64 - 1) as usize;
            Ok(Some(((0..d).map(|i| clamp(lo[i], i)).collect(), (0..d).map(|i| clamp(hi[i], i)).collect())))
        })
        .collect::<Result<_, _>>()?;
    Ok(Multimap { boxes })
}

fn invariant_part(grid: &Grid, map: &Multimap) -> Vec<bool> {
    let mut s = vec![true; grid.total];
    loop {
        let mut has_pre = vec![false; grid.total];
        let mut has_post = vec![false; grid.total];
        for id in 0..grid.total {
            if !s[id] {
                continue;
            }
            map.for_image(&grid, id, |t| {
                if s[t] {
                    has_pre[t] = true;
                    has_post[id] = true;
                }
            });
        }
        let mut changed = false;
        for id in 0..grid.total {
            if s[id] && !(has_pre[id] && has_post[id]) {
                s[id] = false;
                changed = true;
            }
        }
        if !changed {
            return s;
        }
    }
}

fn to_set(grid: &Grid, mask: &[bool]) -> CubeSet {
    (0..grid.total).filter(|&i| mask[i]).map(|i| grid.coords(i)).collect()
}

/// Combinatorial invariant set of the sampled map.
pub fn cubical_invariant_set(flow: &dyn Flow, spec: &CubicalSpec) -> Result<CubeSet, ConleyError> {
    spec.validate(flow.dim())?;
    let grid = Grid::new(&spec.resolution);
    let map = outer_map(flow, spec, &grid)?;
    Ok(to_set(&grid, &invariant_part(&grid, &map)))
}

/// Index pair `(P1, P0)` grown from the combinatorial invariant set inside the
/// smallest cube neighbourhood that contains its image.
pub fn cubical_index_pair(flow: &dyn Flow, spec: &CubicalSpec) -> Result<IndexPair, ConleyError> {
    spec.validate(flow.dim())?;
    let grid = Grid::new(&spec.resolution);
    let map = outer_map(flow, spec, &grid)?;
    let s = invariant_part(&grid, &map);
    let touching = (0..grid.total).filter(|&i| s[i] && grid.on_boundary(i)).count();
    if touching > 0 {
        return Err(ConleyError::GridTooCoarse { cells: touching });
    }
    let d = grid.n.len();
    let grow = |set: &[bool]| {
        let mut out = vec![false; grid.total];
        for id in (0..grid.total).filter(|&i| set[i]) {
            let c = grid.coords(id);
            let lo: Vec<usize> = (0..d).map(|i| c[i].saturating_sub(1)).collect();
            let hi: Vec<usize> = (0..d).map(|i| (c[i] + 1).min(grid.n[i] - 1)).collect();
            grid.for_each_in_box(&lo, &hi, |t| out[t] = true);
        }
        out
    };
    let mut wrap = grow(&s);
    loop {
        let mut inside = true;
        for id in (0..grid.total).filter(|&i| s[i]) {
            map.for_image(&grid, id, |t| inside &= wrap[t]);
        }
        if inside {
            break;
        }
        let edge = (0..grid.total).filter(|&i| wrap[i] && grid.on_boundary(i)).count();
        if edge > 0 {
            return Err(ConleyError::GridTooCoarse { cells: edge });
        }
        wrap = grow(&wrap);
    }
    let collar: Vec<bool> = (0..grid.total).map(|i| wrap[i] && !s[i]).collect();
    let image_in_collar = |from: &[bool], into: &mut Vec<bool>| {
        for id in (0..grid.total).filter(|&i| from[i]) {
            map.for_image(&grid, id, |t| {
                if collar[t] {
                    into[t] = true;
                }
            });
        }
    };
    let mut p0 = vec![false; grid.total];
    image_in_collar(&s, &mut p0);
    loop {
        let mut next = p0.clone();
        image_in_collar(&p0, &mut next);
        if next == p0 {
            break;
        }
        p0 = next;
    }
    let p1: Vec<bool> = (0..grid.total).map(|i| s[i] || p0[i]).collect();
    // F(P0) does not return to S, and F(S) stays in the wrap
    for id in 0..grid.total {
        let mut bad = false;
        map.for_image(&grid, id, |t| {
            bad |= (p0[id] && s[t]) || (s[id] && !wrap[t]);
        });
        if bad {
            return Err(ConleyError::ConditionFailed {
                condition: "combinatorial exit set is not positively invariant".into(),
                face: None,
                witness: grid.coords(id).iter().map(|&v| v as f64).collect(),
            });
        }
    }
    Ok(IndexPair {
        region: PairRegion::Cubical { spec: spec.clone(), n: to_set(&grid, &p1), l: to_set(&grid, &p0) },
        regular: false,
        tau_samples: vec![],
    })
}

/// Cells of the closure of `cubes` in doubled coordinates.
fn closure(cubes: &CubeSet) -> BTreeSet<Vec<i64>> {
    let mut out = BTreeSet::new();
    for c in cubes {
        let d = c.len();
        for code in 0..3usize.pow(d as u32) {
            let mut k = code;
            let cell: Vec<i64> = c
                .iter()
                .map(|&x| {
                    let o = (k % 3) as i64;
                    k /= 3;
                    2 * x as i64 + o
                })
                .collect();
            out.insert(cell);
        }
    }
    out
}

/// `H_*(|n|, |l|)` by cubical chains.
pub(crate) fn cubical_homology(n: &CubeSet, l: &CubeSet) -> Result<Homology, ConleyError> {
    let sub = closure(l);
    let cells: Vec<Vec<i64>> = closure(n).into_iter().filter(|c| !sub.contains(c)).collect();
    let dim = n.iter().next().map_or(0, |c| c.len());
    let degree = |c: &Vec<i64>| c.iter().filter(|&&x| x % 2 != 0).count();
    let mut index: Vec<HashMap<Vec<i64>, usize>> = vec![HashMap::new(); dim + 1];
    let mut dims = vec![0; dim + 1];
    for c in cells {
        let k = degree(&c);
        index[k].insert(c, dims[k]);
        dims[k] += 1;
    }
    let mut complex = ChainComplex::free(dims.clone());
    for k in 1..=dim {
        let mut m = SparseMatrix::zero(dims[k - 1], dims[k]);
        for (c, &col) in &index[k] {
            let mut j = 0;
            for a in 0..dim {
                if c[a] % 2 == 0 {
                    continue;
                }
                let sign = if j % 2 == 0 { 1 } else { -1 };
                for (delta, s) in [(1, sign), (-1, -sign)] {
                    let mut f = c.clone();
                    f[a] += delta;
                    if let Some(&r) = index[k - 1].get(&f) {
                        m.cols[col].push((r, s));
                    }
                }
                j += 1;
            }
        }
        complex.boundaries[k] = m;
    }
    complex.homology()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conley::free_homology;

    fn cubes(list: &[&[usize]]) -> CubeSet {
        list.iter().map(|c| c.to_vec()).collect()
    }

    #[test]
    fn annulus_and_pairs() {
        let ring: CubeSet = (0..3).flat_map(|i| (0..3).map(move |j| vec![i, j])).filter(|c| c != &vec![1, 1]).collect();
        assert_eq!(cubical_homology(&ring, &CubeSet::new()).unwrap(), free_homology(&[0, 1]));
        let seg = cubes(&[&[0], &[1], &[2]]);
        assert_eq!(cubical_homology(&seg, &CubeSet::new()).unwrap(), free_homology(&[0]));
        let ends = cubes(&[&[0], &[2]]);
        assert_eq!(cubical_homology(&seg, &ends).unwrap(), free_homology(&[1]));
        assert_eq!(cubical_homology(&seg, &cubes(&[&[0]])).unwrap(), vec![]);
    }

    #[test]
    fn grid_indexing() {
        let g = Grid::new(&[3, 4, 5]);
        for id in [0, 7, 59] {
            assert_eq!(g.id(&g.coords(id)), id);
        }
        let mut seen = Vec::new();
        g.for_each_in_box(&[1, 1, 1], &[2, 1, 2], |t| seen.push(g.coords(t)));
        assert_eq!(seen, vec![vec![1, 1, 1], vec![1, 1, 2], vec![2, 1, 1], vec![2, 1, 2]]);
    }
}
