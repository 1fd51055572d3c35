//! Integer homology of finite chain complexes.
//!
//! Boundary matrices are reduced by sparse elimination on unit pivots; the
//! remainder goes through a dense Smith normal form in `i128`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ConleyError;

/// `Z^rank + Z/t_1 + ... + Z/t_k` in one degree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyGroup {
    pub degree: usize,
    pub rank: usize,
    pub torsion: Vec<u64>,
}

impl HomologyGroup {
    /// Invariant factors, torsion first, `0` for each free summand.
    pub fn invariant_factors(&self) -> Vec<u64> {
        let mut v = self.torsion.clone();
        v.extend(std::iter::repeat(0).take(self.rank));
        v
    }
}

impl fmt::Display for HomologyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        parts.extend(self.torsion.iter().map(|t| format!("Z/{t}")));
        write!(f, "H_{} = {}", self.degree, parts.join(" + "))
    }
}

/// Nonzero groups only, sorted by degree.
pub type Homology = Vec<HomologyGroup>;

/// `Z` in each listed degree.
pub fn free_homology(degrees: &[usize]) -> Homology {
    let mut m: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in degrees {
        *m.entry(d).or_default() += 1;
    }
    m.into_iter().map(|(degree, rank)| HomologyGroup { degree, rank, torsion: vec![] }).collect()
}

/// Shifts every degree up by `delta`.
pub fn shift_homology(h: &Homology, delta: usize) -> Homology {
    h.iter().map(|g| HomologyGroup { degree: g.degree + delta, ..g.clone() }).collect()
}

/// Graded tensor product of torsion-free homologies.
pub fn kunneth_free(a: &Homology, b: &Homology) -> Result<Homology, ConleyError> {
    if a.iter().chain(b).any(|g| !g.torsion.is_empty()) {
        return Err(ConleyError::InvalidInput("Kunneth product is only implemented for free groups".into()));
    }
    let mut m: BTreeMap<usize, usize> = BTreeMap::new();
    for x in a {
        for y in b {
            *m.entry(x.degree + y.degree).or_default() += x.rank * y.rank;
        }
    }
    Ok(m.into_iter().filter(|e| e.1 > 0).map(|(degree, rank)| HomologyGroup { degree, rank, torsion: vec![] }).collect())
}

/// Sparse integer matrix stored by columns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: Vec<Vec<(usize, i64)>>,
}

impl SparseMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self { rows, cols: vec![Vec::new(); cols] }
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    /// Rank and the invariant factors other than 1.
    pub fn smith(&self) -> Result<(usize, Vec<u64>), ConleyError> {
        let mut cols: Vec<BTreeMap<usize, i128>> = self
            .cols
            .iter()
            .map(|c| {
                let mut m = BTreeMap::new();
                for &(r, v) in c {
                    *m.entry(r).or_insert(0i128) += v as i128;
                }
                m.retain(|_, v| *v != 0);
                m
            })
            .collect();
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.rows];
        for (j, c) in cols.iter().enumerate() {
            for &r in c.keys() {
                rows[r].insert(j);
            }
        }
        let mut alive: BTreeSet<usize> = (0..cols.len()).filter(|&j| !cols[j].is_empty()).collect();
        let mut rank = 0;
        let mut progress = true;
        while progress {
            progress = false;
            for j in 0..cols.len() {
                // unit entry in the sparsest row
                let Some(r) = cols[j].iter().filter(|e| e.1.abs() == 1).map(|e| *e.0).min_by_key(|&r| rows[r].len())
                else {
                    continue;
                };
                let pivot = cols[j][&r];
                let others: Vec<usize> = rows[r].iter().copied().filter(|&k| k != j).collect();
                let pcol: Vec<(usize, i128)> = cols[j].iter().map(|(&a, &b)| (a, b)).collect();
                for k in others {
                    let f = cols[k][&r] * pivot;
                    for &(rr, v) in &pcol {
                        let e = cols[k].entry(rr).or_insert(0);
                        *e = e
                            .checked_sub(f.checked_mul(v).ok_or(ConleyError::NumericOverflow)?)
                            .ok_or(ConleyError::NumericOverflow)?;
                        if *e == 0 {
                            cols[k].remove(&rr);
                            rows[rr].remove(&k);
                        } else {
                            rows[rr].insert(k);
                        }
                    }
                    if cols[k].is_empty() {
                        alive.remove(&k);
                    }
                }
                for &(rr, _) in &pcol {
                    rows[rr].remove(&j);
                }
                cols[j].clear();
                alive.remove(&j);
                rank += 1;
                progress = true;
            }
        }
        if alive.is_empty() {
            return Ok((rank, vec![]));
        }
        let row_ids: Vec<usize> = alive.iter().flat_map(|&j| cols[j].keys().copied()).collect::<BTreeSet<_>>().into_iter().collect();
        let index: BTreeMap<usize, usize> = row_ids.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let mut dense = vec![vec![0i128; alive.len()]; row_ids.len()];
        for (jj, &j) in alive.iter().enumerate() {
            for (&r, &v) in &cols[j] {
                dense[index[&r]][jj] = v;
            }
        }
        let diag = dense_smith(dense)?;
        let mut torsion = Vec::new();
        for d in diag {
            rank += 1;
            if d.abs() != 1 {
                torsion.push(u64::try_from(d.abs()).map_err(|_| ConleyError::NumericOverflow)?);
            }
        }
        torsion.sort_unstable();
        Ok((rank, torsion))
    }
}

/// Nonzero diagonal entries of the Smith normal form.
fn dense_smith(mut a: Vec<Vec<i128>>) -> Result<Vec<i128>, ConleyError> {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    let ovf = || ConleyError::NumericOverflow;
    let mut diag = Vec::new();
    for t in 0..m.min(n) {
        loop {
            let mut best: Option<(i128, usize, usize)> = None;
            for i in t..m {
                for j in t..n {
                    let v = a[i][j].abs();
                    if v != 0 && best.map_or(true, |b| v < b.0) {
                        best = Some((v, i, j));
                    }
                }
            }
            let Some((_, pi, pj)) = best else { return Ok(diag) };
            a.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            let p = a[t][t];
            let mut clean = true;
            for i in t + 1..m {
                let q = a[i][t] / p;
                if q != 0 {
                    for j in t..n {
                        a[i][j] = a[i][j].checked_sub(q.checked_mul(a[t][j]).ok_or_else(ovf)?).ok_or_else(ovf)?;
                    }
                }
                clean &= a[i][t] == 0;
            }
            for j in t + 1..n {
                let q = a[t][j] / p;
                if q != 0 {
                    for i in t..m {
                        a[i][j] = a[i][j].checked_sub(q.checked_mul(a[i][t]).ok_or_else(ovf)?).ok_or_else(ovf)?;
                    }
                }
                clean &= a[t][j] == 0;
            }
            if !clean {
                continue;
            }
            // divisibility of the remaining block
            let bad = (t + 1..m).find(|&i| (t + 1..n).any(|j| a[i][j] % p != 0));
            match bad {
                Some(i) => {
                    for j in t..n {
                        a[t][j] = a[t][j].checked_add(a[i][j]).ok_or_else(ovf)?;
                    }
                }
                None => break,
            }
        }
        diag.push(a[t][t]);
    }
    Ok(diag)
}

/// Finite free chain complex; `boundaries[k]` maps degree `k` to `k - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainComplex {
    pub dims: Vec<usize>,
    pub boundaries: Vec<SparseMatrix>,
}

impl ChainComplex {
    /// Complex with the given cell counts and zero differentials.
    pub fn free(dims: Vec<usize>) -> Self {
        let boundaries = (0..dims.len()).map(|k| SparseMatrix::zero(if k == 0 { 0 } else { dims[k - 1] }, dims[k])).collect();
        Self { dims, boundaries }
    }

    /// Single cell in degree `p`: the pair `(D^p, S^{p-1})`.
    pub fn relative_disk(p: usize) -> Self {
        let mut dims = vec![0; p + 1];
        dims[p] = 1;
        Self::free(dims)
    }

    /// Minimal CW structure of the torus `T^b`.
    pub fn torus(b: usize) -> Self {
        let circle = Self::free(vec![1, 1]);
        (0..b).fold(Self::free(vec![1]), |acc, _| acc.tensor(&circle))
    }

    /// Tensor product with Koszul signs.
    pub fn tensor(&self, other: &Self) -> Self {
        let top = self.dims.len() + other.dims.len() - 1;
        // basis of degree n: pairs (p, i, q, j) with p + q = n
        let mut index: Vec<BTreeMap<(usize, usize, usize), usize>> = vec![BTreeMap::new(); top];
        let mut dims = vec![0; top];
        for p in 0..self.dims.len() {
            for q in 0..other.dims.len() {
                for i in 0..self.dims[p] {
                    for j in 0..other.dims[q] {
                        let n = p + q;
                        index[n].insert((p, i, j), dims[n]);
                        dims[n] += 1;
                    }
                }
            }
        }
        let mut boundaries: Vec<SparseMatrix> =
            (0..top).map(|n| SparseMatrix::zero(if n == 0 { 0 } else { dims[n - 1] }, dims[n])).collect();
        for n in 1..top {
            for (&(p, i, j), &col) in &index[n] {
                let q = n - p;
                let mut entries = Vec::new();
                if p > 0 {
                    for &(r, v) in &self.boundaries[p].cols[i] {
                        entries.push((index[n - 1][&(p - 1, r, j)], v));
                    }
                }
                if q > 0 {
                    let sign = if p % 2 == 0 { 1 } else { -1 };
                    for &(r, v) in &other.boundaries[q].cols[j] {
                        entries.push((index[n - 1][&(p, i, r)], sign * v));
                    }
                }
                boundaries[n].cols[col] = entries;
            }
        }
        Self { dims, boundaries }
    }

    pub fn homology(&self) -> Result<Homology, ConleyError> {
        let n = self.dims.len();
        let mut ranks = vec![0; n + 1];
        let mut torsion = vec![Vec::new(); n + 1];
        for k in 1..n {
            let (r, t) = self.boundaries[k].smith()?;
            ranks[k] = r;
            torsion[k] = t;
        }
        let mut out = Vec::new();
        for k in 0..n {
            let rank = self.dims[k] - ranks[k] - ranks[k + 1];
            let tor = torsion[k + 1].clone();
            if rank > 0 || !tor.is_empty() {
                out.push(HomologyGroup { degree: k, rank, torsion: tor });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, dense: &[&[i64]]) -> SparseMatrix {
        let ncols = dense.first().map_or(0, |r| r.len());
        let mut m = SparseMatrix::zero(rows, ncols);
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0 {
                    m.cols[j].push((i, v));
                }
            }
        }
        m
    }

    #[test]
    fn smith_examples() {
        assert_eq!(matrix(2, &[&[2, 0], &[0, 3]]).smith().unwrap(), (2, vec![6]));
        assert_eq!(matrix(2, &[&[2, 4], &[6, 8]]).smith().unwrap(), (2, vec![2, 4]));
        assert_eq!(matrix(3, &[&[1, 2, 3], &[4, 5, 6], &[7, 8, 9]]).smith().unwrap(), (2, vec![3]));
        assert_eq!(matrix(2, &[&[0, 0], &[0, 0]]).smith().unwrap(), (0, vec![]));
    }

    #[test]
    fn projective_plane() {
        // one cell per degree, d_2 = 2
        let mut c = ChainComplex::free(vec![1, 1, 1]);
        c.boundaries[2].cols[0] = vec![(0, 2)];
        let h = c.homology().unwrap();
        assert_eq!(h, vec![
            HomologyGroup { degree: 0, rank: 1, torsion: vec![] },
            HomologyGroup { degree: 1, rank: 0, torsion: vec![2] },
        ]);
    }

    #[test]
    fn torus_and_disk_products() {
        let t = ChainComplex::torus(3).homology().unwrap();
        assert_eq!(t.iter().map(|g| g.rank).collect::<Vec<_>>(), vec![1, 3, 3, 1]);
        for p in 0..4 {
            let h = ChainComplex::relative_disk(p).tensor(&ChainComplex::relative_disk(2)).homology().unwrap();
            assert_eq!(h, free_homology(&[p + 2]));
        }
        let h = ChainComplex::torus(1).tensor(&ChainComplex::relative_disk(3)).homology().unwrap();
        assert_eq!(h, free_homology(&[3, 4]));
        let k = kunneth_free(&free_homology(&[0, 1]), &free_homology(&[3])).unwrap();
        assert_eq!(k, h);
    }

    #[test]
    fn tensor_squares_to_zero() {
        let mut c = ChainComplex::free(vec![2, 1]);
        c.boundaries[1].cols[0] = vec![(0, -1), (1, 1)];
        let p = c.tensor(&c).tensor(&c);
        for n in 2..p.dims.len() {
            let (a, b) = (&p.boundaries[n - 1], &p.boundaries[n]);
            for col in &b.cols {
                let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
                for &(r, v) in col {
                    for &(rr, w) in &a.cols[r] {
                        *acc.entry(rr).or_default() += v * w;
                    }
                }
                assert!(acc.values().all(|&x| x == 0));
            }
        }
        // interval cubed is contractible
        assert_eq!(p.homology().unwrap(), free_homology(&[0]));
    }
}
