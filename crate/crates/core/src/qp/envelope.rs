//! Symmetric matrices in envelope storage and their LDLᵀ factorization
//! without pivoting. The factor keeps the envelope, so the work is
//! `O(n·b²)` for a half-bandwidth `b`.

#[derive(Debug, Clone)]
pub(crate) struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl Envelope {
    /// Zero matrix whose row `i` stores columns `first[i]..=i`.
    pub fn new(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len());
        let mut len = 0;
        for (i, &f) in first.iter().enumerate() {
            debug_assert!(f <= i);
            start.push(len);
            len += i - f + 1;
        }
        Self {
            first,
            start,
            data: vec![0.0; len],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j >= self.first[i]);
        self.start[i] + j - self.first[i]
    }

    /// Adds `v` to entry `(i, j)` and, by symmetry, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if c < self.first[r] {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for i in 0..self.dim() {
            let f = self.first[i];
            let row = &self.data[self.start[i]..self.start[i] + i - f + 1];
            let mut acc = 0.0;
            for (k, &a) in row[..i - f].iter().enumerate() {
                acc += a * x[f + k];
                y[f + k] += a * x[i];
            }
            y[i] += acc + row[i - f] * x[i];
        }
    }

    /// In-place `LDLᵀ`; `None` when a pivot vanishes or turns non-finite.
    pub fn factor(&self) -> Option<Ldl> {
        let n = self.dim();
        let mut f = self.clone();
        let mut d = vec![0.0; n];
        for i in 0..n {
            let fi = f.first[i];
            let si = f.start[i];
            // row i holds a_ij; overwrite with t_j = l_ij d_j, then l_ij
            for j in fi..i {
                let fj = f.first[j];
                let sj = f.start[j];
                let k0 = fi.max(fj);
                let mut s = f.data[si + j - fi];
                for k in k0..j {
                    s -= f.data[si + k - fi] * f.data[sj + k - fj];
                }
                f.data[si + j - fi] = s;
            }
            let mut di = f.data[si + i - fi];
            for j in fi..i {
                let t = f.data[si + j - fi];
                let l = t / d[j];
                di -= t * l;
                f.data[si + j - fi] = l;
            }
            if !di.is_finite() || di.abs() < 1e-300 {
                return None;
            }
            d[i] = di;
            f.data[si + i - fi] = 1.0;
        }
        Some(Ldl { l: f, d })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Ldl {
    l: Envelope,
    d: Vec<f64>,
}

impl Ldl {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        let e = &self.l;
        for i in 0..n {
            let f = e.first[i];
            let s = e.start[i];
            let mut acc = b[i];
            for k in f..i {
                acc -= e.data[s + k - f] * b[k];
            }
            b[i] = acc;
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let f = e.first[i];
            let s = e.start[i];
            let xi = b[i];
            for k in f..i {
                b[k] -= e.data[s + k - f] * xi;
            }
        }
    }

    /// Pivot signs: `(positive, negative)`.
    #[cfg(test)]
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.d.iter().filter(|&&v| v > 0.0).count();
        (pos, self.d.len() - pos)
    }
}

/// Reverse Cuthill-McKee ordering of an undirected graph.
pub(crate) fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| adj[v].len());
    for &root in &by_degree {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut head = order.len();
        order.push(root);
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| adj[w].len());
            for w in next {
                if !seen[w] {
                    seen[w] = true;
                    order.push(w);
                }
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn factor_matches_dense_solve() {
        // tridiagonal quasi-definite matrix
        let n = 7;
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let first: Vec<usize> = (0..n).map(|i| i.saturating_sub(1)).collect();
        let mut env = Envelope::new(first);
        for i in 0..n {
            let d = if i % 2 == 0 { 3.0 + i as f64 } else { -2.0 };
            env.add(i, i, d);
            dense[(i, i)] = d;
            if i > 0 {
                env.add(i, i - 1, 0.7);
                dense[(i, i - 1)] = 0.7;
                dense[(i - 1, i)] = 0.7;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        let ldl = env.factor().unwrap();
        ldl.solve_in_place(&mut x);
        let mut r = vec![0.0; n];
        env.matvec(&x, &mut r);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
        assert_eq!(ldl.inertia(), (4, 3));
        assert_eq!(env.get(0, 3), 0.0);
    }

    #[test]
    fn rcm_bands_a_path() {
        // path 0-5-1-4-2-3 scrambled labels
        let edges = [(0, 5), (5, 1), (1, 4), (4, 2), (2, 3)];
        let mut adj = vec![Vec::new(); 6];
        for (a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let order = reverse_cuthill_mckee(&adj);
        let mut pos = [0; 6];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        for (a, b) in edges {
            assert_eq!((pos[a] as i64 - pos[b] as i64).abs(), 1);
        }
    }
}
