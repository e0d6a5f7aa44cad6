//! Small simple graphs with bitset adjacency.

use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl SimpleGraph {
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Self { n, words, bits: vec![0; n * words] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).filter(|(u, v)| u != v).collect();
        Self::from_edges(n, &edges)
    }

    /// Star `K_{1,leaves}` with centre 0.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
        Self::from_edges(leaves + 1, &edges)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for j in 0..n {
            for i in 0..j {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    /// Erdős–Rényi `G(n, p)`.
    pub fn gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut g = Self::empty(n);
        for j in 0..n {
            for i in 0..j {
                if rng.random::<f64>() < p {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    /// Graph whose edge `{i, j}` is present iff `values[pair_rank(i, j)] != 0`.
    pub fn from_edge_values(n: usize, values: &[f64]) -> Self {
        let mut g = Self::empty(n);
        for j in 0..n {
            for i in 0..j {
                if values[crate::codec::pair_rank(i, j)] != 0.0 {
                    g.add_edge(i, j);
                }
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u != v && u < self.n && v < self.n, "invalid edge ({u}, {v})");
        self.bits[u * self.words + v / 64] |= 1 << (v % 64);
        self.bits[v * self.words + u / 64] |= 1 << (u % 64);
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.words + v / 64] >> (v % 64) & 1 == 1
    }

    fn row(&self, u: usize) -> &[u64] {
        &self.bits[u * self.words..(u + 1) * self.words]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row(u).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|u| self.degree(u)).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|u| self.degree(u)).sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        (0..self.n).filter(|&v| self.has_edge(u, v)).collect()
    }

    /// Edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn triangle_count(&self) -> u64 {
        let mut total = 0u64;
        for u in 0..self.n {
            for v in u + 1..self.n {
                if !self.has_edge(u, v) {
                    continue;
                }
                let (ru, rv) = (self.row(u), self.row(v));
                // common neighbours w > v
                for (k, (a, b)) in ru.iter().zip(rv).enumerate() {
                    let mut common = a & b;
                    let base = k * 64;
                    if base + 64 <= v + 1 {
                        continue;
                    }
                    if base <= v {
                        common &= !((2u64 << (v - base)) - 1);
                    }
                    total += common.count_ones() as u64;
                }
            }
        }
        total
    }
}
