// Maximum spanning arborescence by Chu-Liu-Edmonds cycle contraction.
//
// Weights are indexed `[dependent][head]`, matching the adjacency matrix of
// the parser. Arcs with weight -inf are forbidden.

use alloc::vec;
use alloc::vec::Vec;

/// Dense square weight matrix, `w[dep * n + head]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcWeights {
    n: usize,
    w: Vec<f64>,
}

impl ArcWeights {
    /// `n` is the node count including ROOT.
    pub fn new(n: usize, w: Vec<f64>) -> Self {
        assert_eq!(w.len(), n * n, "weight matrix must be n×n");
        ArcWeights { n, w }
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, dep: usize, head: usize) -> f64 {
        self.w[dep * self.n + head]
    }

    pub fn set(&mut self, dep: usize, head: usize, v: f64) {
        self.w[dep * self.n + head] = v;
    }

    /// Total weight of a head vector (`heads[i]` is the head of node `i + 1`).
    pub fn tree_weight(&self, heads: &[usize]) -> f64 {
        heads
            .iter()
            .enumerate()
            .map(|(i, &h)| self.get(i + 1, h))
            .sum()
    }

    /// Forbids self-loops and arcs into ROOT.
    pub fn mask_structural(&mut self) {
        for i in 0..self.n {
            self.set(i, i, f64::NEG_INFINITY);
            self.set(0, i, f64::NEG_INFINITY);
        }
    }
}

/// Best incoming arc per node of a contracted graph; `None` if a node has
/// no permitted incoming arc.
fn best_heads(w: &[Vec<f64>]) -> Option<Vec<usize>> {
    let n = w.len();
    let mut best = vec![0usize; n];
    for v in 1..n {
        let mut b = None;
        for u in 0..n {
            if u == v || w[v][u] == f64::NEG_INFINITY {
                continue;
            }
            match b {
                Some(bu) if w[v][bu] >= w[v][u] => {}
                _ => b = Some(u),
            }
        }
        best[v] = b?;
    }
    Some(best)
}

fn find_cycle(best: &[usize]) -> Option<Vec<usize>> {
    let n = best.len();
    let mut color = vec![0u8; n];
    color[0] = 2;
    for start in 1..n {
        let mut path = Vec::new();
        let mut v = start;
        while color[v] == 0 {
            color[v] = 1;
            path.push(v);
            v = best[v];
        }
        if color[v] == 1 {
            let pos = path.iter().position(|&u| u == v).expect("on path");
            let cycle = path[pos..].to_vec();
            return Some(cycle);
        }
        for u in path {
            color[u] = 2;
        }
    }
    None
}

/// Recursive contraction on a dense matrix; node 0 is the root.
fn cle(w: &[Vec<f64>]) -> Option<Vec<usize>> {
    let n = w.len();
    let best = best_heads(w)?;
    let Some(cycle) = find_cycle(&best) else {
        return Some(best);
    };
    let mut in_cycle = vec![false; n];
    for &c in &cycle {
        in_cycle[c] = true;
    }
    // New node ids: non-cycle nodes keep relative order, the cycle is last.
    let mut map = vec![0usize; n];
    let mut rest = Vec::new();
    for v in 0..n {
        if !in_cycle[v] {
            map[v] = rest.len();
            rest.push(v);
        }
    }
    let c = rest.len();
    for &v in &cycle {
        map[v] = c;
    }
    let m = c + 1;
    let mut cw = vec![vec![f64::NEG_INFINITY; m]; m];
    // Which original node realizes each contracted arc.
    let mut enter = vec![0usize; m]; // head u (outside) -> cycle node entered
    let mut leave = vec![0usize; m]; // dependent v (outside) -> cycle node used as head
    for (nv, &v) in rest.iter().enumerate() {
        for (nu, &u) in rest.iter().enumerate() {
            cw[nv][nu] = w[v][u];
        }
        let mut bu = None;
        for &u in &cycle {
            if w[v][u] == f64::NEG_INFINITY {
                continue;
            }
            match bu {
                Some(b) if w[v][b] >= w[v][u] => {}
                _ => bu = Some(u),
            }
        }
        if let Some(b) = bu {
            cw[nv][c] = w[v][b];
            leave[nv] = b;
        }
    }
    for (nu, &u) in rest.iter().enumerate() {
        let mut bv: Option<(usize, f64)> = None;
        for &v in &cycle {
            if w[v][u] == f64::NEG_INFINITY {
                continue;
            }
            let gain = w[v][u] - w[v][best[v]];
            match bv {
                Some((_, g)) if g >= gain => {}
                _ => bv = Some((v, gain)),
            }
        }
        if let Some((v, g)) = bv {
            cw[c][nu] = g;
            enter[nu] = v;
        }
    }
    let sub = cle(&cw)?;
    let mut heads = best.clone();
    heads[0] = 0;
    for (nv, &v) in rest.iter().enumerate() {
        if nv == 0 {
            continue;
        }
        let h = sub[nv];
        heads[v] = if h == c { leave[nv] } else { rest[h] };
    }
    let hc = sub[c];
    let entered = enter[hc];
    heads[entered] = rest[hc];
    Some(heads)
}

fn to_rows(w: &ArcWeights) -> Vec<Vec<f64>> {
    (0..w.n).map(|i| w.w[i * w.n..(i + 1) * w.n].to_vec()).collect()
}

/// Maximum-weight spanning arborescence rooted at node 0, any number of
/// ROOT children. Returns `heads[i]` for tokens `1..n`, or `None` when no
/// arborescence uses only permitted arcs.
pub fn max_arborescence(w: &ArcWeights) -> Option<Vec<usize>> {
    if w.n < 2 {
        return Some(Vec::new());
    }
    let mut rows = to_rows(w);
    for (i, r) in rows.iter_mut().enumerate() {
        r[i] = f64::NEG_INFINITY;
    }
    cle(&rows).map(|h| h[1..].to_vec())
}

/// Maximum-weight spanning arborescence with exactly one child of ROOT.
///
/// If the unconstrained optimum already has a single ROOT child it is
/// returned; otherwise every candidate ROOT child is tried with the other
/// ROOT arcs forbidden and the best result is kept.
pub fn chu_liu_edmonds(w: &ArcWeights) -> Option<Vec<usize>> {
    let free = max_arborescence(w)?;
    if free.iter().filter(|&&h| h == 0).count() <= 1 {
        return Some(free);
    }
    let n = w.n;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 1..n {
        if w.get(r, 0) == f64::NEG_INFINITY {
            continue;
        }
        let mut restricted = w.clone();
        for d in 1..n {
            if d != r {
                restricted.set(d, 0, f64::NEG_INFINITY);
            }
        }
        if let Some(h) = max_arborescence(&restricted) {
            let score = w.tree_weight(&h);
            match &best {
                Some((s, _)) if *s >= score => {}
                _ => best = Some((score, h)),
            }
        }
    }
    best.map(|(_, h)| h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::check_heads;

    const NEG: f64 = f64::NEG_INFINITY;

    fn weights(n: usize, arcs: &[(usize, usize, f64)]) -> ArcWeights {
        let mut w = ArcWeights::new(n, vec![NEG; n * n]);
        for &(head, dep, v) in arcs {
            w.set(dep, head, v);
        }
        w
    }

    #[test]
    fn three_node_example() {
        let w = weights(3, &[(0, 1, 10.0), (0, 2, 1.0), (1, 2, 5.0), (2, 1, 8.0)]);
        let h = chu_liu_edmonds(&w).unwrap();
        assert_eq!(h, vec![0, 1]);
        assert_eq!(w.tree_weight(&h), 15.0);
    }

    #[test]
    fn breaks_greedy_two_cycle() {
        let w = weights(3, &[(1, 2, 9.0), (2, 1, 9.0), (0, 1, 3.0), (0, 2, 2.0)]);
        let h = chu_liu_edmonds(&w).unwrap();
        assert_eq!(h, vec![0, 1]);
        assert_eq!(w.tree_weight(&h), 12.0);
        assert!(check_heads(&h).is_valid());
    }

    #[test]
    fn single_token() {
        let w = weights(2, &[(0, 1, -0.5)]);
        assert_eq!(chu_liu_edmonds(&w).unwrap(), vec![0]);
    }

    #[test]
    fn forces_single_root() {
        // Both tokens prefer ROOT; one of them must attach to the other.
        let w = weights(3, &[(0, 1, 5.0), (0, 2, 4.0), (1, 2, 1.0), (2, 1, 3.0)]);
        assert_eq!(max_arborescence(&w).unwrap(), vec![0, 0]);
        let h = chu_liu_edmonds(&w).unwrap();
        assert_eq!(h, vec![2, 0]);
        assert_eq!(w.tree_weight(&h), 7.0);
    }

    #[test]
    fn nested_cycles_contract() {
        // 1<->2 strongly, 3 prefers 1, and 2 <-> 3 weaker loop.
        let w = weights(
            4,
            &[
                (0, 1, 1.0),
                (0, 2, 1.0),
                (0, 3, 1.0),
                (1, 2, 10.0),
                (2, 1, 10.0),
                (1, 3, 9.0),
                (3, 1, 2.0),
                (2, 3, 3.0),
                (3, 2, 11.0),
            ],
        );
        let h = chu_liu_edmonds(&w).unwrap();
        assert!(check_heads(&h).is_valid());
        // Brute force over all head vectors.
        let mut best = NEG;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let cand = [a, b, c];
                    if check_heads(&cand).is_valid() {
                        best = best.max(w.tree_weight(&cand));
                    }
                }
            }
        }
        assert_eq!(w.tree_weight(&h), best);
    }
}
