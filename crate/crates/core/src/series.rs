//! Dense power series in two variables `(s₁, s₂)`, stored as homogeneous
//! blocks, plus an incremental engine composing polynomial nonlinearities
//! with such series degree by degree.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::poly::{MultiIndex, MultiPoly};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `blocks[d][m₂]` is the coefficient of `s₁^(d−m₂) s₂^m₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series2 {
    blocks: Vec<Vec<Complex64>>,
}

impl Series2 {
    pub fn zeros(order: u32) -> Self {
        Series2 {
            blocks: (0..=order as usize).map(|d| vec![ZERO; d + 1]).collect(),
        }
    }

    pub fn order(&self) -> u32 {
        (self.blocks.len() - 1) as u32
    }

    pub fn coeff(&self, m1: u32, m2: u32) -> Complex64 {
        let d = (m1 + m2) as usize;
        if d < self.blocks.len() {
            self.blocks[d][m2 as usize]
        } else {
            ZERO
        }
    }

    pub fn set(&mut self, m1: u32, m2: u32, c: Complex64) {
        self.blocks[(m1 + m2) as usize][m2 as usize] = c;
    }

    pub fn add_to(&mut self, m1: u32, m2: u32, c: Complex64) {
        self.blocks[(m1 + m2) as usize][m2 as usize] += c;
    }

    pub fn block(&self, d: u32) -> &[Complex64] {
        &self.blocks[d as usize]
    }

    pub fn block_mut(&mut self, d: u32) -> &mut [Complex64] {
        &mut self.blocks[d as usize]
    }

    /// Extends or truncates to a new order.
    pub fn resized(&self, order: u32) -> Series2 {
        let mut out = Series2::zeros(order);
        for d in 0..=order.min(self.order()) {
            out.blocks[d as usize].copy_from_slice(&self.blocks[d as usize]);
        }
        out
    }

    pub fn eval(&self, s1: Complex64, s2: Complex64) -> Complex64 {
        let n = self.blocks.len();
        let mut p1 = vec![Complex64::new(1.0, 0.0); n];
        let mut p2 = vec![Complex64::new(1.0, 0.0); n];
        for k in 1..n {
            p1[k] = p1[k - 1] * s1;
            p2[k] = p2[k - 1] * s2;
        }
        let mut acc = ZERO;
        for (d, blk) in self.blocks.iter().enumerate() {
            for (m2, c) in blk.iter().enumerate() {
                acc += c * p1[d - m2] * p2[m2];
            }
        }
        acc
    }

    /// Degree-restricted evaluation `Σ_{d ≤ max_degree}`.
    pub fn eval_upto(&self, s1: Complex64, s2: Complex64, max_degree: u32) -> Complex64 {
        self.resized(max_degree.min(self.order())).eval(s1, s2)
    }

    pub fn diff(&self, var: usize) -> Series2 {
        let order = self.order();
        let mut out = Series2::zeros(order.saturating_sub(1));
        for d in 1..=order {
            for m2 in 0..=d {
                let m1 = d - m2;
                let c = self.coeff(m1, m2);
                if c == ZERO {
                    continue;
                }
                match var {
                    0 if m1 > 0 => out.set(m1 - 1, m2, c * m1 as f64),
                    1 if m2 > 0 => out.set(m1, m2 - 1, c * m2 as f64),
                    _ => {}
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: Complex64) {
        for b in &mut self.blocks {
            for c in b {
                *c *= s;
            }
        }
    }

    pub fn axpy(&mut self, s: Complex64, other: &Series2) {
        for d in 0..=self.order().min(other.order()) as usize {
            for (c, o) in self.blocks[d].iter_mut().zip(&other.blocks[d]) {
                *c += s * o;
            }
        }
    }

    /// `conj(f(s̄₂, s̄₁))`, the partner of a row under the conjugate pairing.
    pub fn conj_swap(&self) -> Series2 {
        Series2 {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.iter().rev().map(|c| c.conj()).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn to_poly(&self) -> MultiPoly {
        let order = self.order();
        MultiPoly::from_terms(
            2,
            order.max(1),
            (0..=order).flat_map(|d| {
                (0..=d).map(move |m2| (MultiIndex::new(&[d - m2, m2]), self.coeff(d - m2, m2)))
            }),
        )
    }

    pub fn from_poly(p: &MultiPoly, order: u32) -> Series2 {
        let mut s = Series2::zeros(order);
        for (m, c) in p.terms() {
            if m.degree() <= order {
                s.set(m.get(0), m.get(1), *c);
            }
        }
        s
    }

    /// Iterates `(m₁, m₂, coeff)` in graded-lex order (degree, then larger `m₁` first).
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, Complex64)> + '_ {
        self.blocks.iter().enumerate().flat_map(|(d, b)| {
            b.iter()
                .enumerate()
                .map(move |(m2, c)| ((d - m2) as u32, m2 as u32, *c))
        })
    }
}

/// Adds the degree-`d` block of `a·b` into `out`.
pub(crate) fn mul_block_into(a: &Series2, b: &Series2, d: u32, out: &mut [Complex64]) {
    let (oa, ob) = (a.order(), b.order());
    for da in 0..=d.min(oa) {
        let db = d - da;
        if db > ob {
            continue;
        }
        let ba = a.block(da);
        let bb = b.block(db);
        if ba.iter().all(|c| *c == ZERO) || bb.iter().all(|c| *c == ZERO) {
            continue;
        }
        for (i, ca) in ba.iter().enumerate() {
            if *ca == ZERO {
                continue;
            }
            for (j, cb) in bb.iter().enumerate() {
                out[i + j] += ca * cb;
            }
        }
    }
}

/// Full product truncated at `order`.
pub fn mul(a: &Series2, b: &Series2, order: u32) -> Series2 {
    let mut out = Series2::zeros(order);
    for d in 0..=order {
        let mut blk = vec![ZERO; d as usize + 1];
        mul_block_into(a, b, d, &mut blk);
        out.block_mut(d).copy_from_slice(&blk);
    }
    out
}

#[derive(Debug, Clone)]
enum Node {
    /// Physical variable; node id equals its slot in `vars`.
    Var,
    Mul(usize, usize),
}

/// Evaluates a set of monomials `μ(x)` on series inputs `x_r(s)`, one
/// homogeneous degree at a time, sharing common sub-products.
#[derive(Debug, Clone)]
pub struct MonomialEngine {
    /// Physical variable indices that appear in any monomial.
    pub vars: Vec<usize>,
    nodes: Vec<Node>,
    /// Node id of each registered monomial, in registration order.
    pub roots: Vec<usize>,
}

impl MonomialEngine {
    pub fn new(monomials: &[MultiIndex]) -> Self {
        let mut vars: Vec<usize> = monomials
            .iter()
            .flat_map(|m| m.support().map(|(i, _)| i).collect::<Vec<_>>())
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let slot: HashMap<usize, usize> = vars.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut nodes: Vec<Node> = vec![Node::Var; vars.len()];
        let mut memo: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut roots = Vec::with_capacity(monomials.len());
        for m in monomials {
            // chain x_{i1} · x_{i1} · … · x_{i2} · …, memoized by the partial exponent
            let mut partial = vec![0u32; m.len()];
            let mut cur: Option<usize> = None;
            for (i, p) in m.support() {
                for _ in 0..p {
                    partial[i] += 1;
                    let leaf = slot[&i];
                    cur = Some(match cur {
                        None => leaf,
                        Some(c) => *memo.entry(partial.clone()).or_insert_with(|| {
                            nodes.push(Node::Mul(c, leaf));
                            nodes.len() - 1
                        }),
                    });
                }
            }
            roots.push(cur.expect("monomial has positive degree"));
        }
        MonomialEngine { vars, nodes, roots }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Allocates per-node series storage; variable slots are left zero.
    pub fn workspace(&self, order: u32) -> Vec<Series2> {
        vec![Series2::zeros(order); self.nodes.len()]
    }

    /// Computes the degree-`d` block of every product node. Requires variable
    /// blocks below `d` (and product blocks below `d`) to be filled, which
    /// suffices because every factor has no constant term.
    pub fn advance(&self, values: &mut [Series2], d: u32) {
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Mul(a, b) = *node {
                let mut blk = vec![ZERO; d as usize + 1];
                mul_block_into(&values[a], &values[b], d, &mut blk);
                values[id].block_mut(d).copy_from_slice(&blk);
            }
        }
    }

    /// Linearization: fills degree-`d` blocks of `delta` (the directional
    /// derivative of every node along variable perturbations stored in the
    /// variable slots of `delta`). Needs `values` complete to degree `d`.
    pub fn advance_linearized(&self, values: &[Series2], delta: &mut [Series2], d: u32) {
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Mul(a, b) = *node {
                let mut blk = vec![ZERO; d as usize + 1];
                mul_block_into(&delta[a], &values[b], d, &mut blk);
                mul_block_into(&values[a], &delta[b], d, &mut blk);
                delta[id].block_mut(d).copy_from_slice(&blk);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn product_matches_multipoly() {
        let mut a = Series2::zeros(6);
        a.set(1, 0, c(1.0, 0.5));
        a.set(0, 1, c(-2.0, 0.0));
        a.set(2, 1, c(0.3, -0.1));
        let mut b = Series2::zeros(6);
        b.set(0, 1, c(0.7, 0.0));
        b.set(1, 1, c(0.0, 1.0));
        let prod = mul(&a, &b, 6).to_poly();
        let expect = a.to_poly().with_trunc_order(6).mul(&b.to_poly().with_trunc_order(6)).unwrap();
        let diff = prod.sub(&expect).unwrap();
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn engine_matches_direct_powers() {
        // monomials x0³, x0·x1², x1⁵ on series inputs
        let monos = [
            MultiIndex::new(&[3, 0]),
            MultiIndex::new(&[1, 2]),
            MultiIndex::new(&[0, 5]),
        ];
        let eng = MonomialEngine::new(&monos);
        let order = 9;
        let mut x0 = Series2::zeros(order);
        x0.set(1, 0, c(1.0, 0.0));
        x0.set(0, 1, c(1.0, 0.0));
        x0.set(2, 1, c(0.2, 0.1));
        let mut x1 = Series2::zeros(order);
        x1.set(1, 0, c(0.0, 1.0));
        x1.set(1, 2, c(-0.5, 0.0));
        let mut vals = eng.workspace(order);
        // feed variables one degree at a time, as the solvers do
        for d in 0..=order {
            eng.advance(&mut vals, d);
            vals[0].block_mut(d).copy_from_slice(x0.block(d));
            vals[1].block_mut(d).copy_from_slice(x1.block(d));
        }
        let p0 = x0.to_poly().with_trunc_order(order);
        let p1 = x1.to_poly().with_trunc_order(order);
        let expect = [
            p0.pow(3),
            p0.mul(&p1.pow(2)).unwrap(),
            p1.pow(5),
        ];
        for (root, e) in eng.roots.iter().zip(&expect) {
            let got = vals[*root].to_poly();
            assert!(got.sub(e).unwrap().max_abs() < 1e-13);
        }
    }

    #[test]
    fn eval_and_diff() {
        let mut a = Series2::zeros(4);
        a.set(2, 1, c(2.0, 0.0));
        a.set(0, 3, c(0.0, 1.0));
        let (s1, s2) = (c(0.3, 0.1), c(-0.2, 0.4));
        let direct = c(2.0, 0.0) * s1 * s1 * s2 + c(0.0, 1.0) * s2.powu(3);
        assert!((a.eval(s1, s2) - direct).norm() < 1e-15);
        let d1 = a.diff(0);
        assert_eq!(d1.coeff(1, 1), c(4.0, 0.0));
        let d2 = a.diff(1);
        assert_eq!(d2.coeff(0, 2), c(0.0, 3.0));
        assert!((a.eval(c(0.0, 0.0), s2) - c(0.0, 1.0) * s2.powu(3)).norm() < 1e-15);
    }
}
