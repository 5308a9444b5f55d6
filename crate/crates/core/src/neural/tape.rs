//! Reverse-mode automatic differentiation over matrix-level operations.
//!
//! A `Tape` records each operation as a node holding its forward value and
//! closures that push the node's gradient back onto its parents. Gradients
//! are exact reverse-mode derivatives; correctness is gated by a central
//! finite-difference oracle in the model tests.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::matrix::Matrix;

pub type NodeId = usize;

type BackwardFn = Box<dyn Fn(&Matrix, &mut Matrix)>;

struct Parent {
    id: NodeId,
    backward: BackwardFn,
}

struct Node {
    value: Matrix,
    parents: Vec<Parent>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id].value
    }

    fn push(&mut self, value: Matrix, parents: Vec<Parent>) -> NodeId {
        self.nodes.push(Node { value, parents });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, Vec::new())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a).clone();
        let bv = self.value(b).clone();
        let out = av.matmul(&bv);
        self.push(
            out,
            vec![
                Parent {
                    id: a,
                    backward: Box::new(move |g, da| {
                        da.add_assign_scaled(&g.matmul(&bv.transpose()), 1.0)
                    }),
                },
                Parent {
                    id: b,
                    backward: Box::new(move |g, db| {
                        db.add_assign_scaled(&av.transpose().matmul(g), 1.0)
                    }),
                },
            ],
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).add(self.value(b));
        self.push(
            out,
            vec![
                Parent {
                    id: a,
                    backward: Box::new(|g, da| da.add_assign_scaled(g, 1.0)),
                },
                Parent {
                    id: b,
                    backward: Box::new(|g, db| db.add_assign_scaled(g, 1.0)),
                },
            ],
        )
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a).clone();
        let bv = self.value(b).clone();
        let out = av.hadamard(&bv);
        self.push(
            out,
            vec![
                Parent {
                    id: a,
                    backward: Box::new(move |g, da| da.add_assign_scaled(&g.hadamard(&bv), 1.0)),
                },
                Parent {
                    id: b,
                    backward: Box::new(move |g, db| db.add_assign_scaled(&g.hadamard(&av), 1.0)),
                },
            ],
        )
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(|x| 1.0 / (1.0 + libm::exp(-x)));
        let y2 = y.clone();
        self.push(
            y,
            vec![Parent {
                id: a,
                backward: Box::new(move |g, da| {
                    da.add_assign_scaled(&g.hadamard(&y2.map(|v| v * (1.0 - v))), 1.0)
                }),
            }],
        )
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(libm::tanh);
        let y2 = y.clone();
        self.push(
            y,
            vec![Parent {
                id: a,
                backward: Box::new(move |g, da| {
                    da.add_assign_scaled(&g.hadamard(&y2.map(|v| 1.0 - v * v)), 1.0)
                }),
            }],
        )
    }

    /// 1 − a, elementwise.
    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|x| 1.0 - x);
        self.push(
            out,
            vec![Parent {
                id: a,
                backward: Box::new(|g, da| da.add_assign_scaled(g, -1.0)),
            }],
        )
    }

    /// Vertical stack [a; b].
    pub fn vcat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let ra = self.value(a).rows();
        let out = self.value(a).vcat(self.value(b));
        self.push(
            out,
            vec![
                Parent {
                    id: a,
                    backward: Box::new(move |g, da| {
                        da.add_assign_scaled(&g.rows_range(0, ra), 1.0)
                    }),
                },
                Parent {
                    id: b,
                    backward: Box::new(move |g, db| {
                        db.add_assign_scaled(&g.rows_range(ra, g.rows()), 1.0)
                    }),
                },
            ],
        )
    }

    /// Horizontal concatenation of single-column (or wider) parts.
    pub fn hcat(&mut self, parts: &[NodeId]) -> NodeId {
        let values: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Matrix::hcat(&values);
        let widths: Vec<usize> = values.iter().map(|v| v.cols()).collect();
        let mut parents = Vec::with_capacity(parts.len());
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let o = offset;
            parents.push(Parent {
                id: p,
                backward: Box::new(move |g, dp| {
                    for i in 0..g.rows() {
                        for j in 0..w {
                            dp[(i, j)] += g[(i, o + j)];
                        }
                    }
                }),
            });
            offset += w;
        }
        self.push(out, parents)
    }

    /// Gathers columns `indices` of `table` into a matrix; the embedding
    /// lookup. Backward scatters into the used columns.
    pub fn gather_cols(&mut self, table: NodeId, indices: &[usize]) -> NodeId {
        let t = self.value(table);
        let rows = t.rows();
        let mut out = Matrix::zeros(rows, indices.len());
        for (j, &idx) in indices.iter().enumerate() {
            for i in 0..rows {
                out[(i, j)] = t[(i, idx)];
            }
        }
        let idx: Vec<usize> = indices.to_vec();
        self.push(
            out,
            vec![Parent {
                id: table,
                backward: Box::new(move |g, dt| {
                    for (j, &col) in idx.iter().enumerate() {
                        for i in 0..g.rows() {
                            dt[(i, col)] += g[(i, j)];
                        }
                    }
                }),
            }],
        )
    }

    /// x scaled by entry `idx` of the scalar-vector node `s`.
    pub fn scale_entry(&mut self, x: NodeId, s: NodeId, idx: usize) -> NodeId {
        let xv = self.value(x).clone();
        let sv = self.value(s)[(idx, 0)];
        let out = xv.scale(sv);
        self.push(
            out,
            vec![
                Parent {
                    id: x,
                    backward: Box::new(move |g, dx| dx.add_assign_scaled(g, sv)),
                },
                Parent {
                    id: s,
                    backward: Box::new(move |g, ds| ds[(idx, 0)] += g.hadamard(&xv).sum()),
                },
            ],
        )
    }

    /// Entry `idx` of `s` broadcast to a rows×cols constant matrix.
    pub fn broadcast_entry(&mut self, s: NodeId, idx: usize, rows: usize, cols: usize) -> NodeId {
        let sv = self.value(s)[(idx, 0)];
        let out = Matrix::from_fn(rows, cols, |_, _| sv);
        self.push(
            out,
            vec![Parent {
                id: s,
                backward: Box::new(move |g, ds| ds[(idx, 0)] += g.sum()),
            }],
        )
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).transpose();
        self.push(
            out,
            vec![Parent {
                id: a,
                backward: Box::new(|g, da| da.add_assign_scaled(&g.transpose(), 1.0)),
            }],
        )
    }

    /// Softmax over a single column vector.
    pub fn softmax_col(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.cols(), 1);
        let max = v.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.data().iter().map(|&x| libm::exp(x - max)).collect();
        let total: f64 = exps.iter().sum();
        let y = Matrix::from_vec(v.rows(), 1, exps.iter().map(|e| e / total).collect());
        let y2 = y.clone();
        self.push(
            y,
            vec![Parent {
                id: a,
                backward: Box::new(move |g, da| {
                    let dot: f64 = g
                        .data()
                        .iter()
                        .zip(y2.data())
                        .map(|(&gi, &yi)| gi * yi)
                        .sum();
                    for i in 0..g.rows() {
                        da[(i, 0)] += y2[(i, 0)] * (g[(i, 0)] - dot);
                    }
                }),
            }],
        )
    }

    /// Negative log-likelihood of `target` under a masked softmax of the
    /// logits column. Invalid entries get probability exactly zero.
    pub fn masked_nll(&mut self, logits: NodeId, target: usize, valid: &[bool]) -> NodeId {
        let v = self.value(logits);
        assert_eq!(v.cols(), 1);
        assert_eq!(v.rows(), valid.len());
        assert!(valid[target], "target index is masked");
        let probs = masked_softmax(v, valid);
        let nll = -libm::log(probs[target]);
        let valid2: Vec<bool> = valid.to_vec();
        self.push(
            Matrix::from_vec(1, 1, vec![nll]),
            vec![Parent {
                id: logits,
                backward: Box::new(move |g, dl| {
                    let s = g[(0, 0)];
                    for (i, (&p, &ok)) in probs.iter().zip(&valid2).enumerate() {
                        if ok {
                            let indicator = if i == target { 1.0 } else { 0.0 };
                            dl[(i, 0)] += s * (p - indicator);
                        }
                    }
                }),
            }],
        )
    }

    pub fn scale_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let out = self.value(a).scale(c);
        self.push(
            out,
            vec![Parent {
                id: a,
                backward: Box::new(move |g, da| da.add_assign_scaled(g, c)),
            }],
        )
    }

    /// Backpropagates from the scalar `root`; returns one gradient per
    /// node, indexed by `NodeId`.
    pub fn backward(&self, root: NodeId) -> Vec<Matrix> {
        let mut grads: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|n| Matrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        assert_eq!(self.nodes[root].value.shape(), (1, 1), "root must be scalar");
        grads[root] = Matrix::from_vec(1, 1, vec![1.0]);
        for id in (0..=root).rev() {
            if grads[id].data().iter().all(|&x| x == 0.0) {
                continue;
            }
            let g = grads[id].clone();
            for parent in &self.nodes[id].parents {
                (parent.backward)(&g, &mut grads[parent.id]);
            }
        }
        grads
    }
}

/// Probabilities of a masked softmax over a logits column; masked entries
/// are exactly zero.
pub fn masked_softmax(logits: &Matrix, valid: &[bool]) -> Vec<f64> {
    let max = logits
        .data()
        .iter()
        .zip(valid)
        .filter(|(_, &ok)| ok)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .data()
        .iter()
        .zip(valid)
        .map(|(&x, &ok)| if ok { libm::exp(x - max) } else { 0.0 })
        .collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}
