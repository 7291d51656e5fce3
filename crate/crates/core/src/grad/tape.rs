use crate::error::{Error, Result};
use crate::problem::{AffinityDecomposition, MatchingState};

/// Differentiable inputs of a solve: the unary vector and one weight per
/// stored symmetric pair of `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityParams {
    pub n: usize,
    pub u: Vec<f64>,
    pub weights: Vec<f64>,
    /// `(first, second)` flat positions of each stored weight.
    pub pairs: Vec<(usize, usize)>,
}

impl AffinityParams {
    pub fn from_affinity(aff: &AffinityDecomposition) -> Self {
        Self {
            n: aff.n(),
            u: aff.u().to_vec(),
            weights: aff.weights(),
            pairs: aff.entries().iter().map(|e| (e.first, e.second)).collect(),
        }
    }
}

/// Gradients of a scalar loss with respect to [`AffinityParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    /// One entry per unary position, row-major `n × n`.
    pub du: Vec<f64>,
    /// One entry per stored pair, shared by both symmetric positions.
    pub dw: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    Add(usize, usize),
    Mul(usize, usize),
    Lin(usize, f64, usize, f64),
    Scale(usize, f64),
    AddConst(usize),
    Exp(usize),
    /// `exp(x − max x)` with the shift held constant.
    ShiftExp(usize),
    /// `ln(max(x, eps))`, zero gradient where the floor is active.
    LogClamp(usize, f64),
    /// `P x`.
    Messages(usize),
    RowNormalize(usize),
    ColNormalize(usize),
    L1Normalize(usize),
    L2Normalize(usize),
    /// `x / max x` with the gradient routed through the (first) argmax.
    DivByMax(usize),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Recorded forward pass of one unrolled solve over vectors of length `n²`.
///
/// Node 0 is the unary leaf; pairwise weights are held alongside and
/// receive gradients through the message-passing nodes.
#[derive(Clone, Debug)]
pub struct Tape {
    n: usize,
    weights: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    nodes: Vec<Node>,
    output: usize,
    early_stopped: bool,
    steps: usize,
}

impl Tape {
    pub(crate) fn new(params: &AffinityParams) -> Self {
        let leaf = Node { op: Op::Leaf, value: params.u.clone() };
        Self {
            n: params.n,
            weights: params.weights.clone(),
            pairs: params.pairs.clone(),
            nodes: vec![leaf],
            output: 0,
            early_stopped: false,
            steps: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Outer solver iterations recorded.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// True when the forward pass stopped on a tolerance before its fixed
    /// depth; such tapes refuse [`Tape::backward`].
    pub fn early_stopped(&self) -> bool {
        self.early_stopped
    }

    pub fn output(&self) -> &[f64] {
        &self.nodes[self.output].value
    }

    pub fn output_state(&self) -> MatchingState {
        MatchingState::from_vec(self.n, self.output().to_vec()).expect("tape values have n² entries")
    }

    pub(crate) fn unary(&self) -> usize {
        0
    }

    pub(crate) fn value(&self, id: usize) -> &[f64] {
        &self.nodes[id].value
    }

    pub(crate) fn finish(&mut self, output: usize, steps: usize, early_stopped: bool) {
        self.output = output;
        self.steps = steps;
        self.early_stopped = early_stopped;
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> usize {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    fn map(&mut self, x: usize, op: Op, f: impl Fn(f64) -> f64) -> usize {
        let value = self.nodes[x].value.iter().map(|&v| f(v)).collect();
        self.push(op, value)
    }

    pub(crate) fn constant(&mut self, value: Vec<f64>) -> usize {
        self.push(Op::Const, value)
    }

    pub(crate) fn add(&mut self, a: usize, b: usize) -> usize {
        let value = self.nodes[a].value.iter().zip(&self.nodes[b].value).map(|(x, y)| x + y).collect();
        self.push(Op::Add(a, b), value)
    }

    pub(crate) fn mul(&mut self, a: usize, b: usize) -> usize {
        let value = self.nodes[a].value.iter().zip(&self.nodes[b].value).map(|(x, y)| x * y).collect();
        self.push(Op::Mul(a, b), value)
    }

    pub(crate) fn lin(&mut self, a: usize, ca: f64, b: usize, cb: f64) -> usize {
        let value = self.nodes[a].value.iter().zip(&self.nodes[b].value).map(|(x, y)| ca * x + cb * y).collect();
        self.push(Op::Lin(a, ca, b, cb), value)
    }

    pub(crate) fn scale(&mut self, x: usize, c: f64) -> usize {
        self.map(x, Op::Scale(x, c), |v| c * v)
    }

    pub(crate) fn add_const(&mut self, x: usize, c: f64) -> usize {
        self.map(x, Op::AddConst(x), |v| v + c)
    }

    pub(crate) fn exp(&mut self, x: usize) -> usize {
        self.map(x, Op::Exp(x), f64::exp)
    }

    /// Fails when the exponent is not finite.
    pub(crate) fn shift_exp(&mut self, x: usize) -> Result<usize> {
        let v = &self.nodes[x].value;
        let shift = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() || v.iter().any(|x| x.is_nan()) {
            return Err(Error::Overflow("recorded exponent is not finite".into()));
        }
        Ok(self.map(x, Op::ShiftExp(x), |v| (v - shift).exp()))
    }

    pub(crate) fn log_clamp(&mut self, x: usize, eps: f64) -> usize {
        self.map(x, Op::LogClamp(x, eps), |v| v.max(eps).ln())
    }

    pub(crate) fn messages(&mut self, x: usize) -> usize {
        let z = &self.nodes[x].value;
        let mut y = vec![0.0; z.len()];
        for (&(f, s), &w) in self.pairs.iter().zip(&self.weights) {
            y[f] += w * z[s];
            y[s] += w * z[f];
        }
        self.push(Op::Messages(x), y)
    }

    pub(crate) fn row_normalize(&mut self, x: usize) -> usize {
        let n = self.n;
        let mut value = self.nodes[x].value.clone();
        for row in value.chunks_exact_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        self.push(Op::RowNormalize(x), value)
    }

    pub(crate) fn col_normalize(&mut self, x: usize) -> usize {
        let n = self.n;
        let mut value = self.nodes[x].value.clone();
        let col = column_sums(&value, n);
        for row in value.chunks_exact_mut(n) {
            for (v, c) in row.iter_mut().zip(&col) {
                *v /= c;
            }
        }
        self.push(Op::ColNormalize(x), value)
    }

    pub(crate) fn l1_normalize(&mut self, x: usize) -> usize {
        let s: f64 = self.nodes[x].value.iter().sum();
        self.map(x, Op::L1Normalize(x), |v| v / s)
    }

    pub(crate) fn l2_normalize(&mut self, x: usize) -> usize {
        let r = self.nodes[x].value.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.map(x, Op::L2Normalize(x), |v| v / r)
    }

    pub(crate) fn div_by_max(&mut self, x: usize) -> usize {
        let peak = self.nodes[x].value.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.map(x, Op::DivByMax(x), |v| v / peak)
    }

    /// Sinkhorn projection with a fixed number of sweeps, matching the
    /// in-place projection operation for operation.
    pub(crate) fn sinkhorn(&mut self, x: usize, epsilon: f64, sweeps: usize) -> usize {
        let mut id = if epsilon > 0.0 { self.add_const(x, epsilon) } else { x };
        for _ in 0..sweeps {
            id = self.row_normalize(id);
            id = self.col_normalize(id);
        }
        id
    }

    /// Reverse pass from the upstream gradient `seed` of the output.
    pub fn backward(&self, seed: &[f64]) -> Result<Gradients> {
        if self.early_stopped {
            return Err(Error::InvalidTape(
                "forward pass stopped early; gradients need a fixed unroll depth".into(),
            ));
        }
        let len = self.nodes[self.output].value.len();
        if seed.len() != len {
            return Err(Error::DimensionMismatch { expected: len, found: seed.len() });
        }
        let n = self.n;
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.output + 1];
        adj[self.output] = Some(seed.to_vec());
        let mut du = vec![0.0; self.nodes[0].value.len()];
        let mut dw = vec![0.0; self.weights.len()];

        for id in (0..=self.output).rev() {
            let Some(g) = adj[id].take() else { continue };
            let y = &self.nodes[id].value;
            match self.nodes[id].op {
                Op::Leaf => du = g,
                Op::Const => {}
                Op::Add(a, b) => {
                    accumulate(&mut adj, a, &g);
                    accumulate(&mut adj, b, &g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
                    let ga: Vec<f64> = g.iter().zip(vb).map(|(g, v)| g * v).collect();
                    let gb: Vec<f64> = g.iter().zip(va).map(|(g, v)| g * v).collect();
                    accumulate(&mut adj, a, &ga);
                    accumulate(&mut adj, b, &gb);
                }
                Op::Lin(a, ca, b, cb) => {
                    accumulate(&mut adj, a, &g.iter().map(|g| ca * g).collect::<Vec<_>>());
                    accumulate(&mut adj, b, &g.iter().map(|g| cb * g).collect::<Vec<_>>());
                }
                Op::Scale(x, c) => accumulate(&mut adj, x, &g.iter().map(|g| c * g).collect::<Vec<_>>()),
                Op::AddConst(x) => accumulate(&mut adj, x, &g),
                Op::Exp(x) | Op::ShiftExp(x) => {
                    accumulate(&mut adj, x, &g.iter().zip(y).map(|(g, y)| g * y).collect::<Vec<_>>())
                }
                Op::LogClamp(x, eps) => {
                    let v = &self.nodes[x].value;
                    let gx: Vec<f64> = g.iter().zip(v).map(|(g, &v)| if v >= eps { g / v } else { 0.0 }).collect();
                    accumulate(&mut adj, x, &gx);
                }
                Op::Messages(x) => {
                    let z = &self.nodes[x].value;
                    let mut gx = vec![0.0; z.len()];
                    for (k, (&(f, s), &w)) in self.pairs.iter().zip(&self.weights).enumerate() {
                        gx[s] += w * g[f];
                        gx[f] += w * g[s];
                        dw[k] += g[f] * z[s] + g[s] * z[f];
                    }
                    accumulate(&mut adj, x, &gx);
                }
                Op::RowNormalize(x) => {
                    let v = &self.nodes[x].value;
                    let mut gx = vec![0.0; v.len()];
                    for r in 0..n {
                        let span = r * n..(r + 1) * n;
                        let s: f64 = v[span.clone()].iter().sum();
                        let dot: f64 = g[span.clone()].iter().zip(&y[span.clone()]).map(|(g, y)| g * y).sum();
                        for k in span {
                            gx[k] = (g[k] - dot) / s;
                        }
                    }
                    accumulate(&mut adj, x, &gx);
                }
                Op::ColNormalize(x) => {
                    let v = &self.nodes[x].value;
                    let col = column_sums(v, n);
                    let mut dot = vec![0.0; n];
                    for (k, (g, y)) in g.iter().zip(y).enumerate() {
                        dot[k % n] += g * y;
                    }
                    let gx: Vec<f64> = g.iter().enumerate().map(|(k, g)| (g - dot[k % n]) / col[k % n]).collect();
                    accumulate(&mut adj, x, &gx);
                }
                Op::L1Normalize(x) => {
                    let s: f64 = self.nodes[x].value.iter().sum();
                    let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
                    accumulate(&mut adj, x, &g.iter().map(|g| (g - dot) / s).collect::<Vec<_>>());
                }
                Op::L2Normalize(x) => {
                    let r = self.nodes[x].value.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
                    let gx: Vec<f64> = g.iter().zip(y).map(|(g, y)| (g - y * dot) / r).collect();
                    accumulate(&mut adj, x, &gx);
                }
                Op::DivByMax(x) => {
                    let v = &self.nodes[x].value;
                    let (arg, peak) = v
                        .iter()
                        .copied()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best });
                    let mut gx: Vec<f64> = g.iter().map(|g| g / peak).collect();
                    let dot: f64 = g.iter().zip(v).map(|(g, v)| g * v).sum();
                    gx[arg] -= dot / (peak * peak);
                    accumulate(&mut adj, x, &gx);
                }
            }
        }
        Ok(Gradients { du, dw })
    }
}

fn column_sums(buf: &[f64], n: usize) -> Vec<f64> {
    let mut col = vec![0.0; n];
    for row in buf.chunks_exact(n) {
        for (c, v) in col.iter_mut().zip(row) {
            *c += v;
        }
    }
    col
}

fn accumulate(adj: &mut [Option<Vec<f64>>], id: usize, g: &[f64]) {
    match &mut adj[id] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, g)| *a += g),
        slot @ None => *slot = Some(g.to_vec()),
    }
}
