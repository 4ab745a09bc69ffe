//! A small dense DAG: nodes are groups of units, edges are weight blocks
//! mapping a contiguous slice of a source node into a contiguous slice of a
//! destination node. A node's pre-activation is the sum of all enabled
//! incoming edges (each edge may carry its own bias).

use std::collections::BTreeSet;
use std::ops::Range;

use super::{bce_loss, ActivationKind, NnError, WeightBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Input,
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub width: usize,
    pub activation: ActivationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: Source,
    pub src_range: Range<usize>,
    pub dst: usize,
    pub dst_range: Range<usize>,
    pub block: WeightBlock,
    pub enabled: bool,
}

/// Per-node activations of one forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tape {
    pub acts: Vec<Vec<f64>>,
}

/// Gradient buffers aligned with the graph's edges (same layout as each
/// edge's block, bias included).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub per_edge: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(graph: &DenseGraph) -> Self {
        Self {
            per_edge: graph.edges.iter().map(|e| vec![0.0; e.block.len()]).collect(),
        }
    }

    pub fn clear(&mut self) {
        for g in &mut self.per_edge {
            g.fill(0.0);
        }
    }
}

/// Reusable scratch space for [`DenseGraph::accumulate_backward`].
#[derive(Debug, Default)]
pub struct Workspace {
    da: Vec<Vec<f64>>,
    touched: Vec<bool>,
    dz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGraph {
    input_dim: usize,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    incoming: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl DenseGraph {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            nodes: Vec::new(),
            edges: Vec::new(),
            incoming: Vec::new(),
            order: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn edge_mut(&mut self, id: usize) -> &mut Edge {
        &mut self.edges[id]
    }

    pub fn incoming(&self, node: usize) -> &[usize] {
        &self.incoming[node]
    }

    /// Nodes in evaluation order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn source_width(&self, src: Source) -> usize {
        match src {
            Source::Input => self.input_dim,
            Source::Node(n) => self.nodes[n].width,
        }
    }

    pub fn add_node(&mut self, width: usize, activation: ActivationKind) -> usize {
        self.nodes.push(Node { width, activation });
        self.incoming.push(Vec::new());
        let id = self.nodes.len() - 1;
        self.order.push(id);
        id
    }

    /// Appends `extra` units to a node. Existing edges keep their ranges, so
    /// the new units start with no inputs and no consumers.
    pub fn grow_node(&mut self, node: usize, extra: usize) {
        self.nodes[node].width += extra;
    }

    pub fn add_edge(
        &mut self,
        src: Source,
        src_range: Range<usize>,
        dst: usize,
        dst_range: Range<usize>,
        block: WeightBlock,
    ) -> Result<usize, NnError> {
        if dst >= self.nodes.len() {
            return Err(NnError::Topology(format!("unknown destination node {dst}")));
        }
        if let Source::Node(s) = src {
            if s >= self.nodes.len() {
                return Err(NnError::Topology(format!("unknown source node {s}")));
            }
            if s == dst {
                return Err(NnError::Topology(format!("self loop on node {s}")));
            }
        }
        if src_range.end > self.source_width(src) || src_range.start > src_range.end {
            return Err(NnError::Topology(format!(
                "source range {src_range:?} outside width {}",
                self.source_width(src)
            )));
        }
        if dst_range.end > self.nodes[dst].width || dst_range.start > dst_range.end {
            return Err(NnError::Topology(format!(
                "destination range {dst_range:?} outside width {}",
                self.nodes[dst].width
            )));
        }
        if block.rows() != dst_range.len() {
            return Err(NnError::DimensionMismatch {
                what: "block rows",
                expected: dst_range.len(),
                actual: block.rows(),
            });
        }
        if block.inputs() != src_range.len() {
            return Err(NnError::DimensionMismatch {
                what: "block inputs",
                expected: src_range.len(),
                actual: block.inputs(),
            });
        }
        self.edges.push(Edge {
            src,
            src_range,
            dst,
            dst_range,
            block,
            enabled: true,
        });
        let id = self.edges.len() - 1;
        self.incoming[dst].push(id);
        match self.topological_order() {
            Some(order) => {
                self.order = order;
                Ok(id)
            }
            None => {
                self.edges.pop();
                self.incoming[dst].pop();
                Err(NnError::Topology("edge would create a cycle".into()))
            }
        }
    }

    fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut outgoing = vec![Vec::new(); n];
        for e in &self.edges {
            if let Source::Node(s) = e.src {
                indegree[e.dst] += 1;
                outgoing[s].push(e.dst);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            order.push(next);
            for &d in &outgoing[next] {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    ready.insert(d);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn new_tape(&self) -> Tape {
        Tape {
            acts: self.nodes.iter().map(|n| vec![0.0; n.width]).collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Tape, NnError> {
        let mut tape = self.new_tape();
        self.forward_into(x, &mut tape, None)?;
        Ok(tape)
    }

    /// Runs the forward pass into `tape`. Nodes flagged in `skip` are assumed
    /// to already hold valid activations and are not recomputed.
    pub fn forward_into(
        &self,
        x: &[f64],
        tape: &mut Tape,
        skip: Option<&[bool]>,
    ) -> Result<(), NnError> {
        if x.len() != self.input_dim {
            return Err(NnError::DimensionMismatch {
                what: "network input",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        if tape.acts.len() != self.nodes.len() {
            tape.acts.resize(self.nodes.len(), Vec::new());
        }
        for &n in &self.order {
            if skip.is_some_and(|s| s[n]) {
                continue;
            }
            let width = self.nodes[n].width;
            let mut z = std::mem::take(&mut tape.acts[n]);
            z.clear();
            z.resize(width, 0.0);
            for &e in &self.incoming[n] {
                let edge = &self.edges[e];
                if !edge.enabled {
                    continue;
                }
                let src = match edge.src {
                    Source::Input => &x[edge.src_range.clone()],
                    Source::Node(s) => &tape.acts[s][edge.src_range.clone()],
                };
                edge.block
                    .accumulate_forward(src, &mut z[edge.dst_range.clone()]);
            }
            let act = self.nodes[n].activation;
            for v in &mut z {
                *v = act.apply(*v);
            }
            tape.acts[n] = z;
        }
        Ok(())
    }

    /// For each node, whether any trainable enabled edge lies upstream of it
    /// (including its own incoming edges).
    pub fn upstream_trainable(&self, trainable: &[bool]) -> Vec<bool> {
        let mut up = vec![false; self.nodes.len()];
        for &n in &self.order {
            up[n] = self.incoming[n].iter().any(|&e| {
                let edge = &self.edges[e];
                edge.enabled
                    && (trainable[e]
                        || matches!(edge.src, Source::Node(s) if up[s]))
            });
        }
        up
    }

    /// Accumulates parameter gradients of one sample into `grads`.
    ///
    /// `seeds` gives `dL/dz` for pre-activations of single-unit output nodes.
    /// Only edges with `trainable[e]` receive gradient; deltas propagate only
    /// into nodes with `upstream[n]`.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate_backward(
        &self,
        x: &[f64],
        tape: &Tape,
        seeds: &[(usize, f64)],
        trainable: &[bool],
        upstream: &[bool],
        grads: &mut Gradients,
        ws: &mut Workspace,
    ) {
        let n_nodes = self.nodes.len();
        if ws.da.len() != n_nodes {
            ws.da.resize(n_nodes, Vec::new());
            ws.touched.resize(n_nodes, false);
        }
        for n in 0..n_nodes {
            ws.touched[n] = false;
        }
        let mut any = false;
        for &(node, _) in seeds {
            if !upstream[node] {
                continue;
            }
            if !ws.touched[node] {
                let da = &mut ws.da[node];
                da.clear();
                da.resize(self.nodes[node].width, 0.0);
                ws.touched[node] = true;
            }
            any = true;
        }
        if !any {
            return;
        }
        for &n in self.order.iter().rev() {
            if !ws.touched[n] || !upstream[n] {
                continue;
            }
            let width = self.nodes[n].width;
            let act = self.nodes[n].activation;
            ws.dz.clear();
            ws.dz.extend(
                ws.da[n]
                    .iter()
                    .zip(&tape.acts[n])
                    .map(|(&d, &a)| d * act.derivative_from_output(a)),
            );
            for &(node, seed) in seeds {
                if node == n {
                    ws.dz[0] += seed;
                }
            }
            debug_assert_eq!(ws.dz.len(), width);
            for &e in &self.incoming[n] {
                let edge = &self.edges[e];
                if !edge.enabled {
                    continue;
                }
                let dzr = &ws.dz[edge.dst_range.clone()];
                let src_act: &[f64] = match edge.src {
                    Source::Input => &x[edge.src_range.clone()],
                    Source::Node(s) => &tape.acts[s][edge.src_range.clone()],
                };
                let block = &edge.block;
                let stride = block.stride();
                let inputs = block.inputs();
                if trainable[e] {
                    let g = &mut grads.per_edge[e];
                    for (r, &d) in dzr.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        let row = &mut g[r * stride..(r + 1) * stride];
                        for (gv, &sv) in row[..inputs].iter_mut().zip(src_act) {
                            *gv += d * sv;
                        }
                        if block.has_bias() {
                            row[inputs] += d;
                        }
                    }
                }
                if let Source::Node(s) = edge.src {
                    if upstream[s] {
                        let da_s = &mut ws.da[s];
                        if !ws.touched[s] {
                            da_s.clear();
                            da_s.resize(self.nodes[s].width, 0.0);
                            ws.touched[s] = true;
                        }
                        let da_slice = &mut da_s[edge.src_range.clone()];
                        let w = block.values();
                        for (r, &d) in dzr.iter().enumerate() {
                            if d == 0.0 {
                                continue;
                            }
                            let row = &w[r * stride..r * stride + inputs];
                            for (dv, &wv) in da_slice.iter_mut().zip(row) {
                                *dv += wv * d;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Gradients of the batch-mean of `Σ_h bce(output_h, target_h)` over the
    /// `active` single-unit sigmoid nodes, with respect to every edge block.
    ///
    /// Returns the gradients and the mean loss. Edges that cannot reach an
    /// active node get all-zero gradients.
    pub fn backprop(
        &self,
        inputs: &[&[f64]],
        targets: &[Vec<f64>],
        active: &[usize],
    ) -> Result<(Gradients, f64), NnError> {
        let trainable = vec![true; self.edges.len()];
        let mut grads = Gradients::zeros_like(self);
        let loss = self.backprop_masked(inputs, targets, active, &trainable, &mut grads)?;
        Ok((grads, loss))
    }

    /// Like [`DenseGraph::backprop`] but only accumulates into edges flagged
    /// in `trainable` and adds into the given buffers.
    pub fn backprop_masked(
        &self,
        inputs: &[&[f64]],
        targets: &[Vec<f64>],
        active: &[usize],
        trainable: &[bool],
        grads: &mut Gradients,
    ) -> Result<f64, NnError> {
        if inputs.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        if active.is_empty() {
            return Err(NnError::NoActiveOutputs);
        }
        if targets.len() != inputs.len() {
            return Err(NnError::DimensionMismatch {
                what: "target rows",
                expected: inputs.len(),
                actual: targets.len(),
            });
        }
        for &a in active {
            let node = self
                .nodes
                .get(a)
                .ok_or_else(|| NnError::Topology(format!("unknown output node {a}")))?;
            if node.width != 1 || node.activation != ActivationKind::Sigmoid {
                return Err(NnError::Topology(format!(
                    "output node {a} must be a single sigmoid unit"
                )));
            }
        }
        let upstream = self.upstream_trainable(trainable);
        let scale = 1.0 / inputs.len() as f64;
        let mut tape = self.new_tape();
        let mut ws = Workspace::default();
        let mut seeds = Vec::with_capacity(active.len());
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            if t.len() != active.len() {
                return Err(NnError::DimensionMismatch {
                    what: "targets per sample",
                    expected: active.len(),
                    actual: t.len(),
                });
            }
            self.forward_into(x, &mut tape, None)?;
            seeds.clear();
            for (&node, &y) in active.iter().zip(t) {
                let p = tape.acts[node][0];
                loss += bce_loss(p, y);
                seeds.push((node, (p - y) * scale));
            }
            self.accumulate_backward(x, &tape, &seeds, trainable, &upstream, grads, &mut ws);
        }
        Ok(loss * scale)
    }
}
