use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NetError, TaskId, TransferDecision};
use crate::nncore::{ActivationKind, DenseGraph, Source, Tape, WeightBlock};

pub const HIDDEN_DEPTH: usize = 2;

/// Position inside a column: a hidden layer (0-based) or the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Hidden(usize),
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    /// Earlier column into a later column or head.
    Forward,
    /// Later column's last hidden layer into an earlier head.
    Backward,
    /// Units added while reducing confusion, feeding the other confused head.
    Confusion,
}

/// A weight group between two columns. The block itself lives on graph edge
/// `edge`; the group is enabled iff that edge is.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGroup {
    pub source: TaskId,
    pub source_layer: usize,
    pub dest: TaskId,
    pub dest_layer: Layer,
    pub kind: LinkKind,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub task: TaskId,
    pub nodes: [usize; HIDDEN_DEPTH],
    /// Edges feeding this column's own units from the raw input or from
    /// the column itself.
    pub intra_edges: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub task: TaskId,
    pub node: usize,
    /// Edges from the task's own last hidden layer. The first one carries
    /// the head bias.
    pub own_edges: Vec<usize>,
}

/// Groups of blocks addressed by [`LifelongNetwork::set_consolidation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Column(TaskId),
    /// The head's own segment plus every link group ending at the head.
    Head(TaskId),
    TransferInto(TaskId),
    TransferOutOf(TaskId),
    All,
}

#[derive(Debug, Clone)]
pub struct LifelongNetwork {
    graph: DenseGraph,
    columns: Vec<Column>,
    heads: Vec<Head>,
    links: Vec<LinkGroup>,
    rng: ChaCha8Rng,
}

fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    let total = fan_in + fan_out;
    if total == 0 {
        0.0
    } else {
        (6.0 / total as f64).sqrt()
    }
}

impl LifelongNetwork {
    pub fn new(input_dim: usize, seed: u64) -> Result<Self, NetError> {
        if input_dim == 0 {
            return Err(NetError::InvalidInputDim);
        }
        Ok(Self {
            graph: DenseGraph::new(input_dim),
            columns: Vec::new(),
            heads: Vec::new(),
            links: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.graph.input_dim()
    }

    pub fn num_tasks(&self) -> usize {
        self.columns.len()
    }

    pub fn graph(&self) -> &DenseGraph {
        &self.graph
    }

    /// Raw graph access. Intended for procedures and tests; structural edits
    /// through this handle bypass the network's bookkeeping.
    pub fn graph_mut(&mut self) -> &mut DenseGraph {
        &mut self.graph
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn heads(&self) -> &[Head] {
        &self.heads
    }

    pub fn links(&self) -> &[LinkGroup] {
        &self.links
    }

    fn check(&self, t: TaskId) -> Result<(), NetError> {
        if t.0 < self.columns.len() {
            Ok(())
        } else {
            Err(NetError::UnknownTask(t))
        }
    }

    pub fn column(&self, t: TaskId) -> Result<&Column, NetError> {
        self.check(t)?;
        Ok(&self.columns[t.0])
    }

    pub fn head(&self, t: TaskId) -> Result<&Head, NetError> {
        self.check(t)?;
        Ok(&self.heads[t.0])
    }

    pub fn layer_sizes(&self, t: TaskId) -> Result<[usize; HIDDEN_DEPTH], NetError> {
        let col = self.column(t)?;
        Ok(col.nodes.map(|n| self.graph.nodes()[n].width))
    }

    /// Tasks whose last hidden layer feeds head `t` through an enabled edge,
    /// in edge creation order (own column first).
    pub fn head_input_segments(&self, t: TaskId) -> Result<Vec<TaskId>, NetError> {
        let head = self.head(t)?;
        let mut out = Vec::new();
        for &e in self.graph.incoming(head.node) {
            let edge = self.graph.edge(e);
            if !edge.enabled {
                continue;
            }
            if let Source::Node(n) = edge.src {
                if let Some(task) = self.task_of_node(n) {
                    if !out.contains(&task) {
                        out.push(task);
                    }
                }
            }
        }
        Ok(out)
    }

    fn task_of_node(&self, node: usize) -> Option<TaskId> {
        self.columns
            .iter()
            .find(|c| c.nodes.contains(&node))
            .map(|c| c.task)
    }

    /// Total width of enabled inputs into `node`.
    fn fan_in(&self, node: usize) -> usize {
        self.graph
            .incoming(node)
            .iter()
            .map(|&e| self.graph.edge(e))
            .filter(|e| e.enabled)
            .map(|e| e.src_range.len())
            .sum()
    }

    fn random_block(&mut self, rows: usize, inputs: usize, bias: bool, limit: f64) -> WeightBlock {
        let weights: Vec<f64> = (0..rows * inputs)
            .map(|_| {
                if limit > 0.0 {
                    self.rng.gen_range(-limit..=limit)
                } else {
                    0.0
                }
            })
            .collect();
        let zeros = vec![0.0; rows];
        WeightBlock::from_parts(rows, inputs, &weights, bias.then_some(zeros.as_slice()))
            .expect("dimensions are consistent by construction")
    }

    /// Weights of head `t` over its own last hidden layer (full current
    /// width, zero where no own edge reaches) and the head bias.
    fn own_head_weights(&self, t: TaskId) -> (Vec<f64>, f64) {
        let head = &self.heads[t.0];
        let l2 = self.columns[t.0].nodes[HIDDEN_DEPTH - 1];
        let mut w = vec![0.0; self.graph.nodes()[l2].width];
        let mut bias = 0.0;
        for &e in &head.own_edges {
            let edge = self.graph.edge(e);
            let block = &edge.block;
            for (k, i) in edge.src_range.clone().enumerate() {
                w[i] += block.weight(0, k);
            }
            if let Some(b) = block.bias(0) {
                bias += b;
            }
        }
        (w, bias)
    }

    /// Appends a column with `n_units` per hidden layer, wired according to
    /// `decision`. New blocks start unconsolidated (b = 0).
    pub fn add_task(
        &mut self,
        n_units: usize,
        decision: &TransferDecision,
    ) -> Result<TaskId, NetError> {
        for &s in decision.enabled_sources.iter().chain(&decision.copy_source) {
            self.check(s)?;
        }
        if n_units == 0 && decision.enabled_sources.is_empty() && decision.copy_source.is_none() {
            return Err(NetError::Precondition(
                "a column without units needs a transfer or copy source".into(),
            ));
        }
        let t = TaskId(self.columns.len());
        let input_dim = self.graph.input_dim();
        let l1 = self.graph.add_node(n_units, ActivationKind::ReLU);
        let l2 = self.graph.add_node(n_units, ActivationKind::ReLU);
        let head = self.graph.add_node(1, ActivationKind::Sigmoid);
        let sources: Vec<TaskId> = decision.enabled_sources.iter().copied().collect();

        let limit = glorot_limit(input_dim, n_units);
        let block = self.random_block(n_units, input_dim, true, limit);
        let e1 = self
            .graph
            .add_edge(Source::Input, 0..input_dim, l1, 0..n_units, block)?;

        let src_l1: Vec<(TaskId, usize, usize)> = sources
            .iter()
            .map(|&s| {
                let n = self.columns[s.0].nodes[0];
                (s, n, self.graph.nodes()[n].width)
            })
            .collect();
        let fan_in = n_units + src_l1.iter().map(|s| s.2).sum::<usize>();
        let limit = glorot_limit(fan_in, n_units);
        let block = self.random_block(n_units, n_units, true, limit);
        let e2 = self
            .graph
            .add_edge(Source::Node(l1), 0..n_units, l2, 0..n_units, block)?;
        let mut new_links = Vec::new();
        for (s, node, width) in src_l1 {
            let block = self.random_block(n_units, width, false, limit);
            let edge = self
                .graph
                .add_edge(Source::Node(node), 0..width, l2, 0..n_units, block)?;
            new_links.push(LinkGroup {
                source: s,
                source_layer: 0,
                dest: t,
                dest_layer: Layer::Hidden(1),
                kind: LinkKind::Forward,
                edge,
            });
        }

        let mut head_sources = sources.clone();
        if let Some(c) = decision.copy_source {
            if !head_sources.contains(&c) {
                head_sources.push(c);
            }
        }
        let src_l2: Vec<(TaskId, usize, usize)> = head_sources
            .iter()
            .map(|&s| {
                let n = self.columns[s.0].nodes[HIDDEN_DEPTH - 1];
                (s, n, self.graph.nodes()[n].width)
            })
            .collect();
        let fan_in = n_units + src_l2.iter().map(|s| s.2).sum::<usize>();
        let limit = glorot_limit(fan_in, 1);
        let copied = decision.copy_source.map(|c| self.own_head_weights(c));
        let mut block = self.random_block(1, n_units, true, limit);
        if let Some((_, bias)) = &copied {
            block.set_bias(0, *bias);
            block.set_consolidation(0.0)?;
        }
        let e_head = self
            .graph
            .add_edge(Source::Node(l2), 0..n_units, head, 0..1, block)?;
        for (s, node, width) in src_l2 {
            let block = match (&copied, decision.copy_source) {
                (Some((w, _)), Some(c)) if c == s => WeightBlock::from_parts(1, width, w, None)?,
                _ => self.random_block(1, width, false, limit),
            };
            let edge = self
                .graph
                .add_edge(Source::Node(node), 0..width, head, 0..1, block)?;
            new_links.push(LinkGroup {
                source: s,
                source_layer: HIDDEN_DEPTH - 1,
                dest: t,
                dest_layer: Layer::Head,
                kind: LinkKind::Forward,
                edge,
            });
        }

        self.columns.push(Column {
            task: t,
            nodes: [l1, l2],
            intra_edges: vec![e1, e2],
        });
        self.heads.push(Head {
            task: t,
            node: head,
            own_edges: vec![e_head],
        });
        self.links.extend(new_links);
        Ok(t)
    }

    /// Connects `from`'s last hidden layer to `to`'s head with a freshly
    /// initialized, unconsolidated block. Returns the link group index.
    pub fn add_backward_links(&mut self, from: TaskId, to: TaskId) -> Result<usize, NetError> {
        self.check(from)?;
        self.check(to)?;
        if from.0 <= to.0 {
            return Err(NetError::Precondition(format!(
                "backward links need a later source ({from} -> {to})"
            )));
        }
        if self
            .links
            .iter()
            .any(|l| l.kind == LinkKind::Backward && l.source == from && l.dest == to)
        {
            return Err(NetError::Precondition(format!(
                "backward link {from} -> {to} already present"
            )));
        }
        let src = self.columns[from.0].nodes[HIDDEN_DEPTH - 1];
        let width = self.graph.nodes()[src].width;
        let head = self.heads[to.0].node;
        let limit = glorot_limit(self.fan_in(head) + width, 1);
        let block = self.random_block(1, width, false, limit);
        let edge = self
            .graph
            .add_edge(Source::Node(src), 0..width, head, 0..1, block)?;
        self.links.push(LinkGroup {
            source: from,
            source_layer: HIDDEN_DEPTH - 1,
            dest: to,
            dest_layer: Layer::Head,
            kind: LinkKind::Backward,
            edge,
        });
        Ok(self.links.len() - 1)
    }

    /// Adds `extra` units to each hidden layer of column `t`. The new last
    /// hidden units feed `t`'s own head and each head in `also_feed`.
    /// Returns the ids of every new edge.
    pub fn expand_column(
        &mut self,
        t: TaskId,
        extra: usize,
        also_feed: &[TaskId],
    ) -> Result<Vec<usize>, NetError> {
        self.check(t)?;
        for &h in also_feed {
            self.check(h)?;
            if h == t {
                return Err(NetError::Precondition(format!("{t} always feeds its own head")));
            }
        }
        if extra == 0 {
            return Ok(Vec::new());
        }
        let input_dim = self.graph.input_dim();
        let [l1, l2] = self.columns[t.0].nodes;
        let n1 = self.graph.nodes()[l1].width;
        let n2 = self.graph.nodes()[l2].width;
        self.graph.grow_node(l1, extra);
        self.graph.grow_node(l2, extra);
        let mut created = Vec::new();

        let limit = glorot_limit(input_dim, extra);
        let block = self.random_block(extra, input_dim, true, limit);
        let e = self
            .graph
            .add_edge(Source::Input, 0..input_dim, l1, n1..n1 + extra, block)?;
        self.columns[t.0].intra_edges.push(e);
        created.push(e);

        let limit = glorot_limit(n1 + extra, extra);
        let block = self.random_block(extra, n1 + extra, true, limit);
        let e = self
            .graph
            .add_edge(Source::Node(l1), 0..n1 + extra, l2, n2..n2 + extra, block)?;
        self.columns[t.0].intra_edges.push(e);
        created.push(e);

        let new_units = n2..n2 + extra;
        for h in std::iter::once(t).chain(also_feed.iter().copied()) {
            let head = self.heads[h.0].node;
            let limit = glorot_limit(self.fan_in(head) + extra, 1);
            let block = self.random_block(1, extra, false, limit);
            let e = self
                .graph
                .add_edge(Source::Node(l2), new_units.clone(), head, 0..1, block)?;
            if h == t {
                self.heads[t.0].own_edges.push(e);
            } else {
                self.links.push(LinkGroup {
                    source: t,
                    source_layer: HIDDEN_DEPTH - 1,
                    dest: h,
                    dest_layer: Layer::Head,
                    kind: LinkKind::Confusion,
                    edge: e,
                });
            }
            created.push(e);
        }
        Ok(created)
    }

    pub fn set_link_enabled(&mut self, link: usize, enabled: bool) -> Result<(), NetError> {
        let edge = self
            .links
            .get(link)
            .ok_or_else(|| NetError::Precondition(format!("unknown link group {link}")))?
            .edge;
        self.graph.edge_mut(edge).enabled = enabled;
        Ok(())
    }

    /// Edge ids matched by `selector`, ascending.
    pub fn select(&self, selector: Selector) -> Result<BTreeSet<usize>, NetError> {
        let mut out = BTreeSet::new();
        match selector {
            Selector::All => out.extend(0..self.graph.edges().len()),
            Selector::Column(t) => out.extend(&self.column(t)?.intra_edges),
            Selector::Head(t) => {
                out.extend(&self.head(t)?.own_edges);
                out.extend(
                    self.links
                        .iter()
                        .filter(|l| l.dest == t && l.dest_layer == Layer::Head)
                        .map(|l| l.edge),
                );
            }
            Selector::TransferInto(t) => {
                self.check(t)?;
                out.extend(self.links.iter().filter(|l| l.dest == t).map(|l| l.edge));
            }
            Selector::TransferOutOf(t) => {
                self.check(t)?;
                out.extend(self.links.iter().filter(|l| l.source == t).map(|l| l.edge));
            }
        }
        Ok(out)
    }

    /// Sets the consolidation of every block matched by `selector`. A finite
    /// value re-anchors the targets at the current weights.
    pub fn set_consolidation(&mut self, selector: Selector, value: f64) -> Result<(), NetError> {
        for e in self.select(selector)? {
            self.graph.edge_mut(e).block.set_consolidation(value)?;
        }
        Ok(())
    }

    /// Head probabilities for one input, in task order.
    pub fn forward_all(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        let tape = self.graph.forward(x)?;
        Ok(self.head_probs(&tape))
    }

    pub fn head_probs(&self, tape: &Tape) -> Vec<f64> {
        self.heads.iter().map(|h| tape.acts[h.node][0]).collect()
    }

    /// Head probabilities for a batch: one row per sample.
    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NetError> {
        let mut tape = self.graph.new_tape();
        xs.iter()
            .map(|x| {
                self.graph.forward_into(x, &mut tape, None)?;
                Ok(self.head_probs(&tape))
            })
            .collect()
    }

    /// Outputs of head `t` over a batch.
    pub fn head_outputs(&self, t: TaskId, xs: &[Vec<f64>]) -> Result<Vec<f64>, NetError> {
        let node = self.head(t)?.node;
        let mut tape = self.graph.new_tape();
        xs.iter()
            .map(|x| {
                self.graph.forward_into(x, &mut tape, None)?;
                Ok(tape.acts[node][0])
            })
            .collect()
    }

    /// Mean output of head `prev` over `positives`.
    pub fn compute_similarity(&self, prev: TaskId, positives: &[Vec<f64>]) -> Result<f64, NetError> {
        self.check(prev)?;
        if positives.is_empty() {
            return Err(NetError::EmptySamples);
        }
        let outs = self.head_outputs(prev, positives)?;
        Ok(outs.iter().sum::<f64>() / outs.len() as f64)
    }

    /// Similarities of every learned task to a candidate task's positives.
    pub fn similarities(&self, positives: &[Vec<f64>]) -> Result<Vec<f64>, NetError> {
        (0..self.num_tasks())
            .map(|i| self.compute_similarity(TaskId(i), positives))
            .collect()
    }
}
