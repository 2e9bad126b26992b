//! Graph-state network recovery: preparation via CPHASE, tessellation into
//! GHZ subnetworks, failure detection, parity-check broadcast, node
//! excision, GHZ substitution, and criticality classification.
//!
//! Node excision is graph-state vertex deletion: a Z-basis measurement of
//! the node followed by a conditional Z on its neighbors when the outcome
//! is 1, which leaves exactly the graph state of the induced subgraph.
//! Substitution teleports a fresh |+⟩ through the block's GHZ resource
//! (Bell measurement at one operative block node, X measurements at the
//! rest, parity broadcast on the block's channels, Pauli correction) and
//! then re-links the revived node to its surviving former neighbors with
//! CPHASE.

use crate::coding::{decode_record, encode_all, OutcomeRecord, ParityMessage, PauliFrame};
use crate::qsim::{BellOutcome, Pauli, QsimError, RandomSource, StateVector, XOutcome};
use num_complex::Complex64;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type NodeId = usize;

/// Node cap for prepared graph networks (register headroom below the
/// simulator's hard cap).
pub const MAX_NETWORK_NODES: usize = 20;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("topology parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not part of block {1}")]
    NodeNotInBlock(NodeId, usize),
    #[error("topology has {0} nodes, above the cap of {MAX_NETWORK_NODES}")]
    NodeCapExceeded(usize),
    #[error("blocks do not cover node {0}")]
    UncoveredNode(NodeId),
    #[error("excising the input node would lose the carried state; recovery must substitute it")]
    InputNodeExcision,
    #[error("block {0}'s GHZ resource is already consumed")]
    ResourceConsumed(usize),
    #[error("block {0}'s GHZ resource is unusable: {1}")]
    ResourceUnusable(usize, String),
    #[error("node {0} is not excised from the state; cannot substitute")]
    NotExcised(NodeId),
    #[error("missing status for node {0}")]
    MissingStatus(NodeId),
    #[error("detector rate {0} outside [0, 1]")]
    BadDetectorRate(f64),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Coding(#[from] crate::coding::CodingError),
}

pub type Result<T> = std::result::Result<T, RecoveryError>;

/// Tessellation block: a node subset holding one GHZ resource of matching
/// size.
#[derive(Debug, Clone)]
pub struct Block {
    pub nodes: Vec<NodeId>,
}

/// Node/edge description of the network with its tessellation.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    nodes: Vec<NodeId>,
    edges: BTreeSet<(NodeId, NodeId)>,
    blocks: Vec<Block>,
    input: NodeId,
}

fn norm_edge(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl NetworkTopology {
    pub fn new(
        nodes: Vec<NodeId>,
        edges: Vec<(NodeId, NodeId)>,
        blocks: Vec<Block>,
        input: Option<NodeId>,
    ) -> Result<Self> {
        let node_set: BTreeSet<NodeId> = nodes.iter().copied().collect();
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            if !node_set.contains(&a) {
                return Err(RecoveryError::UnknownNode(a));
            }
            if !node_set.contains(&b) {
                return Err(RecoveryError::UnknownNode(b));
            }
            if a != b {
                edge_set.insert(norm_edge(a, b));
            }
        }
        for block in &blocks {
            for &v in &block.nodes {
                if !node_set.contains(&v) {
                    return Err(RecoveryError::UnknownNode(v));
                }
            }
        }
        for &v in &nodes {
            if !blocks.iter().any(|b| b.nodes.contains(&v)) {
                return Err(RecoveryError::UncoveredNode(v));
            }
        }
        let input = match input {
            Some(v) => {
                if !node_set.contains(&v) {
                    return Err(RecoveryError::UnknownNode(v));
                }
                v
            }
            None => *nodes.first().ok_or(RecoveryError::NodeCapExceeded(0))?,
        };
        Ok(Self {
            nodes,
            edges: edge_set,
            blocks,
            input,
        })
    }

    /// Parse the line-oriented topology format: `node <id>`, `edge <a> <b>`,
    /// `block <id list>`, `input <id>`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut blocks = Vec::new();
        let mut input = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let keyword = parts.next().unwrap();
            let args: Vec<NodeId> = parts
                .map(|p| {
                    p.parse::<NodeId>().map_err(|_| RecoveryError::Parse {
                        line: line_no,
                        message: format!("expected a node id, got `{p}`"),
                    })
                })
                .collect::<Result<_>>()?;
            match keyword {
                "node" => match args.as_slice() {
                    [id] => nodes.push(*id),
                    _ => {
                        return Err(RecoveryError::Parse {
                            line: line_no,
                            message: "node takes exactly one id".into(),
                        })
                    }
                },
                "edge" => match args.as_slice() {
                    [a, b] => edges.push((*a, *b)),
                    _ => {
                        return Err(RecoveryError::Parse {
                            line: line_no,
                            message: "edge takes exactly two ids".into(),
                        })
                    }
                },
                "block" => {
                    if args.is_empty() {
                        return Err(RecoveryError::Parse {
                            line: line_no,
                            message: "block needs at least one id".into(),
                        });
                    }
                    blocks.push(Block { nodes: args });
                }
                "input" => match args.as_slice() {
                    [id] => input = Some(*id),
                    _ => {
                        return Err(RecoveryError::Parse {
                            line: line_no,
                            message: "input takes exactly one id".into(),
                        })
                    }
                },
                other => {
                    return Err(RecoveryError::Parse {
                        line: line_no,
                        message: format!("unknown keyword `{other}`"),
                    })
                }
            }
        }
        Self::new(nodes, edges, blocks, input)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn input(&self) -> NodeId {
        self.input
    }

    pub fn neighbors(&self, v: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.nodes.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for u in self.neighbors(v) {
                if seen.insert(u) {
                    stack.push(u);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    /// Nodes of block `idx` shared with at least one other block.
    pub fn block_boundary(&self, idx: usize) -> BTreeSet<NodeId> {
        self.blocks[idx]
            .nodes
            .iter()
            .copied()
            .filter(|v| {
                self.blocks
                    .iter()
                    .enumerate()
                    .any(|(j, b)| j != idx && b.nodes.contains(v))
            })
            .collect()
    }
}

/// Per-node liveness as seen by the recovery pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Operative,
    Failed,
    Excised,
    Substituted,
}

impl NodeStatus {
    /// A node that can take part in block teleports.
    pub fn usable(self) -> bool {
        matches!(self, NodeStatus::Operative | NodeStatus::Substituted)
    }
}

impl std::fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NodeStatus::Operative => "operative",
            NodeStatus::Failed => "failed",
            NodeStatus::Excised => "excised",
            NodeStatus::Substituted => "substituted",
        };
        write!(f, "{s}")
    }
}

/// Abstract non-destructive detector; ideal by default.
#[derive(Debug, Clone, Copy)]
pub struct DetectorModel {
    pub false_negative_rate: f64,
    pub false_positive_rate: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            false_negative_rate: 0.0,
            false_positive_rate: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for rate in [self.false_negative_rate, self.false_positive_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(RecoveryError::BadDetectorRate(rate));
            }
        }
        Ok(())
    }
}

/// Run the detector over every node: failed nodes are reported operative
/// with the false-negative rate, operative ones failed with the
/// false-positive rate.
pub fn detect_failures(
    topology: &NetworkTopology,
    true_failures: &BTreeSet<NodeId>,
    detector: &DetectorModel,
    rng: &mut RandomSource,
) -> Result<BTreeMap<NodeId, NodeStatus>> {
    detector.validate()?;
    for v in true_failures {
        if !topology.nodes.contains(v) {
            return Err(RecoveryError::UnknownNode(*v));
        }
    }
    let mut out = BTreeMap::new();
    for &v in &topology.nodes {
        let truly_failed = true_failures.contains(&v);
        let reported_failed = if truly_failed {
            !rng.next_bool(detector.false_negative_rate)
        } else {
            rng.next_bool(detector.false_positive_rate)
        };
        out.insert(
            v,
            if reported_failed {
                NodeStatus::Failed
            } else {
                NodeStatus::Operative
            },
        );
    }
    Ok(out)
}

/// Encode a block's per-node operability bits (1 = operative) on the block's
/// parity channel structure; only the X-outcome lane is used.
pub fn broadcast_status(
    block: &Block,
    statuses: &BTreeMap<NodeId, NodeStatus>,
) -> Result<Vec<ParityMessage>> {
    let mut records = Vec::with_capacity(block.nodes.len());
    for &v in &block.nodes {
        let status = statuses.get(&v).ok_or(RecoveryError::MissingStatus(v))?;
        records.push(OutcomeRecord::new(
            v,
            BellOutcome::new(false, false),
            XOutcome::new(status.usable()),
        ));
    }
    Ok(encode_all(&records)?)
}

/// Reconstruct every block node's status bit from the channels
/// (X_j = E ⊕ E_j); any node of the block obtains the same vector.
pub fn decode_status(messages: &[ParityMessage], block: &Block) -> Result<BTreeMap<NodeId, bool>> {
    let mut out = BTreeMap::new();
    for &v in &block.nodes {
        let (_, b) = decode_record(messages, v)?;
        out.insert(v, b.bit);
    }
    Ok(out)
}

/// Criticality classification of a failure set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Criticality {
    Recoverable,
    Critical { witness_blocks: Vec<usize> },
}

impl Criticality {
    pub fn is_critical(&self) -> bool {
        matches!(self, Criticality::Critical { .. })
    }
}

/// Alternative formalizations of the criticality condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CriticalityRule {
    /// A block is a witness when its whole boundary has failed together
    /// with, for each connected boundary run, every adjacent node outside
    /// the run.
    #[default]
    BoundaryAndFlanks,
    /// A block is a witness as soon as its whole (nonempty) boundary failed.
    BoundaryOnly,
}

/// Connected components of `set` under the topology's edges.
fn runs_within(topology: &NetworkTopology, set: &BTreeSet<NodeId>) -> Vec<BTreeSet<NodeId>> {
    let mut remaining: BTreeSet<NodeId> = set.clone();
    let mut runs = Vec::new();
    while let Some(&start) = remaining.iter().next() {
        let mut run = BTreeSet::from([start]);
        remaining.remove(&start);
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for u in topology.neighbors(v) {
                if remaining.contains(&u) {
                    remaining.remove(&u);
                    run.insert(u);
                    stack.push(u);
                }
            }
        }
        runs.push(run);
    }
    runs
}

pub fn criticality_check(topology: &NetworkTopology, failures: &BTreeSet<NodeId>) -> Criticality {
    criticality_check_with(topology, failures, CriticalityRule::default())
}

pub fn criticality_check_with(
    topology: &NetworkTopology,
    failures: &BTreeSet<NodeId>,
    rule: CriticalityRule,
) -> Criticality {
    let mut witnesses = Vec::new();
    for idx in 0..topology.blocks.len() {
        let boundary = topology.block_boundary(idx);
        if boundary.is_empty() || !boundary.is_subset(failures) {
            continue;
        }
        let witness = match rule {
            CriticalityRule::BoundaryOnly => true,
            CriticalityRule::BoundaryAndFlanks => {
                runs_within(topology, &boundary).iter().all(|run| {
                    run.iter()
                        .flat_map(|&v| topology.neighbors(v))
                        .filter(|u| !run.contains(u))
                        .all(|u| failures.contains(&u))
                })
            }
        };
        if witness {
            witnesses.push(idx);
        }
    }
    if witnesses.is_empty() {
        Criticality::Recoverable
    } else {
        Criticality::Critical {
            witness_blocks: witnesses,
        }
    }
}

/// The entangled graph-state resource over a topology, with per-node
/// register bookkeeping, statuses, and block resources.
#[derive(Debug, Clone)]
pub struct GraphStateNetwork {
    topology: NetworkTopology,
    state: StateVector,
    positions: BTreeMap<NodeId, usize>,
    current_edges: BTreeSet<(NodeId, NodeId)>,
    statuses: BTreeMap<NodeId, NodeStatus>,
    resource_consumed: Vec<bool>,
    input_node: NodeId,
    input_carried: bool,
    warnings: Vec<String>,
}

/// Prepare the graph state: |φ⟩ at the input node, |+⟩ elsewhere, then
/// CPHASE along every edge. A disconnected topology is prepared with a
/// warning recorded on the network.
pub fn prepare_graph_network(
    topology: &NetworkTopology,
    phi: (Complex64, Complex64),
) -> Result<GraphStateNetwork> {
    let n = topology.nodes.len();
    if n == 0 || n > MAX_NETWORK_NODES {
        return Err(RecoveryError::NodeCapExceeded(n));
    }
    let mut warnings = Vec::new();
    if !topology.is_connected() {
        warnings.push("topology is disconnected".to_string());
    }
    let input_state = StateVector::prepare_arbitrary(phi.0, phi.1)?;
    let mut state: Option<StateVector> = None;
    let mut positions = BTreeMap::new();
    for (idx, &v) in topology.nodes.iter().enumerate() {
        let qubit = if v == topology.input {
            input_state.clone()
        } else {
            StateVector::plus_state()
        };
        state = Some(match state {
            None => qubit,
            Some(s) => s.tensor(&qubit)?,
        });
        positions.insert(v, idx);
    }
    let mut state = state.expect("at least one node");
    for &(a, b) in &topology.edges {
        state = state.apply_cphase(positions[&a], positions[&b])?;
    }
    let statuses = topology
        .nodes
        .iter()
        .map(|&v| (v, NodeStatus::Operative))
        .collect();
    Ok(GraphStateNetwork {
        current_edges: topology.edges.clone(),
        resource_consumed: vec![false; topology.blocks.len()],
        input_node: topology.input,
        input_carried: true,
        warnings,
        topology: topology.clone(),
        state,
        positions,
        statuses,
    })
}

impl GraphStateNetwork {
    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn input_node(&self) -> NodeId {
        self.input_node
    }

    /// Whether the prepared |φ⟩ payload is still present (cleared when the
    /// input node is excised; substitution restores structure, not data).
    pub fn input_carried(&self) -> bool {
        self.input_carried
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn statuses(&self) -> &BTreeMap<NodeId, NodeStatus> {
        &self.statuses
    }

    pub fn set_status(&mut self, v: NodeId, status: NodeStatus) {
        self.statuses.insert(v, status);
    }

    pub fn is_alive(&self, v: NodeId) -> bool {
        self.positions.contains_key(&v)
    }

    pub fn alive_nodes(&self) -> Vec<NodeId> {
        self.positions.keys().copied().collect()
    }

    pub fn qubit_of(&self, v: NodeId) -> Result<usize> {
        self.positions
            .get(&v)
            .copied()
            .ok_or(RecoveryError::UnknownNode(v))
    }

    pub fn resource_available(&self, block_idx: usize) -> bool {
        !self.resource_consumed[block_idx]
    }

    /// Reset a block's one-shot GHZ resource. Replenishment between failure
    /// events is an extension knob, gated by configuration at the call site.
    pub fn replenish_block(&mut self, block_idx: usize) {
        self.resource_consumed[block_idx] = false;
    }

    pub fn current_neighbors(&self, v: NodeId) -> Vec<NodeId> {
        self.current_edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// ⟨ψ| K_v |ψ⟩ for K_v = X_v ∏_{u ∈ N(v)} Z_u over the current edges.
    pub fn stabilizer_expectation(&self, v: NodeId) -> Result<f64> {
        let pos = self.qubit_of(v)?;
        let mut transformed = self.state.clone().apply_pauli(Pauli::X, pos)?;
        for u in self.current_neighbors(v) {
            transformed = transformed.apply_pauli(Pauli::Z, self.qubit_of(u)?)?;
        }
        Ok(self.state.inner_product(&transformed)?.re)
    }

    /// Stabilizer expectations for every alive node, in node-id order.
    pub fn stabilizer_report(&self) -> Result<Vec<(NodeId, f64)>> {
        self.alive_nodes()
            .into_iter()
            .map(|v| Ok((v, self.stabilizer_expectation(v)?)))
            .collect()
    }

    fn remove_position(&mut self, v: NodeId) {
        let removed = self.positions.remove(&v).expect("node present");
        for p in self.positions.values_mut() {
            if *p > removed {
                *p -= 1;
            }
        }
        self.current_edges.retain(|&(a, b)| a != v && b != v);
    }

    /// Disentangle and drop a node: Z measurement plus conditional Z on its
    /// neighbors, leaving the graph state of the induced subgraph.
    /// Excising the input node is refused here; recovery substitutes it and
    /// reports the data loss instead.
    pub fn excise_node(&mut self, v: NodeId, rng: &mut RandomSource) -> Result<bool> {
        if v == self.input_node && self.input_carried {
            return Err(RecoveryError::InputNodeExcision);
        }
        self.excise_unchecked(v, rng)
    }

    fn excise_unchecked(&mut self, v: NodeId, rng: &mut RandomSource) -> Result<bool> {
        let pos = self.qubit_of(v)?;
        let neighbors = self.current_neighbors(v);
        let (outcome, mut collapsed) = self.state.clone().measure_z(pos, rng)?;
        if outcome {
            for u in &neighbors {
                let mut q = self.qubit_of(*u)?;
                if q > pos {
                    q -= 1;
                }
                collapsed = collapsed.apply_pauli(Pauli::Z, q)?;
            }
        }
        self.state = collapsed;
        self.remove_position(v);
        self.statuses.insert(v, NodeStatus::Excised);
        if v == self.input_node {
            self.input_carried = false;
        }
        Ok(outcome)
    }

    /// Install a fresh qubit at an excised node's position by teleporting
    /// |+⟩ through the block's GHZ resource, then re-link it to the node's
    /// surviving former neighbors. Consumes the block's resource.
    pub fn substitute_node(
        &mut self,
        failed: NodeId,
        block_idx: usize,
        rng: &mut RandomSource,
    ) -> Result<SubstitutionRecord> {
        let block = self.topology.blocks[block_idx].clone();
        if !block.nodes.contains(&failed) {
            return Err(RecoveryError::NodeNotInBlock(failed, block_idx));
        }
        if self.resource_consumed[block_idx] {
            return Err(RecoveryError::ResourceConsumed(block_idx));
        }
        if self.is_alive(failed) {
            return Err(RecoveryError::NotExcised(failed));
        }
        let others: Vec<NodeId> = block
            .nodes
            .iter()
            .copied()
            .filter(|&v| v != failed)
            .collect();
        if others.is_empty() {
            return Err(RecoveryError::ResourceUnusable(
                block_idx,
                "block has no node besides the failed one".into(),
            ));
        }
        for &v in &others {
            let status = self
                .statuses
                .get(&v)
                .ok_or(RecoveryError::MissingStatus(v))?;
            if !status.usable() || !self.is_alive(v) {
                return Err(RecoveryError::ResourceUnusable(
                    block_idx,
                    format!("block node {v} is not operative"),
                ));
            }
        }

        let (delivered, record) =
            teleport_plus_through_block(&block, failed, &others, block_idx, rng)?;

        // Install the revived qubit and re-link it to surviving neighbors.
        self.state = self.state.tensor(&delivered)?;
        let new_pos = self.state.num_qubits() - 1;
        self.positions.insert(failed, new_pos);
        for u in self.topology.neighbors(failed) {
            if self.is_alive(u) && u != failed {
                let qu = self.qubit_of(u)?;
                self.state = self.state.clone().apply_cphase(new_pos, qu)?;
                self.current_edges.insert(norm_edge(failed, u));
            }
        }
        self.resource_consumed[block_idx] = true;
        self.statuses.insert(failed, NodeStatus::Substituted);
        Ok(record)
    }
}

/// Classical record of one block substitution.
#[derive(Debug, Clone)]
pub struct SubstitutionRecord {
    pub block: usize,
    pub sender: NodeId,
    pub helpers: Vec<NodeId>,
    pub messages: Vec<ParityMessage>,
    pub correction: PauliFrame,
}

/// Teleport a fresh |+⟩ through the block's GHZ resource to the failed
/// node's slot: Bell at the sender, X at every other operative block node,
/// parity broadcast, frame correction at the receiving slot.
fn teleport_plus_through_block(
    block: &Block,
    failed: NodeId,
    others: &[NodeId],
    block_idx: usize,
    rng: &mut RandomSource,
) -> Result<(StateVector, SubstitutionRecord)> {
    let k = block.nodes.len();
    if k < 2 {
        return Err(RecoveryError::ResourceUnusable(
            block_idx,
            format!("GHZ resource needs at least 2 qubits, block has {k}"),
        ));
    }
    let sender = others[0];
    let helpers: Vec<NodeId> = others[1..].to_vec();

    // Register: fresh |+⟩ at 0, then the block's GHZ qubits in block order.
    let mut state = StateVector::plus_state().tensor(&StateVector::prepare_ghz(k)?)?;
    let mut pos: BTreeMap<NodeId, usize> = block
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i + 1))
        .collect();
    let shift_after_removal = |pos: &mut BTreeMap<NodeId, usize>, removed: Vec<usize>| {
        for p in pos.values_mut() {
            *p -= removed.iter().filter(|&&r| r < *p).count();
        }
    };

    let sender_pos = pos[&sender];
    let (bell, after_bell) = state.measure_bell(0, sender_pos, rng)?;
    state = after_bell;
    pos.remove(&sender);
    shift_after_removal(&mut pos, vec![0, sender_pos]);

    let mut records = vec![OutcomeRecord::new(sender, bell, XOutcome::new(false))];
    for &h in &helpers {
        let hp = pos[&h];
        let (x, next) = state.measure_x(hp, rng)?;
        state = next;
        pos.remove(&h);
        shift_after_removal(&mut pos, vec![hp]);
        records.push(OutcomeRecord::new(h, BellOutcome::new(false, false), x));
    }
    records.push(OutcomeRecord::new(
        failed,
        BellOutcome::new(false, false),
        XOutcome::new(false),
    ));

    let messages = encode_all(&records)?;
    // The receiving slot reconstructs every record from the channels.
    let (sender_a, _) = decode_record(&messages, sender)?;
    let mut z = sender_a.b0;
    for &h in &helpers {
        let (_, hb) = decode_record(&messages, h)?;
        z ^= hb.bit;
    }
    let correction = PauliFrame::new(sender_a.b1, z);
    let delivered = state.apply_pauli(correction.to_pauli(), 0)?;
    debug_assert!(delivered.overlap_sq(&StateVector::plus_state())? > 1.0 - 1e-9);

    Ok((
        delivered,
        SubstitutionRecord {
            block: block_idx,
            sender,
            helpers,
            messages,
            correction,
        },
    ))
}

/// Outcome of a full recovery pass.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub reported: BTreeMap<NodeId, NodeStatus>,
    pub criticality: Criticality,
    pub repaired: Vec<NodeId>,
    pub unrepaired: Vec<NodeId>,
    pub broadcasts: Vec<(usize, Vec<ParityMessage>)>,
    pub substitutions: Vec<SubstitutionRecord>,
    pub stabilizers: Vec<(NodeId, f64)>,
    pub all_stabilizers_ok: bool,
    pub data_loss: bool,
}

/// End-to-end recovery: detect failures, broadcast status over the affected
/// blocks' parity channels, classify criticality, then excise and
/// substitute every repairable failure. A critical configuration yields an
/// explicit unrecoverable result with partial repair of the remaining
/// blocks; unrepairable nodes are left untouched.
pub fn recover(
    mut network: GraphStateNetwork,
    true_failures: &BTreeSet<NodeId>,
    detector: &DetectorModel,
    rng: &mut RandomSource,
) -> Result<(GraphStateNetwork, BTreeMap<NodeId, NodeStatus>, RecoveryReport)> {
    let reported = detect_failures(&network.topology, true_failures, detector, rng)?;
    for (&v, &status) in &reported {
        network.statuses.insert(v, status);
    }
    let reported_failed: BTreeSet<NodeId> = reported
        .iter()
        .filter(|(_, s)| **s == NodeStatus::Failed)
        .map(|(&v, _)| v)
        .collect();

    let mut broadcasts = Vec::new();
    for (idx, block) in network.topology.blocks.iter().enumerate() {
        if block.nodes.iter().any(|v| reported_failed.contains(v)) {
            let messages = broadcast_status(block, &network.statuses)?;
            let decoded = decode_status(&messages, block)?;
            for &v in &block.nodes {
                debug_assert_eq!(decoded[&v], network.statuses[&v].usable());
            }
            broadcasts.push((idx, messages));
        }
    }

    let criticality = criticality_check(&network.topology, &reported_failed);
    let witness_blocks: Vec<usize> = match &criticality {
        Criticality::Critical { witness_blocks } => witness_blocks.clone(),
        Criticality::Recoverable => Vec::new(),
    };

    let mut repaired = Vec::new();
    let mut unrepaired = Vec::new();
    let mut substitutions = Vec::new();
    let mut data_loss = false;
    for &v in &reported_failed {
        let candidate = network.topology.blocks.iter().enumerate().find_map(|(idx, block)| {
            let usable = block.nodes.contains(&v)
                && block.nodes.len() >= 2
                && !witness_blocks.contains(&idx)
                && network.resource_available(idx)
                && block
                    .nodes
                    .iter()
                    .filter(|&&u| u != v)
                    .all(|u| network.statuses[u].usable() && network.is_alive(*u));
            usable.then_some(idx)
        });
        match candidate {
            Some(block_idx) => {
                if v == network.input_node {
                    data_loss = true;
                }
                network.excise_unchecked(v, rng)?;
                let record = network.substitute_node(v, block_idx, rng)?;
                substitutions.push(record);
                repaired.push(v);
            }
            None => unrepaired.push(v),
        }
    }

    let stabilizers = network.stabilizer_report()?;
    let all_stabilizers_ok = stabilizers.iter().all(|(_, e)| (e - 1.0).abs() < 1e-9);
    let statuses = network.statuses.clone();
    let report = RecoveryReport {
        reported,
        criticality,
        repaired,
        unrepaired,
        broadcasts,
        substitutions,
        stabilizers,
        all_stabilizers_ok,
        data_loss,
    };
    Ok((network, statuses, report))
}
