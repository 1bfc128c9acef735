//! Linear Langevin networks without feedback.
//!
//! A network is a set of nodes, each relaxing at its own decay rate and
//! driven by its own white noise, plus directed gain edges. The
//! direct-influence graph (edges only) must be acyclic.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    /// Relaxation rate, units 1/time. For an OU root this is `1 / t_rel`.
    pub decay: f64,
    /// Diffusion coefficient, units variance/time.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub source: String,
    pub target: String,
    /// Rate coupling, units 1/time. May be negative.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearNetwork {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>, decay: f64, noise: f64) -> Self {
        NodeSpec {
            name: name.into(),
            decay,
            noise,
        }
    }
}

impl EdgeSpec {
    pub fn new(source: impl Into<String>, target: impl Into<String>, gain: f64) -> Self {
        EdgeSpec {
            source: source.into(),
            target: target.into(),
            gain,
        }
    }
}

impl LinearNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, name: &str, decay: f64, noise: f64) -> Self {
        self.nodes.push(NodeSpec::new(name, decay, noise));
        self
    }

    pub fn edge(mut self, source: &str, target: &str, gain: f64) -> Self {
        self.edges.push(EdgeSpec::new(source, target, gain));
        self
    }

    /// Signal `x` (OU, relaxation time `t_rel`, diffusion `d`) driving a
    /// noiseless response `y` with gain `alpha` and decay `beta`.
    pub fn blrm(alpha: f64, beta: f64, t_rel: f64, d: f64) -> Self {
        LinearNetwork::new()
            .node("x", 1.0 / t_rel, d)
            .node("y", beta, 0.0)
            .edge("x", "y", alpha)
    }

    pub fn validate(self) -> Result<ValidatedNetwork> {
        ValidatedNetwork::new(self)
    }
}

/// Non-fatal findings from validation.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationWarning {
    /// The edge has gain exactly zero; it is ignored for parent sets.
    ZeroGainEdge { source: String, target: String },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::ZeroGainEdge { source, target } => write!(
                f,
                "edge {source} -> {target} has zero gain and is pruned from parent sets"
            ),
        }
    }
}

/// A network that satisfies every structural invariant, with a cached
/// topological order. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedNetwork {
    network: LinearNetwork,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
    warnings: Vec<ValidationWarning>,
}

pub(crate) fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

impl ValidatedNetwork {
    fn new(network: LinearNetwork) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, node) in network.nodes.iter().enumerate() {
            if !valid_name(&node.name) {
                return Err(Error::InvalidName(node.name.clone()));
            }
            if index.insert(node.name.clone(), i).is_some() {
                return Err(Error::DuplicateNode(node.name.clone()));
            }
            if !node.decay.is_finite() {
                return Err(Error::NonFinite(format!("decay of `{}`", node.name)));
            }
            if !node.noise.is_finite() {
                return Err(Error::NonFinite(format!("noise of `{}`", node.name)));
            }
            if node.decay <= 0.0 {
                return Err(Error::NonPositiveDecay {
                    node: node.name.clone(),
                    decay: node.decay,
                });
            }
            if node.noise < 0.0 {
                return Err(Error::NegativeNoise {
                    node: node.name.clone(),
                    noise: node.noise,
                });
            }
        }

        let n = network.nodes.len();
        let mut seen = HashSet::new();
        let mut children = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        let mut warnings = Vec::new();
        for edge in &network.edges {
            let s = *index
                .get(&edge.source)
                .ok_or_else(|| Error::UnknownNode(edge.source.clone()))?;
            let t = *index
                .get(&edge.target)
                .ok_or_else(|| Error::UnknownNode(edge.target.clone()))?;
            if s == t {
                return Err(Error::SelfEdge(edge.source.clone()));
            }
            if !seen.insert((s, t)) {
                return Err(Error::DuplicateEdge(edge.source.clone(), edge.target.clone()));
            }
            if !edge.gain.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gain of {} -> {}",
                    edge.source, edge.target
                )));
            }
            if edge.gain == 0.0 {
                warnings.push(ValidationWarning::ZeroGainEdge {
                    source: edge.source.clone(),
                    target: edge.target.clone(),
                });
            }
            children[s].push(t);
            indegree[t] += 1;
        }

        // Kahn's algorithm, smallest declaration index first for a stable order.
        let mut indeg = indegree.clone();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            topo.push(i);
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() < n {
            let cycle = find_cycle(&children, &indeg)
                .into_iter()
                .map(|i| network.nodes[i].name.clone())
                .collect();
            return Err(Error::CycleDetected(cycle));
        }

        for (i, node) in network.nodes.iter().enumerate() {
            if indegree[i] == 0 && node.noise <= 0.0 {
                return Err(Error::RootWithoutNoise(node.name.clone()));
            }
        }

        Ok(ValidatedNetwork {
            network,
            index,
            topo,
            warnings,
        })
    }

    pub fn network(&self) -> &LinearNetwork {
        &self.network
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.network.nodes
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.network.edges
    }

    pub fn len(&self) -> usize {
        self.network.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.network.nodes.is_empty()
    }

    pub fn warnings(&self) -> &[ValidationWarning] {
        &self.warnings
    }

    /// Node indices in topological order (sources first).
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn name(&self, i: usize) -> &str {
        &self.network.nodes[i].name
    }

    pub fn names(&self) -> Vec<String> {
        self.network.nodes.iter().map(|n| n.name.clone()).collect()
    }

    /// Drift matrix in declaration order: `-decay_i` on the diagonal and
    /// `gain(j -> i)` at row `i`, column `j`.
    pub fn drift_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, node) in self.network.nodes.iter().enumerate() {
            a[(i, i)] = -node.decay;
        }
        for e in &self.network.edges {
            a[(self.index[&e.target], self.index[&e.source])] += e.gain;
        }
        a
    }

    /// Diagonal diffusion matrix `Q = diag(noise)`.
    pub fn noise_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.network.nodes[i].noise
            } else {
                0.0
            }
        })
    }

    /// Ancestors of `targets` through edges with nonzero gain, excluding the
    /// targets themselves. Returned in declaration order.
    pub fn parents(&self, targets: &[&str]) -> Result<ParentSet> {
        let n = self.len();
        let mut incoming = vec![Vec::new(); n];
        for e in &self.network.edges {
            if e.gain != 0.0 {
                incoming[self.index[&e.target]].push(self.index[&e.source]);
            }
        }
        let mut target_idx = Vec::with_capacity(targets.len());
        for t in targets {
            target_idx.push(self.index_of(t)?);
        }
        let mut visited = vec![false; n];
        let mut stack = target_idx.clone();
        while let Some(i) = stack.pop() {
            for &p in &incoming[i] {
                if !visited[p] {
                    visited[p] = true;
                    stack.push(p);
                }
            }
        }
        let members = (0..n)
            .filter(|&i| visited[i] && !target_idx.contains(&i))
            .map(|i| self.name(i).to_string())
            .collect();
        Ok(ParentSet { members })
    }

    /// True when a directed path of nonzero-gain edges leads from `from` to `to`.
    pub fn reaches(&self, from: &str, to: &str) -> Result<bool> {
        let f = self.index_of(from)?;
        let t = self.index_of(to)?;
        let parents = self.parents(&[to])?;
        Ok(f != t && parents.members.iter().any(|m| self.index[m] == f))
    }

    /// Largest node time constant, `1 / min(decay)`.
    pub fn slowest_time_constant(&self) -> f64 {
        self.network
            .nodes
            .iter()
            .map(|n| 1.0 / n.decay)
            .fold(0.0, f64::max)
    }

    pub fn to_file_string(&self) -> String {
        self.network.to_string()
    }
}

fn find_cycle(children: &[Vec<usize>], indeg: &[usize]) -> Vec<usize> {
    // Nodes left with positive in-degree all lie on or downstream of a cycle;
    // walking backwards is awkward, so walk forwards within the residue until
    // a node repeats.
    let residue: Vec<bool> = indeg.iter().map(|&d| d > 0).collect();
    let start = match residue.iter().position(|&r| r) {
        Some(s) => s,
        None => return Vec::new(),
    };
    let mut path = vec![start];
    let mut pos = HashMap::from([(start, 0usize)]);
    let mut cur = start;
    loop {
        let next = children[cur]
            .iter()
            .copied()
            .find(|&c| residue[c])
            .expect("residual node has a residual child");
        if let Some(&p) = pos.get(&next) {
            return path[p..].to_vec();
        }
        pos.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}

/// Ancestor set used to condition pairwise measures.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParentSet {
    pub members: Vec<String>,
}

impl ParentSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.members.iter().any(|m| m == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(String::as_str)
    }
}

impl fmt::Display for ParentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.members.join(","))
    }
}

// ---------------------------------------------------------------------------
// Plain-text network files
//
//   # comment
//   node <name> decay=<float> noise=<float>
//   edge <source> <target> gain=<float>

impl FromStr for LinearNetwork {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_network(s)
    }
}

pub fn parse_network(text: &str) -> Result<LinearNetwork> {
    let mut network = LinearNetwork::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let mut tokens = content.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        let rest: Vec<&str> = tokens.collect();
        let err = |message: String| Error::Parse { line, message };
        match keyword {
            "node" => {
                let (name, kv) = rest
                    .split_first()
                    .ok_or_else(|| err("`node` needs a name".into()))?;
                if !valid_name(name) {
                    return Err(err(format!("invalid node name `{name}`")));
                }
                let mut fields = KeyValues::parse(kv, &["decay", "noise"]).map_err(err)?;
                network.nodes.push(NodeSpec {
                    name: name.to_string(),
                    decay: fields.take("decay").map_err(err)?,
                    noise: fields.take("noise").map_err(err)?,
                });
            }
            "edge" => {
                if rest.len() < 2 {
                    return Err(err("`edge` needs a source and a target".into()));
                }
                let (source, target) = (rest[0], rest[1]);
                for name in [source, target] {
                    if !valid_name(name) {
                        return Err(err(format!("invalid node name `{name}`")));
                    }
                }
                let mut fields = KeyValues::parse(&rest[2..], &["gain"]).map_err(err)?;
                network.edges.push(EdgeSpec {
                    source: source.to_string(),
                    target: target.to_string(),
                    gain: fields.take("gain").map_err(err)?,
                });
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    Ok(network)
}

struct KeyValues<'a> {
    values: Vec<(&'a str, f64)>,
}

impl<'a> KeyValues<'a> {
    fn parse(tokens: &[&'a str], allowed: &[&str]) -> std::result::Result<Self, String> {
        let mut values: Vec<(&'a str, f64)> = Vec::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, found `{tok}`"))?;
            if !allowed.contains(&k) {
                return Err(format!("unknown key `{k}`"));
            }
            if values.iter().any(|(seen, _)| *seen == k) {
                return Err(format!("key `{k}` given twice"));
            }
            let x = parse_float(v).ok_or_else(|| format!("`{v}` is not a finite number"))?;
            values.push((k, x));
        }
        Ok(KeyValues { values })
    }

    fn take(&mut self, key: &str) -> std::result::Result<f64, String> {
        self.values
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| format!("missing `{key}=`"))
    }
}

/// Locale-independent float parsing that rejects infinities and NaN.
pub(crate) fn parse_float(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

impl fmt::Display for LinearNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.nodes {
            writeln!(f, "node {} decay={:e} noise={:e}", n.name, n.decay, n.noise)?;
        }
        for e in &self.edges {
            writeln!(f, "edge {} {} gain={:e}", e.source, e.target, e.gain)?;
        }
        Ok(())
    }
}
