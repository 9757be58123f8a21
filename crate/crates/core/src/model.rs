//! Branch graph, growth and sizing parameters.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// How alive attractors are handed to nodes each iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    /// Each attractor pulls only its single nearest node.
    #[default]
    Closest,
    /// Each attractor pulls every node within the influence distance.
    AllInRange,
}

impl AssignmentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AssignmentMode::Closest => "closest",
            AssignmentMode::AllInRange => "all_in_range",
        }
    }
}

/// Learnable attraction weights `(omega, fall, trop, reserved)`.
///
/// `omega` scales every attractor, `fall` damps far attractors exponentially
/// and `trop` boosts attractors that lie above the node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theta<T>(pub [T; 4]);

impl<T: Real> Theta<T> {
    pub fn new(omega: T, fall: T, trop: T) -> Self {
        Self([omega, fall, trop, T::zero()])
    }

    /// Constant weight `omega`, no distance falloff, no tropism.
    pub fn constant(omega: T) -> Self {
        Self::new(omega, T::zero(), T::zero())
    }

    #[inline]
    pub fn omega(&self) -> T {
        self.0[0]
    }

    #[inline]
    pub fn fall(&self) -> T {
        self.0[1]
    }

    #[inline]
    pub fn trop(&self) -> T {
        self.0[2]
    }

    pub fn to_f64(&self) -> [f64; 4] {
        self.0.map(Real::as_f64)
    }

    pub fn from_f64(v: [f64; 4]) -> Self {
        Self(v.map(T::lit))
    }
}

impl<T: Real> Default for Theta<T> {
    fn default() -> Self {
        Self::constant(T::one())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthParams<T> {
    /// Radius of the crown domain; the scene scale anchor.
    pub domain_radius: T,
    pub n_attractors: usize,
    /// Length of every new branch.
    pub delta_l: T,
    pub d_kill: T,
    pub d_influence: T,
    pub theta: Theta<T>,
    pub max_iterations: usize,
    /// Consecutive progress-free iterations tolerated before growth stops.
    pub stall_limit: usize,
    pub seed: u64,
    pub assignment: AssignmentMode,
    /// Sample attractor radii volume-uniformly instead of uniformly in `[0, R]`.
    pub uniform_volume: bool,
}

impl<T: Real> Default for GrowthParams<T> {
    fn default() -> Self {
        Self {
            domain_radius: T::one(),
            n_attractors: 2000,
            delta_l: T::lit(0.03),
            d_kill: T::lit(0.09),
            d_influence: T::lit(0.3),
            theta: Theta::default(),
            max_iterations: 500,
            stall_limit: 10,
            seed: 42,
            assignment: AssignmentMode::Closest,
            uniform_volume: false,
        }
    }
}

impl<T: Real> GrowthParams<T> {
    pub fn validate(&self) -> Result<()> {
        validate_params(self)
    }

    pub fn with_theta(&self, theta: Theta<T>) -> Self {
        Self { theta, ..self.clone() }
    }
}

fn positive<T: Real>(v: T, name: &'static str) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive(name))
    }
}

/// Checks positivity of every length and count, then the ordering
/// `delta_l < d_kill < d_influence`.
pub fn validate_params<T: Real>(p: &GrowthParams<T>) -> Result<()> {
    positive(p.domain_radius, "domain_radius")?;
    positive(p.delta_l, "delta_l")?;
    positive(p.d_kill, "d_kill")?;
    positive(p.d_influence, "d_influence")?;
    positive(p.theta.omega(), "omega")?;
    if p.n_attractors == 0 {
        return Err(Error::NonPositive("n_attractors"));
    }
    if p.max_iterations == 0 {
        return Err(Error::NonPositive("max_iterations"));
    }
    if p.stall_limit == 0 {
        return Err(Error::NonPositive("stall_limit"));
    }
    if p.theta.0.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("theta must be finite".into()));
    }
    if p.delta_l >= p.d_kill {
        return Err(Error::OrderingViolation(format!(
            "kill distance must be greater than the branch length (delta_l={} >= d_kill={})",
            p.delta_l, p.d_kill
        )));
    }
    if p.d_kill >= p.d_influence {
        return Err(Error::OrderingViolation(format!(
            "kill distance must be less than the attraction distance (d_kill={} >= d_influence={})",
            p.d_kill, p.d_influence
        )));
    }
    Ok(())
}

/// Branch sizing: extremity size, inverted growth factor and ring resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizingParams<T> {
    pub r_e: T,
    pub i_g: T,
    pub ring_segments: usize,
}

impl<T: Real> Default for SizingParams<T> {
    fn default() -> Self {
        Self { r_e: T::lit(0.004), i_g: T::lit(2.0), ring_segments: 8 }
    }
}

impl<T: Real> SizingParams<T> {
    pub fn validate(&self) -> Result<()> {
        positive(self.r_e, "r_e")?;
        if !(self.i_g >= T::one()) || !self.i_g.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inverted growth factor must be >= 1, got {}",
                self.i_g
            )));
        }
        if self.ring_segments < 3 {
            return Err(Error::InvalidParameter(format!(
                "ring_segments must be >= 3, got {}",
                self.ring_segments
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchNode<T> {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Position of the branch extremity.
    pub position: Vec3<T>,
    /// Unit growth direction.
    pub direction: Vec3<T>,
    /// Branch size; zero until the sizing pass runs.
    pub size: T,
}

impl<T: Real> BranchNode<T> {
    pub fn is_extremity(&self) -> bool {
        self.children.is_empty()
    }
}

/// A rooted tree of branch nodes with dense, creation-ordered ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton<T> {
    nodes: Vec<BranchNode<T>>,
    root: usize,
    params: GrowthParams<T>,
}

impl<T: Real> Skeleton<T> {
    /// Root-only skeleton at the origin growing along +z.
    pub fn with_root(params: GrowthParams<T>) -> Self {
        Self::with_root_at(params, Vec3::zero(), Vec3::unit_z())
    }

    pub fn with_root_at(params: GrowthParams<T>, position: Vec3<T>, direction: Vec3<T>) -> Self {
        let root = BranchNode {
            id: 0,
            parent: None,
            children: Vec::new(),
            position,
            direction: direction.normalize(),
            size: T::zero(),
        };
        Self { nodes: vec![root], root: 0, params }
    }

    /// Appends a child one growth step from `parent` along `direction`
    /// (normalized here). Returns the new node id.
    pub fn push_child(&mut self, parent: usize, direction: Vec3<T>) -> usize {
        let direction = direction.normalize();
        let position = self.nodes[parent].position + direction * self.params.delta_l;
        let id = self.nodes.len();
        self.nodes.push(BranchNode {
            id,
            parent: Some(parent),
            children: Vec::new(),
            position,
            direction,
            size: T::zero(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Assembles a skeleton from raw nodes and checks every invariant with
    /// tolerance `tol` on unit directions and step lengths.
    pub fn from_parts(
        nodes: Vec<BranchNode<T>>,
        root: usize,
        params: GrowthParams<T>,
        tol: T,
    ) -> Result<Self> {
        let s = Self { nodes, root, params };
        s.check_invariants(tol)?;
        Ok(s)
    }

    pub fn nodes(&self) -> &[BranchNode<T>] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &BranchNode<T> {
        &self.nodes[id]
    }

    pub fn root_id(&self) -> usize {
        self.root
    }

    pub fn root(&self) -> &BranchNode<T> {
        &self.nodes[self.root]
    }

    pub fn params(&self) -> &GrowthParams<T> {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of branches, i.e. non-root nodes.
    pub fn branch_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn extremity_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_extremity()).count()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3<T>> + '_ {
        self.nodes.iter().map(|n| n.position)
    }

    /// True when every node carries a positive size.
    pub fn is_sized(&self) -> bool {
        self.nodes.iter().all(|n| n.size > T::zero())
    }

    pub(crate) fn set_size(&mut self, id: usize, size: T) {
        self.nodes[id].size = size;
    }

    /// Truncates to the first `len` nodes, dropping dangling child links.
    pub fn prefix(&self, len: usize) -> Self {
        let mut nodes: Vec<_> = self.nodes[..len].to_vec();
        for n in &mut nodes {
            n.children.retain(|&c| c < len);
        }
        Self { nodes, root: self.root, params: self.params.clone() }
    }

    /// Nodes ordered so every parent precedes its children (breadth-first).
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut queue = VecDeque::from([self.root]);
        while let Some(id) = queue.pop_front() {
            order.push(id);
            queue.extend(self.nodes[id].children.iter().copied());
        }
        order
    }

    pub fn bounding_box(&self) -> (Vec3<T>, Vec3<T>) {
        let first = self.nodes[self.root].position;
        self.positions().fold((first, first), |(lo, hi), p| (lo.component_min(p), hi.component_max(p)))
    }

    pub fn check_invariants(&self, tol: T) -> Result<()> {
        let n = self.nodes.len();
        let bad = |msg: String| Err(Error::InvariantViolation(msg));
        if n == 0 {
            return bad("skeleton has no nodes".into());
        }
        if self.root >= n {
            return bad(format!("root id {} out of range", self.root));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return bad(format!("node at index {i} carries id {}", node.id));
            }
            if !node.position.is_finite() || !node.direction.is_finite() || !node.size.is_finite() {
                return bad(format!("node {i} has non-finite values"));
            }
            if node.size < T::zero() {
                return bad(format!("node {i} has negative size"));
            }
            if (node.direction.norm() - T::one()).abs() > tol {
                return bad(format!("node {i} direction is not unit length"));
            }
            match node.parent {
                None if i != self.root => return bad(format!("node {i} has no parent but is not the root")),
                Some(_) if i == self.root => return bad("root has a parent".into()),
                Some(p) if p >= n => return bad(format!("node {i} references missing parent {p}")),
                Some(p) => {
                    if !self.nodes[p].children.contains(&i) {
                        return bad(format!("parent {p} does not list child {i}"));
                    }
                    let step = node.position.distance(self.nodes[p].position);
                    if (step - self.params.delta_l).abs() > tol {
                        return bad(format!("edge {p}->{i} has length {step}, expected {}", self.params.delta_l));
                    }
                }
                None => {}
            }
            for &c in &node.children {
                if c >= n {
                    return bad(format!("node {i} references missing child {c}"));
                }
                if self.nodes[c].parent != Some(i) {
                    return bad(format!("child {c} of node {i} names a different parent"));
                }
            }
        }
        // Consistent links plus every node reachable from the root means a tree.
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        let mut visited = 0;
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                return bad(format!("cycle through node {id}"));
            }
            visited += 1;
            stack.extend(self.nodes[id].children.iter().copied());
        }
        if visited != n {
            return bad(format!("{} nodes unreachable from the root", n - visited));
        }
        Ok(())
    }
}
