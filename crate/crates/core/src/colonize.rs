//! The growth loop: attractors pull their nearest branch nodes, each pulled
//! node sprouts one child of length `delta_l`, and attractors within the kill
//! distance of any node are consumed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::attractor::{kill_with_index, AttractorField};
use crate::error::{Error, Result};
use crate::model::{validate_params, AssignmentMode, BranchNode, GrowthParams, Skeleton, Theta};
use crate::scalar::Real;
use crate::spatial::PointGrid;
use crate::vec3::Vec3;

/// New children closer than this to an existing sibling are suppressed.
pub const DUPLICATE_EPS: f64 = 1e-6;
/// Hard ceiling on skeleton size; the per-branch assignment mode can
/// otherwise branch without bound.
pub const NODE_LIMIT: usize = 1 << 18;

/// Influence of one attractor seen along `v` at distance `dist`:
/// `omega · exp(−fall · dist / d_influence) · (1 + trop · max(0, v̂·ẑ))`,
/// clamped at zero.
pub fn weight<T: Real>(v: Vec3<T>, dist: T, theta: &Theta<T>, d_influence: T) -> T {
    let falloff = (-theta.fall() * dist / d_influence).exp();
    let up = if dist > T::zero() { (v.z / dist).max(T::zero()) } else { T::zero() };
    let w = theta.omega() * falloff * (T::one() + theta.trop() * up);
    w.max(T::zero())
}

/// Direction of the child grown from `node` toward `attractors`: the
/// normalized mean of the weighted unit vectors to each attractor.
pub fn child_direction<T: Real>(
    node: &BranchNode<T>,
    attractors: &[Vec3<T>],
    theta: &Theta<T>,
    d_influence: T,
) -> Result<Vec3<T>> {
    let degenerate = || Error::DegenerateDirection { node: node.id };
    if attractors.is_empty() {
        return Err(degenerate());
    }
    let mut sum = Vec3::zero();
    for &a in attractors {
        let v = a - node.position;
        let dist = v.norm();
        if dist > T::zero() {
            sum += v / dist * weight(v, dist, theta, d_influence);
        }
    }
    let mean = sum / T::lit(attractors.len() as f64);
    mean.try_normalize(T::lit(1e-12)).ok_or_else(degenerate)
}

/// Node id → indices of the attractors pulling it, both ascending.
pub type Assignment = BTreeMap<usize, Vec<usize>>;

/// Assigns every alive attractor to its nearest node when that node is
/// strictly closer than `d_influence` (ties go to the lowest node id).
pub fn assign_attractors<T: Real>(field: &AttractorField<T>, skeleton: &Skeleton<T>, d_influence: T) -> Assignment {
    let grid = PointGrid::from_points(d_influence, skeleton.positions());
    assign_with_index(field, &grid, d_influence, AssignmentMode::Closest)
}

pub(crate) fn assign_with_index<T: Real>(
    field: &AttractorField<T>,
    nodes: &PointGrid<T>,
    d_influence: T,
    mode: AssignmentMode,
) -> Assignment {
    let targets: Vec<Vec<usize>> = field
        .points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            if !field.alive[i] {
                return Vec::new();
            }
            match mode {
                AssignmentMode::Closest => nodes.nearest_within(p, d_influence).map(|(n, _)| n).into_iter().collect(),
                AssignmentMode::AllInRange => nodes.within(p, d_influence),
            }
        })
        .collect();
    let mut out = Assignment::new();
    for (attractor, owners) in targets.into_iter().enumerate() {
        for node in owners {
            out.entry(node).or_default().push(attractor);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub nodes_added: usize,
    pub killed: usize,
    pub alive: usize,
    /// Skeleton size after this iteration; nodes `0..node_count` existed.
    pub node_count: usize,
    pub killed_ids: Vec<usize>,
    /// Nodes whose weighted pulls cancelled; they were skipped this round.
    pub degenerate: Vec<usize>,
    /// The trunk was extended straight up because nothing was in range yet.
    pub bootstrap: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrowthTrace {
    pub records: Vec<IterationRecord>,
}

impl GrowthTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_killed(&self) -> usize {
        self.records.iter().map(|r| r.killed).sum()
    }

    /// `iteration,nodes_added,killed,alive` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,nodes_added,killed,alive\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.iteration, r.nodes_added, r.killed, r.alive);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct GrowthOutcome<T> {
    pub skeleton: Skeleton<T>,
    pub trace: GrowthTrace,
    /// The field with consumed attractors flagged dead.
    pub attractors: AttractorField<T>,
}

/// Grows a skeleton from a root at the origin pointing up.
///
/// Each iteration assigns attractors, sprouts one child per pulled node in
/// ascending id order, then kills attractors inside `d_kill`. Until the first
/// attractor comes within `d_influence` the trunk just extends upward. Growth
/// ends when nothing is assigned any more, after `max_iterations`, or after
/// `stall_limit` consecutive iterations that neither killed an attractor nor
/// added a node toward one, or once the skeleton reaches [`NODE_LIMIT`].
pub fn grow<T: Real>(field: AttractorField<T>, params: &GrowthParams<T>) -> Result<GrowthOutcome<T>> {
    validate_params(params)?;
    let mut field = field;
    let mut skeleton = Skeleton::with_root(params.clone());
    let mut nodes = PointGrid::new(params.d_influence);
    nodes.insert(skeleton.root().position);

    let dup_eps = T::lit(DUPLICATE_EPS);
    let mut pending_kills = kill_with_index(&mut field, &nodes, params.d_kill);
    let mut trace = GrowthTrace::default();
    let mut influenced = false;
    let mut trunk_tip = skeleton.root_id();
    let mut stall = 0;

    for iteration in 1..=params.max_iterations {
        let assignment = assign_with_index(&field, &nodes, params.d_influence, params.assignment);
        let mut added = 0;
        let mut degenerate = Vec::new();
        let bootstrap = assignment.is_empty();
        let mut capped = false;

        if bootstrap {
            if influenced {
                break;
            }
            trunk_tip = skeleton.push_child(trunk_tip, Vec3::unit_z());
            nodes.insert(skeleton.node(trunk_tip).position);
            added += 1;
        } else {
            influenced = true;
            for (&node_id, pulling) in &assignment {
                if skeleton.len() >= NODE_LIMIT {
                    capped = true;
                    break;
                }
                let targets: Vec<Vec3<T>> = pulling.iter().map(|&a| field.points[a]).collect();
                let node = skeleton.node(node_id);
                let dir = match child_direction(node, &targets, &params.theta, params.d_influence) {
                    Ok(d) => d,
                    Err(_) => {
                        log::debug!("iteration {iteration}: node {node_id} has cancelling pulls");
                        degenerate.push(node_id);
                        continue;
                    }
                };
                let tip = node.position + dir * params.delta_l;
                let duplicate = node.children.iter().any(|&c| skeleton.node(c).position.distance(tip) < dup_eps);
                if duplicate {
                    continue;
                }
                let id = skeleton.push_child(node_id, dir);
                nodes.insert(skeleton.node(id).position);
                added += 1;
            }
        }

        let mut killed_ids = kill_with_index(&mut field, &nodes, params.d_kill);
        if !pending_kills.is_empty() {
            pending_kills.append(&mut killed_ids);
            pending_kills.sort_unstable();
            killed_ids = std::mem::take(&mut pending_kills);
        }
        let alive = field.alive_count();
        let grew_toward_target = added > 0 && (!bootstrap || alive > 0);
        if killed_ids.is_empty() && !grew_toward_target {
            stall += 1;
        } else {
            stall = 0;
        }
        trace.records.push(IterationRecord {
            iteration,
            nodes_added: added,
            killed: killed_ids.len(),
            alive,
            node_count: skeleton.len(),
            killed_ids,
            degenerate,
            bootstrap,
        });
        if capped {
            log::warn!("growth stopped at the {NODE_LIMIT}-node ceiling after {iteration} iterations");
            break;
        }
        if stall >= params.stall_limit {
            break;
        }
    }

    Ok(GrowthOutcome { skeleton, trace, attractors: field })
}
