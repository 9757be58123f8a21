//! Canonical JSON encoding of a [`Skeleton`].
//!
//! Layout (keys sorted at every level, one node per line):
//!
//! ```text
//! {
//!   "nodes": [
//!     {"children":[1],"direction":[0.0,0.0,1.0],"id":0,"parent":null,"position":[0.0,0.0,0.0],"size":0.0},
//!     ...
//!   ],
//!   "params": {"assignment":"closest","d_influence":0.3,...,"uniform_volume":false},
//!   "version": 1
//! }
//! ```
//!
//! Every real is rounded to 9 significant digits and then printed in its
//! shortest round-tripping form, so re-encoding a decoded document reproduces
//! the same bytes.

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{AssignmentMode, BranchNode, GrowthParams, Skeleton, Theta};
use crate::scalar::Real;
use crate::vec3::Vec3;

pub const FORMAT_VERSION: u64 = 1;

/// Rounds to 9 significant digits; maps `-0.0` to `0.0`.
pub fn round9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    let r: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Formats a real with at most 9 significant digits, deterministically.
pub fn fmt_num(v: f64) -> String {
    let r = round9(v);
    if r.is_finite() {
        format!("{r}")
    } else if r.is_nan() {
        "nan".into()
    } else if r > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn num<T: Real>(v: T) -> Value {
    Value::from(round9(v.as_f64()))
}

fn vec_value<T: Real>(v: Vec3<T>) -> Value {
    Value::Array(vec![num(v.x), num(v.y), num(v.z)])
}

fn params_value<T: Real>(p: &GrowthParams<T>) -> Value {
    json!({
        "assignment": p.assignment.as_str(),
        "d_influence": num(p.d_influence),
        "d_kill": num(p.d_kill),
        "delta_l": num(p.delta_l),
        "domain_radius": num(p.domain_radius),
        "max_iterations": p.max_iterations,
        "n_attractors": p.n_attractors,
        "seed": p.seed,
        "stall_limit": p.stall_limit,
        "theta": p.theta.0.iter().map(|&t| num(t)).collect::<Vec<_>>(),
        "uniform_volume": p.uniform_volume,
    })
}

fn node_value<T: Real>(n: &BranchNode<T>) -> Value {
    let mut m = Map::new();
    m.insert("children".into(), Value::from(n.children.clone()));
    m.insert("direction".into(), vec_value(n.direction));
    m.insert("id".into(), Value::from(n.id));
    m.insert("parent".into(), n.parent.map_or(Value::Null, Value::from));
    m.insert("position".into(), vec_value(n.position));
    m.insert("size".into(), num(n.size));
    Value::Object(m)
}

pub fn serialize_skeleton<T: Real>(s: &Skeleton<T>) -> Vec<u8> {
    let mut out = String::with_capacity(64 + s.len() * 160);
    out.push_str("{\n  \"nodes\": [\n");
    for (i, n) in s.nodes().iter().enumerate() {
        out.push_str("    ");
        out.push_str(&node_value(n).to_string());
        out.push_str(if i + 1 < s.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n  \"params\": ");
    out.push_str(&params_value(s.params()).to_string());
    out.push_str(&format!(",\n  \"version\": {FORMAT_VERSION}\n}}\n"));
    out.into_bytes()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    nodes: Vec<NodeDoc>,
    params: ParamsDoc,
    version: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    children: Vec<usize>,
    direction: [f64; 3],
    id: usize,
    parent: Option<usize>,
    position: [f64; 3],
    size: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    assignment: AssignmentMode,
    d_influence: f64,
    d_kill: f64,
    delta_l: f64,
    domain_radius: f64,
    max_iterations: usize,
    n_attractors: usize,
    seed: u64,
    stall_limit: usize,
    theta: [f64; 4],
    uniform_volume: bool,
}

/// Decodes a skeleton document and validates every graph invariant.
///
/// Unit-length and step-length checks use a 1e-6 tolerance since the
/// encoding keeps 9 significant digits.
pub fn deserialize_skeleton<T: Real>(bytes: &[u8]) -> Result<Skeleton<T>> {
    let doc: Document = serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported skeleton version {}", doc.version)));
    }
    let p = doc.params;
    let params = GrowthParams {
        domain_radius: T::lit(p.domain_radius),
        n_attractors: p.n_attractors,
        delta_l: T::lit(p.delta_l),
        d_kill: T::lit(p.d_kill),
        d_influence: T::lit(p.d_influence),
        theta: Theta::from_f64(p.theta),
        max_iterations: p.max_iterations,
        stall_limit: p.stall_limit,
        seed: p.seed,
        assignment: p.assignment,
        uniform_volume: p.uniform_volume,
    };
    params
        .validate()
        .map_err(|e| Error::InvariantViolation(format!("stored params: {e}")))?;
    let roots: Vec<usize> = doc.nodes.iter().filter(|n| n.parent.is_none()).map(|n| n.id).collect();
    let root = match roots.as_slice() {
        [r] => *r,
        [] => return Err(Error::InvariantViolation("no root node".into())),
        _ => return Err(Error::InvariantViolation(format!("{} root nodes", roots.len()))),
    };
    let nodes = doc
        .nodes
        .into_iter()
        .map(|n| BranchNode {
            id: n.id,
            parent: n.parent,
            children: n.children,
            position: Vec3::from_f64(n.position),
            direction: Vec3::from_f64(n.direction),
            size: T::lit(n.size),
        })
        .collect();
    Skeleton::from_parts(nodes, root, params, T::tolerance(1e-6))
}
