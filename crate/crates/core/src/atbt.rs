//! Attributed topological binary trees and their fusion along a track.
//!
//! Objects of each roadside are arranged in vertical stacks, ordered left to
//! right. A stack head links to the next stack through its right child and to
//! the member below it through its left child, so heap numbering (children of
//! `i` at `2i` and `2i+1`) records both relations.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{canonical_cmp, PatternGroup, Side};
use crate::placer::Case;
use crate::scene::{LightKind, ObjectCategory, SceneObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Root,
    SideRoot,
    StackHead,
    StackChild,
    Sidewalk,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtbtNode {
    pub heap_index: u128,
    pub object: SceneObject,
    pub side: Side,
    pub role: Role,
    pub stack_ordinal: u32,
    pub depth_in_stack: u32,
}

/// Tree of one image. The root (heap index 1) carries no object and is not
/// stored in `nodes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atbt {
    pub image_id: String,
    /// Sorted by heap index.
    pub nodes: Vec<AtbtNode>,
}

pub const ROOT_INDEX: u128 = 1;

impl Atbt {
    pub fn side_root_index(side: Side) -> u128 {
        match side {
            Side::Left => 2,
            Side::Right => 3,
        }
    }

    pub fn node(&self, heap_index: u128) -> Option<&AtbtNode> {
        self.nodes
            .binary_search_by_key(&heap_index, |n| n.heap_index)
            .ok()
            .map(|i| &self.nodes[i])
    }

    /// Every non-root node has its parent in the tree.
    pub fn is_heap_consistent(&self) -> bool {
        self.nodes.iter().all(|n| {
            let p = n.heap_index / 2;
            n.heap_index > 1 && (p == ROOT_INDEX || self.node(p).is_some())
        }) && self.nodes.windows(2).all(|w| w[0].heap_index < w[1].heap_index)
    }

    pub fn to_debug_json(&self) -> serde_json::Value {
        let mut nodes = vec![serde_json::json!({"heap_index": 1, "role": Role::Root})];
        nodes.extend(self.nodes.iter().map(|n| {
            serde_json::json!({
                "heap_index": n.heap_index,
                "object_id": n.object.object_id,
                "category": n.object.category,
                "subtype": n.object.subtype,
                "light_kind": n.object.light_kind,
                "inferred": n.object.inferred,
                "side": n.side,
                "role": n.role,
                "stack_ordinal": n.stack_ordinal,
                "depth_in_stack": n.depth_in_stack,
                "centroid_px": [n.object.centroid_px.0, n.object.centroid_px.1],
                "area_px": n.object.area_px,
            })
        }));
        serde_json::json!({"image_id": self.image_id, "nodes": nodes})
    }
}

pub fn write_tree_dump(path: &Path, trees: &[Atbt]) -> Result<()> {
    let doc: Vec<serde_json::Value> = trees.iter().map(Atbt::to_debug_json).collect();
    let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn min_col(stack: &[&SceneObject]) -> f64 {
    stack
        .iter()
        .map(|o| o.centroid_px.0)
        .fold(f64::INFINITY, f64::min)
}

fn stack_cmp(a: &[&SceneObject], b: &[&SceneObject]) -> std::cmp::Ordering {
    let walk = |s: &[&SceneObject]| s[0].category == ObjectCategory::Sidewalk;
    walk(a)
        .cmp(&walk(b))
        .then(min_col(a).total_cmp(&min_col(b)))
        .then_with(|| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| canonical_cmp(x, y))
                .find(|o| o.is_ne())
                .unwrap_or(a.len().cmp(&b.len()))
        })
}

fn child(i: u128, right: bool) -> Result<u128> {
    i.checked_mul(2)
        .and_then(|v| v.checked_add(right as u128))
        .ok_or(Error::TreeTooDeep)
}

/// Arrange one image's objects into a tree. Grouped objects form stacks in
/// the given member order; every other object is a stack of its own, and
/// sidewalks come last on their side.
pub fn build_atbt(
    objs: &[SceneObject],
    groups: &[PatternGroup],
    image_id: &str,
    width_px: u32,
) -> Result<Atbt> {
    let by_id: BTreeMap<u32, &SceneObject> = objs.iter().map(|o| (o.object_id, o)).collect();
    let mut grouped = std::collections::BTreeSet::new();
    let mut sides: BTreeMap<Side, Vec<Vec<&SceneObject>>> = BTreeMap::new();
    for g in groups {
        let mut stack: Vec<&SceneObject> = g
            .members
            .iter()
            .filter_map(|id| by_id.get(id).copied())
            .collect();
        stack.retain(|o| grouped.insert(o.object_id));
        if stack.is_empty() {
            continue;
        }
        stack.sort_by(|a, b| a.centroid_px.1.total_cmp(&b.centroid_px.1).then_with(|| canonical_cmp(a, b)));
        sides.entry(g.side).or_default().push(stack);
    }
    for o in objs {
        if !grouped.contains(&o.object_id) {
            sides.entry(Side::of(o, width_px)).or_default().push(vec![o]);
        }
    }

    let mut nodes = Vec::new();
    for (side, mut stacks) in sides {
        stacks.sort_by(|a, b| stack_cmp(a, b));
        let mut head = Atbt::side_root_index(side);
        for (ordinal, stack) in stacks.iter().enumerate() {
            if ordinal > 0 {
                head = child(head, true)?;
            }
            let mut idx = head;
            for (depth, o) in stack.iter().enumerate() {
                if depth > 0 {
                    idx = child(idx, false)?;
                }
                let role = if o.category == ObjectCategory::Sidewalk {
                    Role::Sidewalk
                } else if depth > 0 {
                    Role::StackChild
                } else if ordinal == 0 {
                    Role::SideRoot
                } else {
                    Role::StackHead
                };
                nodes.push(AtbtNode {
                    heap_index: idx,
                    object: (*o).clone(),
                    side,
                    role,
                    stack_ordinal: ordinal as u32,
                    depth_in_stack: depth as u32,
                });
            }
        }
    }
    nodes.sort_by_key(|n| n.heap_index);
    Ok(Atbt {
        image_id: image_id.to_string(),
        nodes,
    })
}

/// Where the camera of a tree's image stood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewInfo {
    pub case: Case,
    /// Camera distance to the intersection centre, metres.
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FusionKey {
    pub side: Side,
    pub category: ObjectCategory,
    pub stack_ordinal: u32,
    pub depth_in_stack: u32,
    /// Winning subtype of the vote.
    pub subtype: Option<String>,
}

/// One object consolidated over all images of a track.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedObject {
    pub key: FusionKey,
    pub support: u32,
    pub best_image: String,
    pub subtype: Option<String>,
    pub light_kind: Option<LightKind>,
    pub inferred_only: bool,
    /// Images that observed the object, in track order.
    pub sources: Vec<String>,
}

struct Obs<'a> {
    tree: usize,
    node: &'a AtbtNode,
}

fn vote<T: Ord + Clone>(obs: &[Obs], views: &[ViewInfo], pick: impl Fn(&AtbtNode) -> T) -> T {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for o in obs {
        *counts.entry(pick(o.node)).or_default() += 1;
    }
    let best = *counts.values().max().expect("non-empty");
    let tied: Vec<&T> = counts.iter().filter(|(_, c)| **c == best).map(|(v, _)| v).collect();
    if tied.len() == 1 {
        return tied[0].clone();
    }
    obs.iter()
        .filter(|o| tied.contains(&&pick(o.node)))
        .min_by(|a, b| {
            views[a.tree]
                .distance_m
                .total_cmp(&views[b.tree].distance_m)
                .then(a.tree.cmp(&b.tree))
        })
        .map(|o| pick(o.node))
        .expect("non-empty")
}

/// Merge the trees of one track. Nodes are matched by side, category and
/// their stack coordinates; subtype and light kind are decided by majority,
/// ties going to the image closest to the intersection.
pub fn fuse_track(trees: &[Atbt], views: &[ViewInfo]) -> Vec<FusedObject> {
    assert_eq!(trees.len(), views.len(), "one view per tree");
    let mut buckets: BTreeMap<(Side, ObjectCategory, u32, u32), Vec<Obs>> = BTreeMap::new();
    for (t, tree) in trees.iter().enumerate() {
        for node in &tree.nodes {
            let k = (node.side, node.object.category, node.stack_ordinal, node.depth_in_stack);
            buckets.entry(k).or_default().push(Obs { tree: t, node });
        }
    }
    let nearest = |obs: &[&Obs], only_c1: bool| {
        obs.iter()
            .filter(|o| !only_c1 || views[o.tree].case == Case::C1)
            .min_by(|a, b| {
                views[a.tree]
                    .distance_m
                    .total_cmp(&views[b.tree].distance_m)
                    .then(a.tree.cmp(&b.tree))
            })
            .map(|o| trees[o.tree].image_id.clone())
    };
    let mut out: Vec<FusedObject> = buckets
        .into_iter()
        .map(|((side, category, stack_ordinal, depth_in_stack), obs)| {
            let subtype = vote(&obs, views, |n| n.object.subtype.clone());
            let light_kind = vote(&obs, views, |n| n.object.light_kind);
            let refs: Vec<&Obs> = obs.iter().collect();
            let best_image = nearest(&refs, true)
                .or_else(|| nearest(&refs, false))
                .expect("non-empty");
            FusedObject {
                key: FusionKey {
                    side,
                    category,
                    stack_ordinal,
                    depth_in_stack,
                    subtype: subtype.clone(),
                },
                support: obs.len() as u32,
                best_image,
                subtype,
                light_kind,
                inferred_only: obs.iter().all(|o| o.node.object.inferred),
                sources: obs.iter().map(|o| trees[o.tree].image_id.clone()).collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}
