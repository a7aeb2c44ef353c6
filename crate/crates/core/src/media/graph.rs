use std::cmp::Reverse;
use std::collections::BinaryHeap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{TimeRange, Timestamp};

/// A timed subtitle on the output timeline. Text is at most two lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct SubtitleCue {
    pub range: TimeRange,
    pub text: String,
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RenderOp {
    ExtractClip {
        asset_uri: String,
        range: TimeRange,
        mute: bool,
    },
    OverlayAudio {
        input: NodeId,
        audio_uri: String,
        /// Offset into the audio where this clip's share begins.
        offset: Timestamp,
    },
    BurnSubtitle {
        input: NodeId,
        cues: Vec<SubtitleCue>,
    },
    Concat {
        inputs: Vec<NodeId>,
    },
    MixMusic {
        input: NodeId,
        track_uri: String,
        gain: f64,
    },
    Output {
        input: NodeId,
        container: String,
        width: u32,
        height: u32,
        aspect: String,
    },
}

impl RenderOp {
    pub fn name(&self) -> &'static str {
        match self {
            RenderOp::ExtractClip { .. } => "ExtractClip",
            RenderOp::OverlayAudio { .. } => "OverlayAudio",
            RenderOp::BurnSubtitle { .. } => "BurnSubtitle",
            RenderOp::Concat { .. } => "Concat",
            RenderOp::MixMusic { .. } => "MixMusic",
            RenderOp::Output { .. } => "Output",
        }
    }

    pub fn inputs(&self) -> Vec<NodeId> {
        match self {
            RenderOp::ExtractClip { .. } => Vec::new(),
            RenderOp::OverlayAudio { input, .. }
            | RenderOp::BurnSubtitle { input, .. }
            | RenderOp::MixMusic { input, .. }
            | RenderOp::Output { input, .. } => vec![*input],
            RenderOp::Concat { inputs } => inputs.clone(),
        }
    }
}

/// Executable composition plan. Node ids are positions in `nodes`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RenderGraph {
    pub nodes: Vec<RenderOp>,
}

impl RenderGraph {
    pub fn push(&mut self, op: RenderOp) -> NodeId {
        self.nodes.push(op);
        self.nodes.len() - 1
    }

    pub fn count(&self, name: &str) -> usize {
        self.nodes.iter().filter(|n| n.name() == name).count()
    }

    pub fn output(&self) -> Option<(NodeId, &RenderOp)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| matches!(n, RenderOp::Output { .. }))
    }

    /// Structural checks plus a topological order (smallest ready id first).
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let n = self.nodes.len();
        let outputs = self.count("Output");
        if outputs != 1 {
            return Err(Error::Graph(format!("expected exactly one Output node, found {outputs}")));
        }
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (id, node) in self.nodes.iter().enumerate() {
            let inputs = node.inputs();
            if let RenderOp::Concat { inputs } = node {
                if inputs.is_empty() {
                    return Err(Error::Graph(format!("Concat node {id} has no inputs")));
                }
            }
            for input in inputs {
                if input >= n {
                    return Err(Error::Graph(format!("node {id} references missing node {input}")));
                }
                indegree[id] += 1;
                children[input].push(id);
            }
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            (0..n).filter(|i| indegree[*i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(id)) = ready.pop() {
            order.push(id);
            for &child in &children[id] {
                indegree[child] -= 1;
                if indegree[child] == 0 {
                    ready.push(Reverse(child));
                }
            }
        }
        if order.len() != n {
            return Err(Error::Graph("render graph contains a cycle".into()));
        }
        Ok(order)
    }

    /// Playback length of a node's output, following the graph.
    pub fn duration_of(&self, id: NodeId) -> Timestamp {
        match &self.nodes[id] {
            RenderOp::ExtractClip { range, .. } => range.len(),
            RenderOp::Concat { inputs } => inputs.iter().map(|i| self.duration_of(*i)).sum(),
            other => other.inputs().first().map_or(Timestamp::ZERO, |i| self.duration_of(*i)),
        }
    }

    /// Expected duration of the final output. Call only on validated graphs.
    pub fn output_duration(&self) -> Timestamp {
        self.output().map_or(Timestamp::ZERO, |(id, _)| self.duration_of(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_clip_graph() -> RenderGraph {
        let mut g = RenderGraph::default();
        let a = g.push(RenderOp::ExtractClip {
            asset_uri: "p/media/a.json".into(),
            range: TimeRange::secs(0, 10),
            mute: true,
        });
        let b = g.push(RenderOp::ExtractClip {
            asset_uri: "p/media/a.json".into(),
            range: TimeRange::secs(20, 30),
            mute: false,
        });
        let o = g.push(RenderOp::OverlayAudio {
            input: a,
            audio_uri: "p/plans/n.wav".into(),
            offset: Timestamp::ZERO,
        });
        let c = g.push(RenderOp::Concat { inputs: vec![o, b] });
        g.push(RenderOp::Output {
            input: c,
            container: "mp4".into(),
            width: 854,
            height: 480,
            aspect: "16:9".into(),
        });
        g
    }

    /// Brute-force oracle: enumerate every permutation, keep those that respect
    /// all edges, and take the lexicographically smallest.
    fn smallest_topo_by_enumeration(g: &RenderGraph) -> Vec<NodeId> {
        fn permute(rest: &mut Vec<NodeId>, cur: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
            if rest.is_empty() {
                out.push(cur.clone());
                return;
            }
            for i in 0..rest.len() {
                let x = rest.remove(i);
                cur.push(x);
                permute(rest, cur, out);
                cur.pop();
                rest.insert(i, x);
            }
        }
        let mut all = Vec::new();
        permute(&mut (0..g.nodes.len()).collect(), &mut Vec::new(), &mut all);
        let valid = |p: &Vec<NodeId>| {
            let pos = |x: NodeId| p.iter().position(|y| *y == x).unwrap();
            g.nodes
                .iter()
                .enumerate()
                .all(|(id, n)| n.inputs().iter().all(|i| pos(*i) < pos(id)))
        };
        all.into_iter().filter(valid).min().unwrap()
    }

    #[test]
    fn topological_order_matches_enumeration_oracle() {
        let g = two_clip_graph();
        let order = g.topological_order().unwrap();
        assert_eq!(order, smallest_topo_by_enumeration(&g));
        let names: Vec<_> = order.iter().map(|i| g.nodes[*i].name()).collect();
        assert_eq!(names, ["ExtractClip", "ExtractClip", "OverlayAudio", "Concat", "Output"]);
    }

    #[test]
    fn cycle_is_graph_error() {
        let mut g = RenderGraph::default();
        g.push(RenderOp::Concat { inputs: vec![1] });
        g.push(RenderOp::OverlayAudio {
            input: 0,
            audio_uri: "x".into(),
            offset: Timestamp::ZERO,
        });
        g.push(RenderOp::Output {
            input: 1,
            container: "mp4".into(),
            width: 1,
            height: 1,
            aspect: "1:1".into(),
        });
        assert!(matches!(g.topological_order(), Err(Error::Graph(m)) if m.contains("cycle")));
    }

    #[test]
    fn requires_single_output() {
        let mut g = two_clip_graph();
        g.nodes.pop();
        assert!(matches!(g.topological_order(), Err(Error::Graph(_))));
    }

    #[test]
    fn output_duration_sums_concat() {
        assert_eq!(two_clip_graph().output_duration(), Timestamp::from_secs(20));
    }
}
