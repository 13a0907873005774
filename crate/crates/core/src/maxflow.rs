//! Augmenting-path max-flow with two search trees grown from the terminals
//! and reused across augmentations (Boykov-Kolmogorov).
//!
//! Nodes carry a single signed terminal residual: positive means residual
//! capacity from the source, negative means residual capacity to the sink.

use std::collections::VecDeque;

const NO_PARENT: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;
const NO_ARC: u32 = u32::MAX;
const INFINITE_DIST: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Arc {
    head: u32,
    next: u32,
    r_cap: f64,
}

#[derive(Debug, Clone)]
struct Node {
    first: u32,
    /// Arc from this node toward its tree parent, or one of the sentinels.
    parent: u32,
    ts: u32,
    dist: u32,
    is_sink: bool,
    active: bool,
    tr_cap: f64,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    flow: f64,
}

#[inline]
fn sister(a: u32) -> u32 {
    a ^ 1
}

impl FlowGraph {
    pub fn new(n_nodes: usize, edge_hint: usize) -> Self {
        let node = Node {
            first: NO_ARC,
            parent: NO_PARENT,
            ts: 0,
            dist: 0,
            is_sink: false,
            active: false,
            tr_cap: 0.0,
        };
        Self {
            nodes: vec![node; n_nodes],
            arcs: Vec::with_capacity(edge_hint * 2),
            flow: 0.0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds capacity `source` on s->i and `sink` on i->t.
    pub fn add_terminal_weights(&mut self, i: usize, source: f64, sink: f64) {
        debug_assert!(source >= 0.0 && sink >= 0.0);
        let node = &mut self.nodes[i];
        let delta = node.tr_cap;
        let (mut cs, mut ct) = (source, sink);
        if delta > 0.0 {
            cs += delta;
        } else {
            ct -= delta;
        }
        self.flow += cs.min(ct);
        node.tr_cap = cs - ct;
    }

    /// Adds an arc pair i->j (capacity `cap`) and j->i (capacity `rev_cap`).
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        debug_assert!(i != j && cap >= 0.0 && rev_cap >= 0.0);
        let a = self.arcs.len() as u32;
        self.arcs.push(Arc {
            head: j as u32,
            next: self.nodes[i].first,
            r_cap: cap,
        });
        self.nodes[i].first = a;
        self.arcs.push(Arc {
            head: i as u32,
            next: self.nodes[j].first,
            r_cap: rev_cap,
        });
        self.nodes[j].first = a + 1;
    }

    /// Runs max-flow to completion and returns the flow value (including the
    /// constant absorbed by [`FlowGraph::add_terminal_weights`]).
    pub fn max_flow(&mut self) -> f64 {
        let mut queue: VecDeque<u32> = VecDeque::new();
        let mut orphans: VecDeque<u32> = VecDeque::new();
        for (i, node) in self.nodes.iter_mut().enumerate() {
            node.ts = 0;
            node.active = false;
            if node.tr_cap > 0.0 {
                node.is_sink = false;
                node.parent = TERMINAL;
                node.dist = 1;
            } else if node.tr_cap < 0.0 {
                node.is_sink = true;
                node.parent = TERMINAL;
                node.dist = 1;
            } else {
                node.parent = NO_PARENT;
                continue;
            }
            node.active = true;
            queue.push_back(i as u32);
        }

        let mut time: u32 = 0;
        let mut current: Option<u32> = None;
        loop {
            if let Some(c) = current {
                self.nodes[c as usize].active = false;
            }
            let i = match current
                .take()
                .filter(|&c| self.nodes[c as usize].parent != NO_PARENT)
            {
                Some(c) => c,
                None => match self.next_active(&mut queue) {
                    Some(i) => i,
                    None => break,
                },
            };
            let middle = self.grow(i, &mut queue);
            if middle == NO_ARC {
                continue;
            }
            // keep growing from the same node next round
            self.nodes[i as usize].active = true;
            current = Some(i);

            time += 1;
            self.augment(middle, &mut orphans);
            while let Some(o) = orphans.pop_front() {
                if self.nodes[o as usize].is_sink {
                    self.adopt_sink_orphan(o, time, &mut queue, &mut orphans);
                } else {
                    self.adopt_source_orphan(o, time, &mut queue, &mut orphans);
                }
            }
        }
        self.flow
    }

    fn next_active(&mut self, queue: &mut VecDeque<u32>) -> Option<u32> {
        while let Some(i) = queue.pop_front() {
            let node = &mut self.nodes[i as usize];
            node.active = false;
            if node.parent != NO_PARENT {
                return Some(i);
            }
        }
        None
    }

    fn activate(&mut self, j: u32, queue: &mut VecDeque<u32>) {
        let node = &mut self.nodes[j as usize];
        if !node.active {
            node.active = true;
            queue.push_back(j);
        }
    }

    /// Expands the tree of `i`; returns an arc oriented source-tree to
    /// sink-tree when the trees touch, or `NO_ARC`.
    fn grow(&mut self, i: u32, queue: &mut VecDeque<u32>) -> u32 {
        let (i_sink, i_ts, i_dist) = {
            let n = &self.nodes[i as usize];
            (n.is_sink, n.ts, n.dist)
        };
        let mut a = self.nodes[i as usize].first;
        while a != NO_ARC {
            let residual = if i_sink {
                self.arcs[sister(a) as usize].r_cap
            } else {
                self.arcs[a as usize].r_cap
            };
            if residual > 0.0 {
                let j = self.arcs[a as usize].head;
                let nj = &mut self.nodes[j as usize];
                if nj.parent == NO_PARENT {
                    nj.is_sink = i_sink;
                    nj.parent = sister(a);
                    nj.ts = i_ts;
                    nj.dist = i_dist + 1;
                    self.activate(j, queue);
                } else if nj.is_sink != i_sink {
                    return if i_sink { sister(a) } else { a };
                } else if nj.ts <= i_ts && nj.dist > i_dist {
                    nj.parent = sister(a);
                    nj.ts = i_ts;
                    nj.dist = i_dist + 1;
                }
            }
            a = self.arcs[a as usize].next;
        }
        NO_ARC
    }

    fn augment(&mut self, middle: u32, orphans: &mut VecDeque<u32>) {
        let mut bottleneck = self.arcs[middle as usize].r_cap;
        // source side
        let mut i = self.arcs[sister(middle) as usize].head;
        loop {
            let a = self.nodes[i as usize].parent;
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[sister(a) as usize].r_cap);
            i = self.arcs[a as usize].head;
        }
        bottleneck = bottleneck.min(self.nodes[i as usize].tr_cap);
        // sink side
        let mut i = self.arcs[middle as usize].head;
        loop {
            let a = self.nodes[i as usize].parent;
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[a as usize].r_cap);
            i = self.arcs[a as usize].head;
        }
        bottleneck = bottleneck.min(-self.nodes[i as usize].tr_cap);

        self.arcs[sister(middle) as usize].r_cap += bottleneck;
        self.arcs[middle as usize].r_cap -= bottleneck;

        let mut i = self.arcs[sister(middle) as usize].head;
        loop {
            let a = self.nodes[i as usize].parent;
            if a == TERMINAL {
                break;
            }
            self.arcs[a as usize].r_cap += bottleneck;
            let s = &mut self.arcs[sister(a) as usize];
            s.r_cap -= bottleneck;
            let saturated = s.r_cap <= 0.0;
            let next = self.arcs[a as usize].head;
            if saturated {
                self.make_orphan(i, orphans);
            }
            i = next;
        }
        let n = &mut self.nodes[i as usize];
        n.tr_cap -= bottleneck;
        if n.tr_cap <= 0.0 {
            n.tr_cap = 0.0;
            self.make_orphan(i, orphans);
        }

        let mut i = self.arcs[middle as usize].head;
        loop {
            let a = self.nodes[i as usize].parent;
            if a == TERMINAL {
                break;
            }
            self.arcs[sister(a) as usize].r_cap += bottleneck;
            let arc = &mut self.arcs[a as usize];
            arc.r_cap -= bottleneck;
            let saturated = arc.r_cap <= 0.0;
            let next = arc.head;
            if saturated {
                self.make_orphan(i, orphans);
            }
            i = next;
        }
        let n = &mut self.nodes[i as usize];
        n.tr_cap += bottleneck;
        if n.tr_cap >= 0.0 {
            n.tr_cap = 0.0;
            self.make_orphan(i, orphans);
        }

        self.flow += bottleneck;
    }

    fn make_orphan(&mut self, i: u32, orphans: &mut VecDeque<u32>) {
        self.nodes[i as usize].parent = ORPHAN;
        orphans.push_back(i);
    }

    /// Distance from `j` to its terminal through valid parents, refreshing
    /// the timestamp marks along the way; `INFINITE_DIST` if the chain ends
    /// in an orphan.
    fn origin_distance(&mut self, start: u32, time: u32) -> u32 {
        let mut j = start;
        let mut d: u32 = 0;
        loop {
            let n = &self.nodes[j as usize];
            if n.ts == time {
                d += n.dist;
                break;
            }
            let a = n.parent;
            d += 1;
            if a == TERMINAL {
                let n = &mut self.nodes[j as usize];
                n.ts = time;
                n.dist = 1;
                break;
            }
            if a == ORPHAN {
                return INFINITE_DIST;
            }
            j = self.arcs[a as usize].head;
        }
        let mut j = start;
        let mut dd = d;
        while self.nodes[j as usize].ts != time {
            let n = &mut self.nodes[j as usize];
            n.ts = time;
            n.dist = dd;
            dd -= 1;
            j = self.arcs[n.parent as usize].head;
        }
        d
    }

    fn adopt_source_orphan(
        &mut self,
        i: u32,
        time: u32,
        queue: &mut VecDeque<u32>,
        orphans: &mut VecDeque<u32>,
    ) {
        self.adopt(i, false, time, queue, orphans);
    }

    fn adopt_sink_orphan(
        &mut self,
        i: u32,
        time: u32,
        queue: &mut VecDeque<u32>,
        orphans: &mut VecDeque<u32>,
    ) {
        self.adopt(i, true, time, queue, orphans);
    }

    fn adopt(
        &mut self,
        i: u32,
        sink_tree: bool,
        time: u32,
        queue: &mut VecDeque<u32>,
        orphans: &mut VecDeque<u32>,
    ) {
        let mut best_arc = NO_ARC;
        let mut best_dist = INFINITE_DIST;
        let mut a0 = self.nodes[i as usize].first;
        while a0 != NO_ARC {
            // residual toward i for the source tree, away from i for the sink tree
            let residual = if sink_tree {
                self.arcs[a0 as usize].r_cap
            } else {
                self.arcs[sister(a0) as usize].r_cap
            };
            let j = self.arcs[a0 as usize].head;
            let nj = &self.nodes[j as usize];
            if residual > 0.0 && nj.is_sink == sink_tree && nj.parent != NO_PARENT {
                let d = self.origin_distance(j, time);
                if d < best_dist {
                    best_arc = a0;
                    best_dist = d;
                }
            }
            a0 = self.arcs[a0 as usize].next;
        }

        if best_arc != NO_ARC {
            let n = &mut self.nodes[i as usize];
            n.parent = best_arc;
            n.ts = time;
            n.dist = best_dist + 1;
            return;
        }

        self.nodes[i as usize].parent = NO_PARENT;
        let mut a0 = self.nodes[i as usize].first;
        while a0 != NO_ARC {
            let j = self.arcs[a0 as usize].head;
            let (j_sink, j_parent) = {
                let nj = &self.nodes[j as usize];
                (nj.is_sink, nj.parent)
            };
            if j_sink == sink_tree && j_parent != NO_PARENT {
                let residual = if sink_tree {
                    self.arcs[a0 as usize].r_cap
                } else {
                    self.arcs[sister(a0) as usize].r_cap
                };
                if residual > 0.0 {
                    self.activate(j, queue);
                }
                if j_parent != TERMINAL
                    && j_parent != ORPHAN
                    && self.arcs[j_parent as usize].head == i
                {
                    self.make_orphan(j, orphans);
                }
            }
            a0 = self.arcs[a0 as usize].next;
        }
    }

    /// Nodes reachable from the source in the residual graph after
    /// [`FlowGraph::max_flow`]. This is the smallest source side among all
    /// minimum cuts.
    pub fn source_side(&self) -> Vec<bool> {
        let mut reached = vec![false; self.nodes.len()];
        let mut stack: Vec<u32> = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.tr_cap > 0.0 {
                reached[i] = true;
                stack.push(i as u32);
            }
        }
        while let Some(i) = stack.pop() {
            let mut a = self.nodes[i as usize].first;
            while a != NO_ARC {
                let arc = &self.arcs[a as usize];
                if arc.r_cap > 0.0 && !reached[arc.head as usize] {
                    reached[arc.head as usize] = true;
                    stack.push(arc.head);
                }
                a = arc.next;
            }
        }
        reached
    }
}
