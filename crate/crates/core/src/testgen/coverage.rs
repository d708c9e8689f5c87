//! Minimum-coverage generation as a directed Chinese postman problem.
//!
//! Add a restart edge sink → source, duplicate edges until every state has
//! equal in- and out-degree (cheapest duplication found by min-cost flow),
//! walk an Eulerian circuit, and cut it at every restart. Each piece is a
//! source-to-sink test; together they traverse every arc.
//!
//! Duplicating a model arc costs one test step; duplicating the restart edge
//! costs nothing in steps but adds a test. Costs are weighted so the flow
//! minimizes total steps first and number of tests second.

use super::{Generated, Method, TestCase};
use crate::model::{ArcId, UsageModel};

const STEP_COST: i64 = 1_000_000;
const RESTART_COST: i64 = 1;

#[derive(Clone, Copy)]
enum Edge {
    Model(ArcId),
    Restart,
}

struct FlowEdge {
    to: usize,
    cap: i64,
    cost: i64,
}

/// Successive shortest paths with Bellman-Ford; graphs here are tiny.
struct MinCostFlow {
    edges: Vec<FlowEdge>,
    adj: Vec<Vec<usize>>,
}

impl MinCostFlow {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.edges.len();
        self.edges.push(FlowEdge { to, cap, cost });
        self.adj[from].push(id);
        self.edges.push(FlowEdge {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adj[to].push(id + 1);
        id
    }

    fn flow(&self, id: usize) -> i64 {
        self.edges[id ^ 1].cap
    }

    fn run(&mut self, s: usize, t: usize) -> i64 {
        let n = self.adj.len();
        let mut total = 0;
        loop {
            let mut dist = vec![i64::MAX; n];
            let mut via = vec![usize::MAX; n];
            dist[s] = 0;
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if dist[u] == i64::MAX {
                        continue;
                    }
                    for &e in &self.adj[u] {
                        let edge = &self.edges[e];
                        if edge.cap > 0 && dist[u] + edge.cost < dist[edge.to] {
                            dist[edge.to] = dist[u] + edge.cost;
                            via[edge.to] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[t] == i64::MAX {
                return total;
            }
            let mut push = i64::MAX;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
            total += push;
        }
    }
}

/// A suite traversing every arc with the fewest total steps. The model must
/// be validated (all states reachable, sink reachable from all states).
pub fn generate_min_coverage(model: &UsageModel) -> Generated {
    let n = model.state_count();
    let (source, sink) = (model.source().0, model.sink().0);
    let mut edges: Vec<(usize, usize, Edge)> = model
        .arc_ids()
        .map(|a| (model.arc(a).from.0, model.arc(a).to.0, Edge::Model(a)))
        .collect();
    edges.push((sink, source, Edge::Restart));

    let mut balance = vec![0i64; n];
    for &(from, to, _) in &edges {
        balance[to] += 1;
        balance[from] -= 1;
    }
    // states with surplus inflow need extra outgoing traversals
    let (s, t) = (n, n + 1);
    let mut flow = MinCostFlow::new(n + 2);
    let unbounded = edges.len() as i64 * n as i64 + 1;
    let handles: Vec<usize> = edges
        .iter()
        .map(|&(from, to, e)| {
            let cost = match e {
                Edge::Model(_) => STEP_COST,
                Edge::Restart => RESTART_COST,
            };
            flow.add(from, to, unbounded, cost)
        })
        .collect();
    let mut need = 0;
    for (v, &b) in balance.iter().enumerate() {
        if b > 0 {
            flow.add(s, v, b, 0);
            need += b;
        } else if b < 0 {
            flow.add(v, t, -b, 0);
        }
    }
    let pushed = flow.run(s, t);
    let mut out = Generated::default();
    if pushed != need {
        out.warnings
            .push("model is not strongly connected through the sink; coverage impossible".into());
        return out;
    }

    // Hierholzer over the multigraph; copies of an edge are consumed in
    // stimulus order with the restart edge last.
    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(from, _, _)) in edges.iter().enumerate() {
        let copies = 1 + flow.flow(handles[i]);
        for _ in 0..copies {
            pending[from].push(i);
        }
    }
    for list in &mut pending {
        list.reverse(); // pop from the back in forward order
    }
    let mut stack: Vec<(usize, Option<usize>)> = vec![(source, None)];
    let mut circuit: Vec<usize> = Vec::new();
    while let Some(&(v, via)) = stack.last() {
        match pending[v].pop() {
            Some(e) => stack.push((edges[e].1, Some(e))),
            None => {
                stack.pop();
                if let Some(e) = via {
                    circuit.push(e);
                }
            }
        }
    }
    circuit.reverse();

    // rotate so the circuit starts right after its last restart, then cut
    let restart = edges.len() - 1;
    let last = circuit
        .iter()
        .rposition(|&e| e == restart)
        .expect("restart edge is in the circuit");
    circuit.rotate_left(last + 1);
    let mut current: Vec<ArcId> = Vec::new();
    for e in circuit {
        match edges[e].2 {
            Edge::Model(a) => current.push(a),
            Edge::Restart => {
                let id = out.cases.len();
                out.cases
                    .push(TestCase::from_arcs(model, id, Method::MinCoverage, None, &current));
                current.clear();
            }
        }
    }
    out
}
