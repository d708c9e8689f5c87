//! Minimum-coverage suites compared against exhaustive search.

use std::collections::VecDeque;

use proptest::prelude::*;
use usecert_core::fixture::data_exchange_model;
use usecert_core::testgen::generate_min_coverage;
use usecert_core::UsageModel;

/// Fewest steps of a walk from the source that traverses every arc and ends
/// at the sink, where jumping from the sink back to the source is free
/// (starting a new test). 0-1 BFS over (state, covered arcs).
fn exhaustive_optimum(m: &UsageModel) -> usize {
    let arcs = m.arcs().len();
    assert!(arcs <= 20);
    let full = (1usize << arcs) - 1;
    let n = m.state_count();
    let idx = |s: usize, mask: usize| mask * n + s;
    let mut dist = vec![usize::MAX; n << arcs];
    let mut queue = VecDeque::new();
    dist[idx(m.source().0, 0)] = 0;
    queue.push_back((m.source().0, 0usize));
    while let Some((s, mask)) = queue.pop_front() {
        let d = dist[idx(s, mask)];
        if s == m.sink().0 {
            if mask == full {
                return d;
            }
            let r = idx(m.source().0, mask);
            if d < dist[r] {
                dist[r] = d;
                queue.push_front((m.source().0, mask));
            }
            continue;
        }
        for a in m.arc_ids() {
            let arc = m.arc(a);
            if arc.from.0 != s {
                continue;
            }
            let next = (arc.to.0, mask | (1 << a.0));
            if d + 1 < dist[idx(next.0, next.1)] {
                dist[idx(next.0, next.1)] = d + 1;
                queue.push_back(next);
            }
        }
    }
    unreachable!("every arc is coverable")
}

fn check_suite(m: &UsageModel) -> usize {
    let g = generate_min_coverage(m);
    assert!(g.warnings.is_empty());
    let mut covered = vec![false; m.arcs().len()];
    for c in &g.cases {
        c.check(m).unwrap();
        for a in c.arcs() {
            covered[a.0] = true;
        }
    }
    assert!(covered.iter().all(|&c| c), "not all arcs covered");
    g.cases.iter().map(|c| c.steps.len()).sum()
}

fn random_model(n: usize, extra: &[Option<usize>]) -> UsageModel {
    let sink = n - 1;
    let name = |i: usize| if i == sink { "Exit".to_string() } else { format!("s{i}") };
    let mut text = String::from("model R\n");
    for (i, extra) in extra.iter().enumerate().take(sink) {
        text.push_str(&format!("{}[{}]\n", if i == 0 { "source " } else { "" }, name(i)));
        text.push_str(&format!("  \"a/r\" [{}]\n", name(i + 1)));
        if let Some(t) = extra {
            text.push_str(&format!("  \"b/r\" [{}]\n", name(t % n)));
        }
    }
    UsageModel::from_tml(&text).unwrap()
}

#[test]
fn small_models_by_hand() {
    let diamond = UsageModel::from_tml(
        "model D\nsource [s]\n \"a/r\" [A]\n \"b/r\" [B]\n[A]\n \"x/r\" [Exit]\n[B]\n \"y/r\" [Exit]\n",
    )
    .unwrap();
    assert_eq!(exhaustive_optimum(&diamond), 4);
    assert_eq!(check_suite(&diamond), 4);
    // back arc from A to s forces a second pass through s -> A
    let back = UsageModel::from_tml("model B\nsource [s]\n \"a/r\" [A]\n[A]\n \"x/r\" [Exit]\n \"y/r\" [s]\n").unwrap();
    assert_eq!(exhaustive_optimum(&back), 4);
    assert_eq!(check_suite(&back), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]
    #[test]
    fn random_models_reach_the_optimum(
        n in 4usize..=8,
        extra in proptest::collection::vec(proptest::option::of(0usize..8), 7),
    ) {
        let m = random_model(n, &extra);
        prop_assert_eq!(check_suite(&m), exhaustive_optimum(&m));
    }
}

/// For the fixture the search space is too large, so use the classic
/// reduction: extra steps = cheapest matching of in-surplus to out-surplus
/// units by shortest-path distance (restart hop free), enumerated by brute
/// force over permutations.
fn fixture_optimum(m: &UsageModel) -> usize {
    let n = m.state_count();
    let (src, sink) = (m.source().0, m.sink().0);
    let mut balance = vec![0i64; n];
    for a in m.arcs() {
        balance[a.to.0] += 1;
        balance[a.from.0] -= 1;
    }
    balance[src] += 1;
    balance[sink] -= 1;
    let dist = |from: usize| {
        let mut d = vec![usize::MAX; n];
        let mut q = VecDeque::from([from]);
        d[from] = 0;
        while let Some(u) = q.pop_front() {
            if u == sink && d[u] < d[src] {
                d[src] = d[u];
                q.push_front(src);
            }
            for a in m.arcs().iter().filter(|a| a.from.0 == u) {
                if d[u] + 1 < d[a.to.0] {
                    d[a.to.0] = d[u] + 1;
                    q.push_back(a.to.0);
                }
            }
        }
        d
    };
    let mut surplus = Vec::new();
    let mut deficit = Vec::new();
    for (v, &b) in balance.iter().enumerate() {
        for _ in 0..b.max(0) {
            surplus.push(v);
        }
        for _ in 0..(-b).max(0) {
            deficit.push(v);
        }
    }
    assert_eq!(surplus.len(), deficit.len());
    assert!(surplus.len() <= 9);
    let table: Vec<Vec<usize>> = surplus
        .iter()
        .map(|&u| {
            let d = dist(u);
            deficit.iter().map(|&v| d[v]).collect()
        })
        .collect();
    let mut perm: Vec<usize> = (0..deficit.len()).collect();
    let mut best = usize::MAX;
    permute(&mut perm, 0, &mut |p| {
        best = best.min(p.iter().enumerate().map(|(i, &j)| table[i][j]).sum());
    });
    m.arcs().len() + best
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

#[test]
fn fixture_suite_is_optimal_and_complete() {
    let m = data_exchange_model();
    let steps = check_suite(&m);
    assert_eq!(steps, fixture_optimum(&m));
    assert_eq!(generate_min_coverage(&m).cases.len(), 4);
}
