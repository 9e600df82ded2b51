//! Preference sorting and crowding distances for the many-objective
//! engines. Both work on plain fitness matrices so they can be exercised
//! without running a search: `fitness[i][g]` is individual i's fitness for
//! goal g, `lengths[i]` its statement count.

/// Whether `a` strictly dominates `b` over the given goals: no worse
/// everywhere, better somewhere.
fn dominates(a: usize, b: usize, fitness: &[Vec<f64>], goals: &[usize]) -> bool {
    let mut strictly_better = false;
    for &g in goals {
        if fitness[a][g] > fitness[b][g] {
            return false;
        }
        if fitness[a][g] < fitness[b][g] {
            strictly_better = true;
        }
    }
    strictly_better
}

/// Ranks the population into fronts. Front 0 holds, for every goal, one
/// test with the best fitness for it, ties broken toward fewer statements
/// and then stable order; the preferred tests focus the search on each
/// still-open goal. The remainder is sorted into non-dominated fronts over
/// the same goals.
pub fn preference_sort(
    fitness: &[Vec<f64>],
    lengths: &[usize],
    goals: &[usize],
) -> Vec<Vec<usize>> {
    let n = fitness.len();
    if n == 0 {
        return Vec::new();
    }
    let mut preferred = vec![false; n];
    for &g in goals {
        let mut best = 0;
        for i in 1..n {
            let better = (fitness[i][g], lengths[i]) < (fitness[best][g], lengths[best]);
            if better {
                best = i;
            }
        }
        preferred[best] = true;
    }

    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let front0: Vec<usize> = (0..n).filter(|&i| preferred[i]).collect();
    let mut remaining: Vec<usize> = (0..n).filter(|&i| !preferred[i]).collect();
    if !front0.is_empty() {
        fronts.push(front0);
    }
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| j != i && dominates(j, i, fitness, goals)))
            .collect();
        // With no goals nothing dominates anything and all of the
        // remainder lands in one front.
        debug_assert!(!front.is_empty());
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// NSGA-II crowding distances for one front, aligned with the front's
/// order. Boundary individuals per goal get ∞; interior ones accumulate
/// normalized gaps between their neighbours.
pub fn crowding_distances(front: &[usize], fitness: &[Vec<f64>], goals: &[usize]) -> Vec<f64> {
    let k = front.len();
    let mut distance = vec![0.0f64; k];
    if k == 0 {
        return distance;
    }
    for &g in goals {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            fitness[front[a]][g].partial_cmp(&fitness[front[b]][g]).expect("finite fitness")
        });
        distance[order[0]] = f64::INFINITY;
        distance[order[k - 1]] = f64::INFINITY;
        let lo = fitness[front[order[0]]][g];
        let hi = fitness[front[order[k - 1]]][g];
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..k.saturating_sub(1) {
            let prev = fitness[front[order[w - 1]]][g];
            let next = fitness[front[order[w + 1]]][g];
            distance[order[w]] += (next - prev) / range;
        }
    }
    distance
}
